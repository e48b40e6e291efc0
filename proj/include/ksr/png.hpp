#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ksr/image.hpp"

namespace ksr {
namespace detail {

inline void png_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
    png_be32(out, static_cast<std::uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = ::crc32(::crc32(0L, nullptr, 0), out.data() + start,
                              static_cast<uInt>(out.size() - start));
    png_be32(out, static_cast<std::uint32_t>(crc));
}

} // namespace detail

// Minimal deterministic 8-bit grayscale PNG writer.
inline void write_png_gray8(const std::string& path, int width, int height,
                            const std::vector<std::uint8_t>& pixels) {
    if (static_cast<size_t>(width) * height != pixels.size())
        throw Error("ShapeMismatch", "pixel buffer size");

    std::vector<std::uint8_t> scanlines;
    scanlines.reserve(static_cast<size_t>(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        scanlines.push_back(0); // filter type: none
        scanlines.insert(scanlines.end(), pixels.begin() + static_cast<size_t>(y) * width,
                         pixels.begin() + static_cast<size_t>(y + 1) * width);
    }
    uLongf zlen = compressBound(static_cast<uLong>(scanlines.size()));
    std::vector<std::uint8_t> zdata(zlen);
    if (compress2(zdata.data(), &zlen, scanlines.data(),
                  static_cast<uLong>(scanlines.size()), 6) != Z_OK)
        throw Error("IoError", "deflate failed");
    zdata.resize(zlen);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    detail::png_be32(ihdr, static_cast<std::uint32_t>(width));
    detail::png_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", zdata);
    detail::png_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("IoError", "write failed: " + path);
}

// Min-max scaled export of a real image.
inline void export_png(const std::string& path, const RealImage& img) {
    const auto [lo_it, hi_it] = std::minmax_element(img.v.begin(), img.v.end());
    const double lo = *lo_it, hi = *hi_it;
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::vector<std::uint8_t> px(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        px[i] = static_cast<std::uint8_t>(std::clamp((img.v[i] - lo) * scale, 0.0, 255.0));
    write_png_gray8(path, img.nx, img.ny, px);
}

// Difference image with symmetric scaling: zero difference maps to mid-gray.
inline void export_png_diff(const std::string& path, const RealImage& recon,
                            const RealImage& truth) {
    if (!recon.same_shape(truth)) throw Error("ShapeMismatch");
    double amax = 0;
    for (size_t i = 0; i < recon.size(); ++i)
        amax = std::max(amax, std::abs(recon.v[i] - truth.v[i]));
    std::vector<std::uint8_t> px(recon.size());
    for (size_t i = 0; i < recon.size(); ++i) {
        const double d = amax > 0 ? (recon.v[i] - truth.v[i]) / amax : 0.0; // [-1,1]
        px[i] = static_cast<std::uint8_t>(std::clamp(127.5 + 127.5 * d, 0.0, 255.0));
    }
    write_png_gray8(path, recon.nx, recon.ny, px);
}

} // namespace ksr
