#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ksr/image.hpp"
#include "ksr/simulate.hpp"

namespace ksr {

// ---------------------------------------------------------------------------
// Tensor container: magic "KSR1", u16 version, u32 entry count; per entry
// u16 name length + UTF-8 name, u8 dtype, u8 ndim, u64 dims, raw row-major
// little-endian payload. One format for images, k-space, masks, checkpoints.
// ---------------------------------------------------------------------------

enum class DType : std::uint8_t {
    Real32 = 1,
    Real64 = 2,
    Complex64 = 3,
    Complex128 = 4,
    Bool = 5,
};

inline size_t dtype_size(DType d) {
    switch (d) {
        case DType::Real32: return 4;
        case DType::Real64: return 8;
        case DType::Complex64: return 8;
        case DType::Complex128: return 16;
        case DType::Bool: return 1;
    }
    throw Error("IoError", "unknown dtype");
}

struct TensorEntry {
    std::string name;
    DType dtype = DType::Real64;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> raw;

    std::uint64_t n_elems() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

struct TensorFile {
    std::vector<TensorEntry> entries;

    const TensorEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
    const TensorEntry& require(const std::string& name) const {
        const TensorEntry* e = find(name);
        if (!e) throw Error("IoError", "missing entry: " + name);
        return *e;
    }
};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw Error("IoError", "truncated container");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace detail

inline void save_container(const std::string& path, const TensorFile& tf) {
    std::string out;
    out.append("KSR1", 4);
    detail::put<std::uint16_t>(out, 1);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tf.entries.size()));
    for (const auto& e : tf.entries) {
        detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
        out.append(e.name);
        detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
        detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) detail::put<std::uint64_t>(out, d);
        if (e.raw.size() != e.n_elems() * dtype_size(e.dtype))
            throw Error("IoError", "payload size mismatch for " + e.name);
        out.append(reinterpret_cast<const char*>(e.raw.data()), e.raw.size());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("IoError", "write failed: " + path);
}

inline TensorFile load_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("IoError", "cannot open: " + path);
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (in.size() < 4 || in.compare(0, 4, "KSR1") != 0)
        throw Error("IoError", "bad magic in " + path);
    pos = 4;
    const auto version = detail::get<std::uint16_t>(in, pos);
    if (version != 1) throw Error("IoError", "unsupported container version");
    const auto count = detail::get<std::uint32_t>(in, pos);
    TensorFile tf;
    tf.entries.resize(count);
    for (auto& e : tf.entries) {
        const auto nlen = detail::get<std::uint16_t>(in, pos);
        if (pos + nlen > in.size()) throw Error("IoError", "truncated container");
        e.name = in.substr(pos, nlen);
        pos += nlen;
        const auto dt = detail::get<std::uint8_t>(in, pos);
        if (dt < 1 || dt > 5) throw Error("IoError", "bad dtype");
        e.dtype = static_cast<DType>(dt);
        const auto ndim = detail::get<std::uint8_t>(in, pos);
        e.dims.resize(ndim);
        for (auto& d : e.dims) d = detail::get<std::uint64_t>(in, pos);
        const size_t nbytes = e.n_elems() * dtype_size(e.dtype);
        if (pos + nbytes > in.size()) throw Error("IoError", "truncated payload");
        e.raw.assign(in.begin() + pos, in.begin() + pos + nbytes);
        pos += nbytes;
    }
    return tf;
}

// ---- typed helpers --------------------------------------------------------

template <typename T>
TensorEntry make_entry(const std::string& name, DType dtype,
                       std::vector<std::uint64_t> dims, const T* data, size_t n) {
    TensorEntry e;
    e.name = name;
    e.dtype = dtype;
    e.dims = std::move(dims);
    e.raw.resize(n * sizeof(T));
    std::memcpy(e.raw.data(), data, e.raw.size());
    if (e.raw.size() != e.n_elems() * dtype_size(dtype))
        throw Error("IoError", "entry dims/payload mismatch");
    return e;
}

inline TensorEntry entry_from_image(const std::string& name, const RealImage& img) {
    return make_entry(name, DType::Real64,
                      {static_cast<std::uint64_t>(img.ny), static_cast<std::uint64_t>(img.nx)},
                      img.v.data(), img.v.size());
}

inline RealImage image_from_entry(const TensorEntry& e) {
    if (e.dtype != DType::Real64 || e.dims.size() != 2)
        throw Error("IoError", "entry is not a real64 image: " + e.name);
    RealImage img(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]));
    std::memcpy(img.v.data(), e.raw.data(), e.raw.size());
    return img;
}

inline TensorEntry entry_from_kspace(const std::string& name, const CoilKSpace& k) {
    return make_entry(name, DType::Complex128,
                      {static_cast<std::uint64_t>(k.nc), static_cast<std::uint64_t>(k.ny),
                       static_cast<std::uint64_t>(k.nx)},
                      k.v.data(), k.v.size());
}

inline CoilKSpace kspace_from_entry(const TensorEntry& e) {
    if (e.dims.size() != 3) throw Error("IoError", "k-space entry must be 3D");
    CoilKSpace k(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]),
                 static_cast<int>(e.dims[2]));
    if (e.dtype == DType::Complex128) {
        std::memcpy(k.v.data(), e.raw.data(), e.raw.size());
    } else if (e.dtype == DType::Complex64) {
        const auto* p = reinterpret_cast<const std::complex<float>*>(e.raw.data());
        for (size_t i = 0; i < k.v.size(); ++i) k.v[i] = p[i];
    } else {
        throw Error("IoError", "k-space entry must be complex");
    }
    return k;
}

inline TensorEntry entry_from_mask(const SamplingMask& m) {
    return make_entry("mask/keep", DType::Bool,
                      {static_cast<std::uint64_t>(m.keep.size())}, m.keep.data(),
                      m.keep.size());
}

inline TensorEntry entry_scalar(const std::string& name, double v) {
    return make_entry(name, DType::Real64, {1}, &v, 1);
}

inline double scalar_from_entry(const TensorEntry& e) {
    if (e.dtype != DType::Real64 || e.n_elems() != 1)
        throw Error("IoError", "entry is not a scalar: " + e.name);
    double v;
    std::memcpy(&v, e.raw.data(), sizeof(double));
    return v;
}

inline SamplingMask mask_from_file(const TensorFile& tf) {
    const TensorEntry& keep = tf.require("mask/keep");
    if (keep.dtype != DType::Bool || keep.dims.size() != 1)
        throw Error("IoError", "bad mask entry");
    SamplingMask m;
    m.keep.assign(keep.raw.begin(), keep.raw.end());
    m.accel = static_cast<int>(scalar_from_entry(tf.require("mask/accel")));
    m.n_acs = static_cast<int>(scalar_from_entry(tf.require("mask/acs")));
    return m;
}

// ---------------------------------------------------------------------------
// Config file: TOML-style `key = value` lines with [section] headers and
// '#' comments. Unknown keys are rejected by the typed loader.
// ---------------------------------------------------------------------------

using ConfigDoc = std::map<std::string, std::string>; // "section.key" -> value

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline ConfigDoc parse_config_text(const std::string& text) {
    ConfigDoc doc;
    std::string section;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = detail::trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw Error("IoError", "bad config line: " + line);
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw Error("IoError", "bad config line: " + line);
        doc[section.empty() ? key : section + "." + key] = val;
    }
    return doc;
}

inline ConfigDoc load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("IoError", "cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

} // namespace ksr
