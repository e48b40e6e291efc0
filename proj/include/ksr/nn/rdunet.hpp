#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ksr/nn/layers.hpp"

namespace ksr::nn {

struct NetConfig {
    int depth = 2;         // number of pooling levels
    int base_channels = 16;
    ActKind activation = ActKind::PoLU;
    double polu_n = 1.0;
    bool use_rdb = true;   // false = plain copy skips (the U-Net comparison arm)

    bool operator==(const NetConfig&) const = default;
};

// conv3x3 -> BN -> activation
template <typename T>
struct ConvBlock {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
    Activation<T> act;

    ConvBlock() = default;
    ConvBlock(int c_in, int c_out, const NetConfig& cfg, const std::string& name)
        : conv(c_in, c_out, 3, name + ".conv"), bn(c_out, name + ".bn") {
        act.kind = cfg.activation;
        act.n = static_cast<T>(cfg.polu_n);
    }

    template <typename Rng>
    void init(Rng& rng) {
        conv.init(rng);
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
        return act.forward(bn.forward(conv.forward(x), mode));
    }
    Tensor4<T> backward(const Tensor4<T>& g) {
        return conv.backward(bn.backward(act.backward(g)));
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&conv.weight);
        out.push_back(&conv.bias);
        out.push_back(&bn.gamma);
        out.push_back(&bn.beta);
    }
};

// Residual Dense Block: d1 = act(BN(conv3x3(x))) with c_out = c_in,
// d2 = conv3x3(concat(x, d1)) halving channels back to c, output = x + d2.
// Zero second-conv weights make it the exact identity.
template <typename T>
struct RDB {
    int channels = 0;
    ConvBlock<T> block1;
    Conv2d<T> conv2;
    bool has_cache = false;

    RDB() = default;
    RDB(int channels_, const NetConfig& cfg, const std::string& name)
        : channels(channels_),
          block1(channels_, channels_, cfg, name + ".block1"),
          conv2(2 * channels_, channels_, 3, name + ".conv2") {}

    template <typename Rng>
    void init(Rng& rng) {
        block1.init(rng);
        conv2.init(rng);
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
        has_cache = true;
        Tensor4<T> d1 = block1.forward(x, mode);
        Tensor4<T> d2 = conv2.forward(concat_channels(x, d1));
        Tensor4<T> out = x;
        for (size_t i = 0; i < out.size(); ++i) out.v[i] += d2.v[i];
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& g) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        Tensor4<T> gcat = conv2.backward(g);
        auto [gx_cat, gd1] = split_channels(gcat, channels, channels);
        Tensor4<T> gx = block1.backward(gd1);
        for (size_t i = 0; i < gx.size(); ++i) gx.v[i] += gx_cat.v[i] + g.v[i];
        has_cache = false;
        return gx;
    }

    void collect(std::vector<Param<T>*>& out) {
        block1.collect(out);
        out.push_back(&conv2.weight);
        out.push_back(&conv2.bias);
    }
};

// Encoder/decoder network with residual-dense skip refinement and a global
// residual connection: y = x + head(decoder(encoder(x))).
template <typename T>
struct RDUNet {
    NetConfig cfg;

    std::vector<ConvBlock<T>> enc1, enc2;       // per level
    std::vector<MaxPool2<T>> pools;
    ConvBlock<T> bottom1, bottom2;
    std::vector<Deconv2<T>> ups;                // index = level, applied top-down
    std::vector<RDB<T>> rdbs;
    std::vector<ConvBlock<T>> dec1, dec2;
    Conv2d<T> head;

    Tensor4<T> cache_input;
    bool forwarded = false;

    explicit RDUNet(const NetConfig& cfg_, std::uint64_t seed = 0) : cfg(cfg_) {
        if (cfg.depth < 1) throw Error("ShapeMismatch", "depth must be >= 1");
        const int f = cfg.base_channels;
        pools.resize(cfg.depth);
        for (int k = 0; k < cfg.depth; ++k) {
            const int cin = (k == 0) ? 1 : f << (k - 1);
            const int cout = f << k;
            const std::string lv = "enc" + std::to_string(k);
            enc1.emplace_back(cin, cout, cfg, lv + ".a");
            enc2.emplace_back(cout, cout, cfg, lv + ".b");
        }
        const int cb = f << (cfg.depth - 1);
        bottom1 = ConvBlock<T>(cb, 2 * cb, cfg, "bottom.a");
        bottom2 = ConvBlock<T>(2 * cb, 2 * cb, cfg, "bottom.b");
        for (int k = 0; k < cfg.depth; ++k) {
            const int c = f << k;
            const std::string lv = "dec" + std::to_string(k);
            ups.emplace_back(2 * c, lv + ".up");
            rdbs.emplace_back(c, cfg, lv + ".rdb");
            dec1.emplace_back(2 * c, c, cfg, lv + ".a");
            dec2.emplace_back(c, c, cfg, lv + ".b");
        }
        head = Conv2d<T>(f, 1, 1, "head");

        std::mt19937_64 rng(seed);
        for (auto& b : enc1) b.init(rng);
        for (auto& b : enc2) b.init(rng);
        bottom1.init(rng);
        bottom2.init(rng);
        for (auto& u : ups) u.init(rng);
        for (auto& r : rdbs) r.init(rng);
        for (auto& b : dec1) b.init(rng);
        for (auto& b : dec2) b.init(rng);
        head.init(rng);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        for (int k = 0; k < cfg.depth; ++k) {
            enc1[k].collect(out);
            enc2[k].collect(out);
        }
        bottom1.collect(out);
        bottom2.collect(out);
        for (int k = 0; k < cfg.depth; ++k) {
            out.push_back(&ups[k].weight);
            out.push_back(&ups[k].bias);
            if (cfg.use_rdb) rdbs[k].collect(out);
            dec1[k].collect(out);
            dec2[k].collect(out);
        }
        out.push_back(&head.weight);
        out.push_back(&head.bias);
        return out;
    }

    // running stats, keyed like params, for checkpoints
    std::vector<std::pair<std::string, std::vector<T>*>> running_stats() {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        auto add = [&](BatchNorm2d<T>& bn, const std::string& name) {
            out.emplace_back(name + ".running_mean", &bn.running_mean);
            out.emplace_back(name + ".running_var", &bn.running_var);
        };
        for (int k = 0; k < cfg.depth; ++k) {
            add(enc1[k].bn, "enc" + std::to_string(k) + ".a.bn");
            add(enc2[k].bn, "enc" + std::to_string(k) + ".b.bn");
        }
        add(bottom1.bn, "bottom.a.bn");
        add(bottom2.bn, "bottom.b.bn");
        for (int k = 0; k < cfg.depth; ++k) {
            if (cfg.use_rdb) add(rdbs[k].block1.bn, "dec" + std::to_string(k) + ".rdb.block1.bn");
            add(dec1[k].bn, "dec" + std::to_string(k) + ".a.bn");
            add(dec2[k].bn, "dec" + std::to_string(k) + ".b.bn");
        }
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
        if (x.c != 1) throw Error("ShapeMismatch", "expected a single input channel");
        if (x.h % (1 << cfg.depth) != 0 || x.w % (1 << cfg.depth) != 0)
            throw Error("ShapeMismatch", "h,w must be divisible by 2^depth");
        cache_input = x;

        std::vector<Tensor4<T>> skips(cfg.depth);
        Tensor4<T> cur = x;
        for (int k = 0; k < cfg.depth; ++k) {
            cur = enc2[k].forward(enc1[k].forward(cur, mode), mode);
            skips[k] = cur;
            cur = pools[k].forward(cur);
        }
        cur = bottom2.forward(bottom1.forward(cur, mode), mode);
        for (int k = cfg.depth - 1; k >= 0; --k) {
            Tensor4<T> up = ups[k].forward(cur);
            Tensor4<T> refined =
                cfg.use_rdb ? rdbs[k].forward(skips[k], mode) : skips[k];
            cur = dec2[k].forward(dec1[k].forward(concat_channels(up, refined), mode), mode);
        }
        Tensor4<T> res = head.forward(cur);
        for (size_t i = 0; i < res.size(); ++i) res.v[i] += x.v[i];
        forwarded = true;
        return res;
    }

    // Populates all parameter grads and returns the gradient w.r.t. the input,
    // including the unit passthrough from the global residual.
    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!forwarded) throw Error("BackwardBeforeForward");
        Tensor4<T> g = head.backward(gout);
        std::vector<Tensor4<T>> skip_grads(cfg.depth);
        for (int k = 0; k < cfg.depth; ++k) {
            Tensor4<T> gcat = dec1[k].backward(dec2[k].backward(g));
            const int c = cfg.base_channels << k;
            auto [gup, grefined] = split_channels(gcat, c, c);
            skip_grads[k] = cfg.use_rdb ? rdbs[k].backward(grefined) : grefined;
            g = ups[k].backward(gup);
        }
        g = bottom1.backward(bottom2.backward(g));
        for (int k = cfg.depth - 1; k >= 0; --k) {
            g = pools[k].backward(g);
            for (size_t i = 0; i < g.size(); ++i) g.v[i] += skip_grads[k].v[i];
            g = enc1[k].backward(enc2[k].backward(g));
        }
        for (size_t i = 0; i < g.size(); ++i) g.v[i] += gout.v[i];
        forwarded = false;
        return g;
    }
};

} // namespace ksr::nn
