#pragma once

#include <memory>
#include <string>

#include "ksr/io.hpp"
#include "ksr/nn/rdunet.hpp"

namespace ksr {

namespace detail {

template <typename T>
constexpr DType dtype_of() {
    return sizeof(T) == 4 ? DType::Real32 : DType::Real64;
}

} // namespace detail

// Checkpoint layout: "meta/*" scalars echo the NetConfig, "param/<name>" the
// learnable arrays, "state/<name>" the BN running statistics.
template <typename T>
TensorFile checkpoint_from_net(nn::RDUNet<T>& net) {
    TensorFile tf;
    tf.entries.push_back(entry_scalar("meta/depth", net.cfg.depth));
    tf.entries.push_back(entry_scalar("meta/base_channels", net.cfg.base_channels));
    tf.entries.push_back(
        entry_scalar("meta/activation", net.cfg.activation == nn::ActKind::PoLU ? 1 : 0));
    tf.entries.push_back(entry_scalar("meta/polu_n", net.cfg.polu_n));
    tf.entries.push_back(entry_scalar("meta/use_rdb", net.cfg.use_rdb ? 1 : 0));
    tf.entries.push_back(entry_scalar("meta/precision", sizeof(T) == 4 ? 32 : 64));
    for (auto* p : net.params())
        tf.entries.push_back(make_entry("param/" + p->name, detail::dtype_of<T>(),
                                        {p->value.size()}, p->value.data(), p->value.size()));
    for (auto& [name, vec] : net.running_stats())
        tf.entries.push_back(make_entry("state/" + name, detail::dtype_of<T>(),
                                        {vec->size()}, vec->data(), vec->size()));
    return tf;
}

template <typename T>
void save_checkpoint(const std::string& path, nn::RDUNet<T>& net) {
    save_container(path, checkpoint_from_net(net));
}

inline nn::NetConfig net_config_from_checkpoint(const TensorFile& tf) {
    nn::NetConfig cfg;
    cfg.depth = static_cast<int>(scalar_from_entry(tf.require("meta/depth")));
    cfg.base_channels = static_cast<int>(scalar_from_entry(tf.require("meta/base_channels")));
    cfg.activation = scalar_from_entry(tf.require("meta/activation")) != 0
                         ? nn::ActKind::PoLU
                         : nn::ActKind::ReLU;
    cfg.polu_n = scalar_from_entry(tf.require("meta/polu_n"));
    cfg.use_rdb = scalar_from_entry(tf.require("meta/use_rdb")) != 0;
    return cfg;
}

template <typename T>
std::shared_ptr<nn::RDUNet<T>> net_from_checkpoint(const TensorFile& tf) {
    auto net = std::make_shared<nn::RDUNet<T>>(net_config_from_checkpoint(tf));
    for (auto* p : net->params()) {
        const TensorEntry& e = tf.require("param/" + p->name);
        if (e.n_elems() != p->value.size())
            throw Error("IoError", "checkpoint shape mismatch: " + p->name);
        if (e.dtype == DType::Real64) {
            const double* src = reinterpret_cast<const double*>(e.raw.data());
            for (size_t i = 0; i < p->value.size(); ++i) p->value[i] = static_cast<T>(src[i]);
        } else if (e.dtype == DType::Real32) {
            const float* src = reinterpret_cast<const float*>(e.raw.data());
            for (size_t i = 0; i < p->value.size(); ++i) p->value[i] = static_cast<T>(src[i]);
        } else {
            throw Error("IoError", "bad checkpoint dtype: " + p->name);
        }
    }
    for (auto& [name, vec] : net->running_stats()) {
        const TensorEntry& e = tf.require("state/" + name);
        if (e.n_elems() != vec->size())
            throw Error("IoError", "checkpoint shape mismatch: " + name);
        if (e.dtype == DType::Real64) {
            const double* src = reinterpret_cast<const double*>(e.raw.data());
            for (size_t i = 0; i < vec->size(); ++i) (*vec)[i] = static_cast<T>(src[i]);
        } else {
            const float* src = reinterpret_cast<const float*>(e.raw.data());
            for (size_t i = 0; i < vec->size(); ++i) (*vec)[i] = static_cast<T>(src[i]);
        }
    }
    return net;
}

template <typename T>
std::shared_ptr<nn::RDUNet<T>> load_checkpoint(const std::string& path) {
    return net_from_checkpoint<T>(load_container(path));
}

} // namespace ksr
