#pragma once

#include <set>
#include <sstream>
#include <string>

#include "ksr/io.hpp"
#include "ksr/nn/rdunet.hpp"
#include "ksr/train.hpp"

namespace ksr {

// Everything a pipeline run needs: network, training protocol, mask spec,
// simulation geometry, and paths.
struct RunConfig {
    nn::NetConfig net;
    TrainConfig train;
    int accel = 4;
    int n_acs = 16;
    int coils = 8;
    int size = 64;        // phantom ny = nx
    int n_phantoms = 4;   // sources before 8x augmentation
    std::string data_dir; // phantom inputs for training
    std::string out_dir;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline double cfg_num(const ConfigDoc& doc, const std::string& key, double fallback) {
    auto it = doc.find(key);
    if (it == doc.end()) return fallback;
    std::istringstream ss(it->second);
    double v;
    if (!(ss >> v)) throw Error("IoError", "bad numeric value for " + key);
    return v;
}

inline std::string cfg_str(const ConfigDoc& doc, const std::string& key,
                           const std::string& fallback) {
    auto it = doc.find(key);
    return it == doc.end() ? fallback : it->second;
}

} // namespace detail

inline const std::set<std::string>& run_config_keys() {
    static const std::set<std::string> keys = {
        "net.depth", "net.base_channels", "net.activation", "net.polu_n", "net.use_rdb",
        "train.epochs", "train.batch_size", "train.lr0", "train.momentum",
        "train.lr_halve_every", "train.alpha", "train.seed", "train.precision",
        "train.max_iters", "train.checkpoint_every",
        "mask.accel", "mask.acs",
        "data.coils", "data.size", "data.n_phantoms", "data.dir",
        "out.dir",
    };
    return keys;
}

inline RunConfig run_config_from_doc(const ConfigDoc& doc) {
    for (const auto& [key, val] : doc)
        if (!run_config_keys().count(key)) throw Error("IoError", "unknown config key: " + key);

    RunConfig c;
    c.net.depth = static_cast<int>(detail::cfg_num(doc, "net.depth", c.net.depth));
    c.net.base_channels =
        static_cast<int>(detail::cfg_num(doc, "net.base_channels", c.net.base_channels));
    const std::string act = detail::cfg_str(doc, "net.activation", "polu");
    if (act == "polu") c.net.activation = nn::ActKind::PoLU;
    else if (act == "relu") c.net.activation = nn::ActKind::ReLU;
    else throw Error("IoError", "net.activation must be polu or relu");
    c.net.polu_n = detail::cfg_num(doc, "net.polu_n", c.net.polu_n);
    c.net.use_rdb = detail::cfg_num(doc, "net.use_rdb", 1) != 0;

    c.train.epochs = static_cast<int>(detail::cfg_num(doc, "train.epochs", c.train.epochs));
    c.train.batch_size =
        static_cast<int>(detail::cfg_num(doc, "train.batch_size", c.train.batch_size));
    c.train.lr0 = detail::cfg_num(doc, "train.lr0", c.train.lr0);
    c.train.momentum = detail::cfg_num(doc, "train.momentum", c.train.momentum);
    c.train.lr_halve_every =
        static_cast<int>(detail::cfg_num(doc, "train.lr_halve_every", c.train.lr_halve_every));
    c.train.alpha = detail::cfg_num(doc, "train.alpha", c.train.alpha);
    c.train.seed = static_cast<std::uint64_t>(detail::cfg_num(doc, "train.seed", 0));
    c.train.precision = static_cast<int>(detail::cfg_num(doc, "train.precision", 32));
    if (c.train.precision != 32 && c.train.precision != 64)
        throw Error("IoError", "train.precision must be 32 or 64");
    c.train.max_iters = static_cast<int>(detail::cfg_num(doc, "train.max_iters", 0));
    c.train.checkpoint_every =
        static_cast<int>(detail::cfg_num(doc, "train.checkpoint_every", 20));

    c.accel = static_cast<int>(detail::cfg_num(doc, "mask.accel", c.accel));
    c.n_acs = static_cast<int>(detail::cfg_num(doc, "mask.acs", c.n_acs));
    c.coils = static_cast<int>(detail::cfg_num(doc, "data.coils", c.coils));
    c.size = static_cast<int>(detail::cfg_num(doc, "data.size", c.size));
    c.n_phantoms = static_cast<int>(detail::cfg_num(doc, "data.n_phantoms", c.n_phantoms));
    c.data_dir = detail::cfg_str(doc, "data.dir", "");
    c.out_dir = detail::cfg_str(doc, "out.dir", "");
    return c;
}

inline std::string run_config_to_text(const RunConfig& c) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "[net]\n"
       << "depth = " << c.net.depth << "\n"
       << "base_channels = " << c.net.base_channels << "\n"
       << "activation = " << (c.net.activation == nn::ActKind::PoLU ? "polu" : "relu") << "\n"
       << "polu_n = " << c.net.polu_n << "\n"
       << "use_rdb = " << (c.net.use_rdb ? 1 : 0) << "\n"
       << "\n[train]\n"
       << "epochs = " << c.train.epochs << "\n"
       << "batch_size = " << c.train.batch_size << "\n"
       << "lr0 = " << c.train.lr0 << "\n"
       << "momentum = " << c.train.momentum << "\n"
       << "lr_halve_every = " << c.train.lr_halve_every << "\n"
       << "alpha = " << c.train.alpha << "\n"
       << "seed = " << c.train.seed << "\n"
       << "precision = " << c.train.precision << "\n"
       << "max_iters = " << c.train.max_iters << "\n"
       << "checkpoint_every = " << c.train.checkpoint_every << "\n"
       << "\n[mask]\n"
       << "accel = " << c.accel << "\n"
       << "acs = " << c.n_acs << "\n"
       << "\n[data]\n"
       << "coils = " << c.coils << "\n"
       << "size = " << c.size << "\n"
       << "n_phantoms = " << c.n_phantoms << "\n";
    if (!c.data_dir.empty()) ss << "dir = " << c.data_dir << "\n";
    ss << "\n[out]\n";
    if (!c.out_dir.empty()) ss << "dir = " << c.out_dir << "\n";
    return ss.str();
}

inline void save_run_config(const std::string& path, const RunConfig& c) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("IoError", "cannot open for writing: " + path);
    f << run_config_to_text(c);
}

inline RunConfig load_run_config(const std::string& path) {
    return run_config_from_doc(load_config(path));
}

} // namespace ksr
