// Command-line front end for the reconstruction pipeline: phantom generation,
// retrospective undersampling, zero-fill/GRAPPA/network reconstruction,
// training, evaluation, and PNG export.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ksr/checkpoint.hpp"
#include "ksr/config.hpp"
#include "ksr/grappa.hpp"
#include "ksr/metrics.hpp"
#include "ksr/pipeline.hpp"
#include "ksr/png.hpp"

namespace fs = std::filesystem;

namespace {

std::string slice_name(const std::string& prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d.ksr", prefix.c_str(), i);
    return buf;
}

std::vector<std::string> list_ksr_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ksr")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ksr::Error("IoError", "cannot create directory: " + dir);
}

int cmd_phantom(int size, int count, std::uint64_t seed, const std::string& out) {
    ensure_dir(out);
    for (int i = 0; i < count; ++i) {
        const ksr::RealImage img = ksr::random_phantom(size, size, seed * 977 + i);
        ksr::TensorFile tf;
        tf.entries.push_back(ksr::entry_from_image("image", img));
        ksr::save_container((fs::path(out) / slice_name("phantom", i)).string(), tf);
    }
    return 0;
}

void write_slice(const std::string& path, const ksr::CoilKSpace& full,
                 const ksr::SamplingMask& mask) {
    const ksr::CoilKSpace masked = ksr::apply_mask(full, mask);
    ksr::TensorFile tf;
    tf.entries.push_back(ksr::entry_from_kspace("kspace", masked));
    tf.entries.push_back(ksr::entry_from_mask(mask));
    tf.entries.push_back(ksr::entry_scalar("mask/accel", mask.accel));
    tf.entries.push_back(ksr::entry_scalar("mask/acs", mask.n_acs));
    tf.entries.push_back(ksr::entry_from_image("zf", ksr::zero_filled_recon(masked)));
    tf.entries.push_back(ksr::entry_from_image("truth", ksr::zero_filled_recon(full)));
    ksr::save_container(path, tf);
}

int cmd_undersample(const std::string& in, int R, int n_acs, int coils,
                    const std::string& out) {
    ensure_dir(out);
    std::vector<std::string> inputs;
    if (fs::is_directory(in)) inputs = list_ksr_files(in);
    else if (fs::is_regular_file(in)) inputs = {in};
    else throw ksr::Error("IoError", "input not found: " + in);

    int slice_idx = 0;
    for (const auto& path : inputs) {
        const ksr::TensorFile tf = ksr::load_container(path);
        if (const auto* ke = tf.find("kspace")) {
            // externally supplied complex k-space, (slices, coils, ny, nx) or (coils, ny, nx)
            if (ke->dims.size() == 4) {
                const int ns = static_cast<int>(ke->dims[0]);
                const int nc = static_cast<int>(ke->dims[1]);
                const int ny = static_cast<int>(ke->dims[2]);
                const int nx = static_cast<int>(ke->dims[3]);
                const ksr::SamplingMask mask = ksr::build_mask(ny, R, n_acs);
                const size_t per = static_cast<size_t>(nc) * ny * nx;
                for (int s = 0; s < ns; ++s) {
                    ksr::CoilKSpace vol(nc, ny, nx);
                    if (ke->dtype == ksr::DType::Complex128) {
                        const auto* p =
                            reinterpret_cast<const std::complex<double>*>(ke->raw.data());
                        std::copy(p + s * per, p + (s + 1) * per, vol.v.begin());
                    } else if (ke->dtype == ksr::DType::Complex64) {
                        const auto* p =
                            reinterpret_cast<const std::complex<float>*>(ke->raw.data());
                        for (size_t i = 0; i < per; ++i) vol.v[i] = p[s * per + i];
                    } else {
                        throw ksr::Error("IoError", "kspace entry must be complex");
                    }
                    write_slice((fs::path(out) / slice_name("slice", slice_idx++)).string(),
                                vol, mask);
                }
            } else {
                const ksr::CoilKSpace vol = ksr::kspace_from_entry(*ke);
                write_slice((fs::path(out) / slice_name("slice", slice_idx++)).string(), vol,
                            ksr::build_mask(vol.ny, R, n_acs));
            }
        } else {
            const ksr::RealImage img = ksr::image_from_entry(tf.require("image"));
            const ksr::SensitivityMaps sens = ksr::make_sensitivities(coils, img.ny, img.nx);
            write_slice((fs::path(out) / slice_name("slice", slice_idx++)).string(),
                        ksr::forward_acquire(img, sens), ksr::build_mask(img.ny, R, n_acs));
        }
    }
    return 0;
}

ksr::RealImage run_recon(const std::string& method, const ksr::TensorFile& tf,
                         const std::string& checkpoint) {
    const ksr::CoilKSpace ksp = ksr::kspace_from_entry(tf.require("kspace"));
    const ksr::SamplingMask mask = ksr::mask_from_file(tf);
    if (method == "zf") return ksr::zero_filled_recon(ksp);
    if (method == "grappa") return ksr::method_grappa()(ksp, mask);
    if (method == "net") {
        if (checkpoint.empty() || !fs::exists(checkpoint))
            throw ksr::Error("MissingModel", "method net needs --checkpoint");
        const ksr::TensorFile ck = ksr::load_container(checkpoint);
        const int precision =
            static_cast<int>(ksr::scalar_from_entry(ck.require("meta/precision")));
        if (precision == 64)
            return ksr::method_net(ksr::net_from_checkpoint<double>(ck))(ksp, mask);
        return ksr::method_net(ksr::net_from_checkpoint<float>(ck))(ksp, mask);
    }
    throw ksr::Error("IoError", "unknown method: " + method);
}

int cmd_recon(const std::string& method, const std::string& in,
              const std::string& checkpoint, const std::string& out) {
    const ksr::TensorFile tf = ksr::load_container(in);
    const ksr::RealImage recon = run_recon(method, tf, checkpoint);
    ksr::TensorFile res;
    res.entries.push_back(ksr::entry_from_image("recon", recon));
    if (const auto* te = tf.find("truth")) {
        const ksr::RealImage truth = ksr::image_from_entry(*te);
        const double err = ksr::mse(ksr::normalize(truth), ksr::normalize(recon));
        res.entries.push_back(ksr::entry_scalar("mse", err));
        std::printf("mse = %.10g\n", err);
    }
    ksr::save_container(out, res);
    return 0;
}

std::vector<ksr::RealImage> load_or_make_phantoms(const ksr::RunConfig& cfg) {
    if (cfg.data_dir.empty()) return ksr::default_phantoms(cfg);
    std::vector<ksr::RealImage> out;
    for (const auto& path : list_ksr_files(cfg.data_dir))
        out.push_back(ksr::image_from_entry(ksr::load_container(path).require("image")));
    if (out.empty()) throw ksr::Error("IoError", "no phantom files in " + cfg.data_dir);
    return out;
}

template <typename T>
void run_training(const ksr::RunConfig& cfg, const std::string& out_dir) {
    auto dataset = ksr::build_training_set(cfg, load_or_make_phantoms(cfg));
    ksr::nn::RDUNet<T> net(cfg.net, cfg.train.seed);
    if (cfg.train.epochs == 0) {
        ksr::save_checkpoint((fs::path(out_dir) / "checkpoint_initial.ksr").string(), net);
        return;
    }
    ksr::save_checkpoint((fs::path(out_dir) / "checkpoint_initial.ksr").string(), net);
    auto cb = [&](int epoch, ksr::nn::RDUNet<T>& n) {
        const std::string name = epoch < 0
                                     ? "checkpoint_final.ksr"
                                     : "checkpoint_ep" + std::to_string(epoch) + ".ksr";
        ksr::save_checkpoint((fs::path(out_dir) / name).string(), n);
    };
    const ksr::TrainResult result = ksr::train_loop<T>(dataset, net, cfg.train, cb);

    std::ofstream hist((fs::path(out_dir) / "loss_history.txt").string(), std::ios::trunc);
    if (!hist) throw ksr::Error("IoError", "cannot write loss history");
    char line[160];
    for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
        const auto& r = result.epoch_loss[e];
        std::snprintf(line, sizeof(line), "epoch %zu total %.17g l2 %.17g fourier %.17g\n", e,
                      r.total, r.l2_term, r.fourier_term);
        hist << line;
    }
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
    ksr::RunConfig cfg = ksr::load_run_config(config_path);
    const std::string out_dir = out_override.empty() ? cfg.out_dir : out_override;
    if (out_dir.empty()) throw ksr::Error("IoError", "no output directory configured");
    ensure_dir(out_dir);
    if (cfg.train.precision == 64) run_training<double>(cfg, out_dir);
    else run_training<float>(cfg, out_dir);
    return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& checkpoints,
             int n_seeds, const std::string& out) {
    const ksr::RunConfig cfg = ksr::load_run_config(config_path);
    ksr::EvalSetup setup;
    setup.ny = setup.nx = cfg.size;
    setup.nc = cfg.coils;
    setup.R = cfg.accel;
    setup.n_acs = cfg.n_acs;

    std::vector<std::pair<std::string, ksr::ReconMethod>> methods;
    methods.emplace_back("zero-fill", ksr::method_zero_fill());
    methods.emplace_back("grappa", ksr::method_grappa());
    for (const auto& path : checkpoints) {
        if (!fs::exists(path)) throw ksr::Error("MissingModel", path);
        const ksr::TensorFile ck = ksr::load_container(path);
        const int precision =
            static_cast<int>(ksr::scalar_from_entry(ck.require("meta/precision")));
        ksr::ReconMethod m = precision == 64
                                 ? ksr::method_net(ksr::net_from_checkpoint<double>(ck))
                                 : ksr::method_net(ksr::net_from_checkpoint<float>(ck));
        methods.emplace_back(fs::path(path).stem().string(), std::move(m));
    }

    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < n_seeds; ++s) seeds.push_back(cfg.train.seed + s);
    const ksr::EvalReport rep = ksr::evaluate_methods(setup, methods, seeds);

    std::ofstream table(out, std::ios::trunc);
    std::ofstream kv(out + ".kv", std::ios::trunc);
    if (!table || !kv) throw ksr::Error("IoError", "cannot write report: " + out);
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %-14s %-14s %s\n", "method", "mse_mean",
                  "mse_std", "n_trials");
    table << line;
    for (const auto& [name, st] : rep) {
        std::snprintf(line, sizeof(line), "%-24s %-14.6g %-14.6g %d\n", name.c_str(),
                      st.mse_mean, st.mse_std, st.n_trials);
        table << line;
        std::snprintf(line, sizeof(line), "%s.mse_mean = %.17g\n%s.mse_std = %.17g\n%s.n_trials = %d\n",
                      name.c_str(), st.mse_mean, name.c_str(), st.mse_std, name.c_str(),
                      st.n_trials);
        kv << line;
    }
    return 0;
}

int cmd_export_png(const std::string& in, const std::string& entry, const std::string& diff,
                   const std::string& out) {
    const ksr::TensorFile tf = ksr::load_container(in);
    const ksr::RealImage img = ksr::image_from_entry(tf.require(entry));
    if (diff.empty()) {
        ksr::export_png(out, img);
    } else {
        const ksr::TensorFile dt = ksr::load_container(diff);
        const ksr::RealImage truth = ksr::image_from_entry(dt.require("truth"));
        ksr::export_png_diff(out, img, truth);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accelerated Cartesian MRI reconstruction laboratory"};
    app.require_subcommand(1);

    // phantom
    int size = 64, count = 1;
    std::uint64_t seed = 0;
    std::string out;
    auto* phantom = app.add_subcommand("phantom", "generate ground-truth phantom images");
    phantom->add_option("--size", size, "image size (ny = nx)");
    phantom->add_option("--count", count, "number of phantoms");
    phantom->add_option("--seed", seed, "base seed");
    phantom->add_option("--out", out, "output directory")->required();

    // undersample
    std::string us_in;
    int accel = 4, acs = 16, coils = 8;
    std::string us_out;
    auto* us = app.add_subcommand("undersample",
                                  "simulate coil k-space and retrospectively undersample");
    us->add_option("--in", us_in, "phantom file/dir or external k-space container")->required();
    us->add_option("--accel", accel, "acceleration factor R");
    us->add_option("--acs", acs, "number of ACS lines");
    us->add_option("--coils", coils, "number of simulated coils");
    us->add_option("--out", us_out, "output directory")->required();

    // recon
    std::string method, rc_in, rc_ckpt, rc_out;
    auto* rc = app.add_subcommand("recon", "reconstruct one undersampled slice");
    rc->add_option("--method", method, "zf | grappa | net")->required();
    rc->add_option("--in", rc_in, "undersampled slice container")->required();
    rc->add_option("--checkpoint", rc_ckpt, "trained checkpoint (method net)");
    rc->add_option("--out", rc_out, "output container")->required();

    // train
    std::string tr_config, tr_out;
    auto* tr = app.add_subcommand("train", "train the network per a run config");
    tr->add_option("--config", tr_config, "run config file")->required();
    tr->add_option("--out", tr_out, "override output directory");

    // eval
    std::string ev_config, ev_out;
    std::vector<std::string> ev_ckpts;
    int ev_seeds = 5;
    auto* ev = app.add_subcommand("eval", "compare reconstruction methods");
    ev->add_option("--config", ev_config, "run config file")->required();
    ev->add_option("--checkpoint", ev_ckpts, "trained checkpoint(s)");
    ev->add_option("--seeds", ev_seeds, "number of evaluation seeds");
    ev->add_option("--out", ev_out, "report path")->required();

    // export-png
    std::string px_in, px_entry = "image", px_diff, px_out;
    auto* px = app.add_subcommand("export-png", "export an image entry as 8-bit PNG");
    px->add_option("--in", px_in, "input container")->required();
    px->add_option("--entry", px_entry, "entry name (default: image)");
    px->add_option("--diff", px_diff,
                   "container with a 'truth' entry; write the difference image");
    px->add_option("--out", px_out, "output PNG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_code = app.exit(e);
        return rc_code == 0 ? 0 : 1;
    }

    try {
        if (phantom->parsed()) return cmd_phantom(size, count, seed, out);
        if (us->parsed()) return cmd_undersample(us_in, accel, acs, coils, us_out);
        if (rc->parsed()) return cmd_recon(method, rc_in, rc_ckpt, rc_out);
        if (tr->parsed()) return cmd_train(tr_config, tr_out);
        if (ev->parsed()) return cmd_eval(ev_config, ev_ckpts, ev_seeds, ev_out);
        if (px->parsed()) return cmd_export_png(px_in, px_entry, px_diff, px_out);
    } catch (const ksr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
