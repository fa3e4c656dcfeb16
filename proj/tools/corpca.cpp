// Command-line front end: separate, synth, roc, flow.

#include <corpca/corpca.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace corpca;

namespace {

RunConfig load_run_config(const std::optional<fs::path>& path) {
    if (!path) {
        return {};
    }
    return parse_run_config(read_key_values(*path));
}

// Sorted regular files in `dir` whose names start with `prefix`.
std::vector<fs::path> list_files(const fs::path& dir, const std::string& prefix) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename().string().rfind(prefix, 0) == 0) {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Vector flatten(const Image& img) { return Eigen::Map<const Vector>(img.data(), img.size()); }

int run_separate(const std::optional<fs::path>& config, const std::optional<fs::path>& manifest,
                 std::vector<double> rates, const std::string& mode, const fs::path& out, int threads) {
    const RunConfig rc = load_run_config(config);
    const Sequence seq = manifest ? load_sequence(*manifest) : generate_synthetic(rc.synthetic).sequence;
    ExperimentSettings settings;
    if (!rates.empty()) {
        settings.rates = std::move(rates);
    }
    settings.mode = parse_mode(mode);
    settings.operator_seed = rc.operator_seed;
    settings.support_threshold = rc.support_threshold;
    settings.output_dir = out;
    settings.threads = threads;
    const ExperimentReport report = run_experiment(seq, rc.separator, settings);
    std::printf("mode=%s frames=%zu n=%lld\n", std::string(mode_name(report.mode)).c_str(), seq.frames.size(),
                static_cast<long long>(seq.n()));
    for (const RateReport& r : report.rates) {
        double iters = 0.0;
        for (int k : r.iterations) {
            iters += k;
        }
        iters /= std::max<std::size_t>(r.iterations.size(), 1);
        if (r.f1.empty()) {
            std::printf("rate=%.2f m=%lld mean_iterations=%.1f\n", r.rate, static_cast<long long>(r.m), iters);
        } else {
            std::printf("rate=%.2f m=%lld mean_iterations=%.1f mean_f1=%.4f auc=%.4f\n", r.rate,
                        static_cast<long long>(r.m), iters, r.mean_f1, r.auc);
        }
    }
    return 0;
}

int run_synth(const std::optional<fs::path>& config, const fs::path& out) {
    const RunConfig rc = load_run_config(config);
    const SyntheticSequence s = generate_synthetic(rc.synthetic);
    write_sequence(out, s.sequence);
    std::printf("wrote %zu training and %zu frames to %s\n", s.sequence.training.size(), s.sequence.frames.size(),
                out.string().c_str());
    return 0;
}

int run_roc(const fs::path& fg_dir, const fs::path& mask_dir, const fs::path& out, int begin) {
    const std::vector<fs::path> fg_files = list_files(fg_dir, "fg_");
    const std::vector<fs::path> mask_files = list_files(mask_dir, "mask_");
    if (fg_files.size() != mask_files.size()) {
        throw InvalidInput("roc: " + std::to_string(fg_files.size()) + " foreground files but " +
                           std::to_string(mask_files.size()) + " masks");
    }
    if (begin < 0 || static_cast<std::size_t>(begin) >= fg_files.size()) {
        throw InvalidInput("roc: --begin outside the frame range");
    }
    std::vector<Vector> fg;
    std::vector<Vector> masks;
    for (std::size_t i = static_cast<std::size_t>(begin); i < fg_files.size(); ++i) {
        fg.push_back(flatten(io::read_frame(fg_files[i])));
        masks.push_back(flatten(io::read_frame(mask_files[i])).unaryExpr([](double v) { return v != 0.0 ? 1.0 : 0.0; }));
    }
    const RocCurve curve = evaluate_roc(fg, masks, default_thresholds(fg));
    write_roc_csv(out, curve);
    std::printf("frames=%zu auc=%.4f\n", fg.size(), curve.area());
    return 0;
}

int run_flow(const fs::path& reference, const fs::path& target, const fs::path& out,
             const std::optional<fs::path>& color, const FlowConfig& cfg) {
    const Frame2D ref{io::read_frame(reference)};
    const Frame2D tgt{io::read_frame(target)};
    const FlowField f = estimate_flow(ref, tgt, cfg);
    io::write_flow(out, f);
    if (color) {
        io::write_ppm(*color, flow_to_color(f));
    }
    const double mean = (f.vx.array().square() + f.vy.array().square()).sqrt().mean();
    std::printf("size=%lldx%lld mean_magnitude=%.4f\n", static_cast<long long>(f.height()),
                static_cast<long long>(f.width()), mean);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressive online foreground/background separation"};
    app.require_subcommand(1);

    std::optional<fs::path> config;
    std::optional<fs::path> manifest;
    std::vector<double> rates;
    std::string mode = "corpca-of";
    fs::path out;
    int threads = 0;
    auto* sep = app.add_subcommand("separate", "Separate a sequence at one or more measurement rates");
    sep->add_option("--config", config, "key=value run configuration")->check(CLI::ExistingFile);
    sep->add_option("--manifest", manifest, "sequence manifest; synthetic data from the config when absent")
        ->check(CLI::ExistingFile);
    sep->add_option("--rate", rates, "measurement rate m/n, repeatable")->check(CLI::Range(0.0, 1.0));
    sep->add_option("--mode", mode, "corpca or corpca-of")->check(CLI::IsMember({"corpca", "corpca-of"}));
    sep->add_option("--out", out, "output directory")->required();
    sep->add_option("--threads", threads, "worker threads over rates; 0 picks automatically")
        ->check(CLI::NonNegativeNumber);

    fs::path synth_out;
    std::optional<fs::path> synth_config;
    auto* syn = app.add_subcommand("synth", "Write a synthetic sequence with ground-truth masks");
    syn->add_option("--config", synth_config, "key=value run configuration")->check(CLI::ExistingFile);
    syn->add_option("--out", synth_out, "output directory")->required();

    fs::path fg_dir;
    fs::path mask_dir;
    fs::path roc_out;
    int begin = 0;
    auto* roc = app.add_subcommand("roc", "ROC curve of recovered foregrounds against masks");
    roc->add_option("--fg", fg_dir, "directory of fg_*.f32 frames")->required()->check(CLI::ExistingDirectory);
    roc->add_option("--masks", mask_dir, "directory of mask_* frames")->required()->check(CLI::ExistingDirectory);
    roc->add_option("--out", roc_out, "CSV output")->required();
    roc->add_option("--begin", begin, "first frame index to include");

    fs::path reference;
    fs::path target;
    fs::path flow_out;
    std::optional<fs::path> color;
    FlowConfig flow_cfg;
    auto* flow = app.add_subcommand("flow", "Dense optical flow between two frames");
    flow->add_option("--reference", reference, "reference frame (.pgm or .f32)")->required()->check(CLI::ExistingFile);
    flow->add_option("--target", target, "target frame")->required()->check(CLI::ExistingFile);
    flow->add_option("--out", flow_out, "flow field output")->required();
    flow->add_option("--color", color, "color-coded PPM output");
    flow->add_option("--levels", flow_cfg.levels, "pyramid levels")->capture_default_str();
    flow->add_option("--alpha", flow_cfg.alpha, "smoothness weight")->capture_default_str();
    flow->add_option("--warp-iters", flow_cfg.warp_iters, "warps per level")->capture_default_str();
    flow->add_option("--jacobi-iters", flow_cfg.jacobi_iters, "Jacobi sweeps per warp")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sep) {
            return run_separate(config, manifest, rates, mode, out, threads);
        }
        if (*syn) {
            return run_synth(synth_config, synth_out);
        }
        if (*roc) {
            return run_roc(fg_dir, mask_dir, roc_out, begin);
        }
        flow_cfg.validate();
        return run_flow(reference, target, flow_out, color, flow_cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
