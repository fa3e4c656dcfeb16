#pragma once

// Rate sweeps over a frame sequence: per rate, build the operator, measure
// every frame, run the online separator, and write recovered frames, ROC and
// a manifest describing the run.

#include <corpca/config.hpp>
#include <corpca/engine.hpp>
#include <corpca/error.hpp>
#include <corpca/io.hpp>
#include <corpca/measurement.hpp>
#include <corpca/roc.hpp>
#include <corpca/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace corpca {

enum class Mode { corpca, corpca_of };

inline std::string_view mode_name(Mode m) { return m == Mode::corpca ? "corpca" : "corpca-of"; }

inline Mode parse_mode(std::string_view s) {
    if (s == "corpca") {
        return Mode::corpca;
    }
    if (s == "corpca-of") {
        return Mode::corpca_of;
    }
    throw InvalidConfig("unknown mode '" + std::string(s) + "' (expected corpca or corpca-of)");
}

/// Reads a sequence manifest: height=, width=, eval_begin= and repeated
/// train=, frame=, mask= entries (paths relative to the manifest).
inline Sequence load_sequence(const std::filesystem::path& manifest) {
    const std::filesystem::path base = manifest.parent_path();
    Sequence seq;
    std::vector<std::filesystem::path> train, frames, masks;
    for (const auto& [key, value] : read_key_values(manifest)) {
        if (key == "height") {
            seq.height = detail::parse_number<int>(key, value);
        } else if (key == "width") {
            seq.width = detail::parse_number<int>(key, value);
        } else if (key == "eval_begin") {
            seq.eval_begin = detail::parse_number<int>(key, value);
        } else if (key == "train") {
            train.push_back(base / value);
        } else if (key == "frame") {
            frames.push_back(base / value);
        } else if (key == "mask") {
            masks.push_back(base / value);
        } else {
            throw InvalidConfig(manifest.string() + ": unknown key '" + key + "'");
        }
    }
    if (seq.height <= 0 || seq.width <= 0 || train.empty() || frames.empty()) {
        throw InvalidConfig(manifest.string() + ": needs height, width, train= and frame= entries");
    }
    if (!masks.empty() && masks.size() != frames.size()) {
        throw InvalidConfig(manifest.string() + ": mask count differs from frame count");
    }
    if (seq.eval_begin < 0 || seq.eval_begin >= static_cast<int>(frames.size())) {
        throw InvalidConfig(manifest.string() + ": eval_begin outside the frame range");
    }
    auto load = [&](const std::filesystem::path& p) {
        const Image img = io::read_frame(p);
        if (img.rows() != seq.height || img.cols() != seq.width) {
            throw IngestError(p, 0,
                              "frame is " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                                  ", manifest says " + std::to_string(seq.height) + "x" + std::to_string(seq.width));
        }
        return Vector(Eigen::Map<const Vector>(img.data(), img.size()));
    };
    for (const auto& p : train) {
        seq.training.push_back(load(p));
    }
    for (const auto& p : frames) {
        seq.frames.push_back(load(p));
    }
    for (const auto& p : masks) {
        seq.masks.push_back((load(p).array() != 0.0).cast<double>().matrix());
    }
    return seq;
}

/// Writes frames as f32, masks as PGM and a manifest readable by load_sequence.
inline void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
    std::filesystem::create_directories(dir);
    std::ostringstream manifest;
    manifest << "height=" << seq.height << "\nwidth=" << seq.width << "\neval_begin=" << seq.eval_begin << "\n";
    char name[32];
    auto frame = [&](const Vector& v) { return Frame2D::from_vector(v, seq.height, seq.width).pixels; };
    for (std::size_t i = 0; i < seq.training.size(); ++i) {
        std::snprintf(name, sizeof name, "train_%04zu.f32", i);
        io::write_f32_frame(dir / name, frame(seq.training[i]));
        manifest << "train=" << name << "\n";
    }
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof name, "frame_%04zu.f32", i);
        io::write_f32_frame(dir / name, frame(seq.frames[i]));
        manifest << "frame=" << name << "\n";
    }
    for (std::size_t i = 0; i < seq.masks.size(); ++i) {
        std::snprintf(name, sizeof name, "mask_%04zu.pgm", i);
        io::write_pgm(dir / name, frame(seq.masks[i]));
        manifest << "mask=" << name << "\n";
    }
    std::ofstream out(dir / "sequence.txt", std::ios::trunc);
    out << manifest.str();
    if (!out) {
        throw Error("cannot write " + (dir / "sequence.txt").string());
    }
}

struct ExperimentSettings {
    std::vector<double> rates{0.6};
    Mode mode = Mode::corpca;
    std::uint64_t operator_seed = 1; ///< with rate 1 and seed 0 the operator is the identity
    double support_threshold = 0.1;
    std::filesystem::path output_dir; ///< empty: nothing written
    int threads = 0;                  ///< 0: CORPCA_THREADS, then hardware concurrency
};

struct RateReport {
    double rate = 0.0;
    Eigen::Index m = 0;
    double operator_scale = 1.0;
    std::vector<Vector> foreground; ///< every frame
    std::vector<Vector> background;
    std::vector<int> iterations;
    std::vector<double> f1; ///< evaluation frames only; empty without masks
    double mean_f1 = 0.0;
    RocCurve roc;
    double auc = 0.0;
};

struct ExperimentReport {
    Mode mode = Mode::corpca;
    std::vector<RateReport> rates;
};

namespace detail {

inline int worker_count(int requested, std::size_t jobs) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("CORPCA_THREADS")) {
            n = std::atoi(env);
        }
    }
    if (n <= 0) {
        n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    return std::max(1, std::min(n, static_cast<int>(jobs)));
}

inline std::string rate_dir_name(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rate_%.2f", rate);
    return buf;
}

inline void write_rate_manifest(const std::filesystem::path& dir, const std::string& status, const RateReport& r,
                                Eigen::Index n, std::size_t frames, const SeparatorConfig& cfg,
                                const ExperimentSettings& settings) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    char scale[48];
    std::snprintf(scale, sizeof scale, "%a", r.operator_scale);
    out << "status=" << status << "\n"
        << "mode=" << mode_name(settings.mode) << "\n"
        << "rate=" << format_double(r.rate) << "\n"
        << "m=" << r.m << "\n"
        << "n=" << n << "\n"
        << "operator_seed=" << settings.operator_seed << "\n"
        << "operator_generator=" << MeasurementOperator::generator_name() << "\n"
        << "operator_scale=" << scale << "\n"
        << "support_threshold=" << format_double(settings.support_threshold) << "\n"
        << "frames=" << frames << "\n"
        << separator_key_values(cfg);
}

inline RateReport run_rate(const Sequence& seq, SeparatorConfig cfg, const ExperimentSettings& settings, double rate) {
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw InvalidConfig("run_experiment: rates must lie in (0, 1]");
    }
    const Eigen::Index n = seq.n();
    cfg.d = static_cast<int>(seq.training.size());
    cfg.height = seq.height;
    cfg.width = seq.width;

    RateReport r;
    r.rate = rate;
    r.m = std::clamp<Eigen::Index>(std::lround(rate * static_cast<double>(n)), 1, n);
    const std::filesystem::path dir =
        settings.output_dir.empty() ? std::filesystem::path()
                                    : settings.output_dir / std::string(mode_name(settings.mode)) / rate_dir_name(rate);
    try {
        const MeasurementOperator op = make_operator(r.m, n, settings.operator_seed).normalized_for_unit_step();
        r.operator_scale = op.scale();
        EngineState state = init_from_training(seq.training, cfg);
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
            if (seq.frames[f].size() != n) {
                throw InvalidInput("run_experiment: frame length differs from height*width");
            }
            const Vector y = op.apply(seq.frames[f]);
            Separation s = settings.mode == Mode::corpca ? separate(state, y, op, cfg)
                                                         : separate_with_flow_priors(state, y, op, cfg);
            r.iterations.push_back(static_cast<int>(s.trace.records.size()));
            r.foreground.push_back(std::move(s.foreground));
            r.background.push_back(std::move(s.background));
        }

        if (!seq.masks.empty()) {
            const auto begin = static_cast<std::size_t>(seq.eval_begin);
            std::vector<Vector> fg(r.foreground.begin() + static_cast<std::ptrdiff_t>(begin), r.foreground.end());
            std::vector<Vector> masks(seq.masks.begin() + static_cast<std::ptrdiff_t>(begin), seq.masks.end());
            for (std::size_t i = 0; i < fg.size(); ++i) {
                r.f1.push_back(support_f1(fg[i], masks[i], settings.support_threshold));
            }
            double total = 0.0;
            for (double v : r.f1) {
                total += v;
            }
            r.mean_f1 = r.f1.empty() ? 0.0 : total / static_cast<double>(r.f1.size());
            r.roc = evaluate_roc(fg, masks, default_thresholds(fg));
            r.auc = r.roc.area();
        }

        if (!dir.empty()) {
            char name[32];
            for (std::size_t f = 0; f < r.foreground.size(); ++f) {
                std::snprintf(name, sizeof name, "fg_%04zu.f32", f);
                io::write_f32_frame(dir / name, Eigen::Map<const Image>(r.foreground[f].data(), seq.height, seq.width));
                std::snprintf(name, sizeof name, "bg_%04zu.f32", f);
                io::write_f32_frame(dir / name, Eigen::Map<const Image>(r.background[f].data(), seq.height, seq.width));
            }
            std::ofstream frames(dir / "frames.csv", std::ios::trunc);
            frames << "frame,iterations,f1\n";
            for (std::size_t f = 0; f < r.foreground.size(); ++f) {
                frames << f << "," << r.iterations[f] << ",";
                if (!r.f1.empty() && f >= static_cast<std::size_t>(seq.eval_begin)) {
                    char v[32];
                    std::snprintf(v, sizeof v, "%.9g", r.f1[f - static_cast<std::size_t>(seq.eval_begin)]);
                    frames << v;
                }
                frames << "\n";
            }
            if (!r.roc.points.empty()) {
                write_roc_csv(dir / "roc.csv", r.roc);
            }
            write_rate_manifest(dir, "OK", r, n, seq.frames.size(), cfg, settings);
        }
    } catch (const std::exception& e) {
        if (!dir.empty()) {
            write_rate_manifest(dir, "FAILED", r, n, r.foreground.size(), cfg, settings);
            std::ofstream(dir / "manifest.txt", std::ios::app) << "error=" << e.what() << "\n";
        }
        throw;
    }
    return r;
}

} // namespace detail

/// Independent online runs, one per rate. Results depend only on the inputs,
/// `cfg` and the seeds; rates may run concurrently.
inline ExperimentReport run_experiment(const Sequence& seq, const SeparatorConfig& cfg,
                                       const ExperimentSettings& settings) {
    if (settings.rates.empty()) {
        throw InvalidConfig("run_experiment: no rates given");
    }
    if (seq.training.empty() || seq.frames.empty()) {
        throw InvalidInput("run_experiment: empty sequence");
    }
    ExperimentReport report;
    report.mode = settings.mode;
    report.rates.resize(settings.rates.size());
    std::vector<std::exception_ptr> errors(settings.rates.size());

    const int workers = detail::worker_count(settings.threads, settings.rates.size());
    auto job = [&](std::size_t i) {
        try {
            report.rates[i] = detail::run_rate(seq, cfg, settings, settings.rates[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < settings.rates.size(); ++i) {
            job(i);
        }
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < settings.rates.size();
                     i += static_cast<std::size_t>(workers)) {
                    job(i);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return report;
}

} // namespace corpca
