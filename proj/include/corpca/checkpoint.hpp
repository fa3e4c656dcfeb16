#pragma once

// Engine checkpoints: a directory holding checkpoint.txt (instance counter,
// operator identity, separator config) plus one binary matrix per factor and
// prior vector. Matrices use the u32 dims header with an f64 payload so a
// resumed run continues bit for bit.

#include <corpca/config.hpp>
#include <corpca/engine.hpp>
#include <corpca/error.hpp>
#include <corpca/io.hpp>
#include <corpca/measurement.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace corpca {

struct Checkpoint {
    EngineState state;
    SeparatorConfig config;
    MeasurementOperator op;
};

namespace detail {

inline std::string indexed_name(const char* stem, std::size_t i) {
    std::string digits = std::to_string(i);
    if (digits.size() < 2) {
        digits.insert(0, 2 - digits.size(), '0');
    }
    return std::string(stem) + "_" + digits + ".f64";
}

inline std::string hex_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline Vector as_vector(const Matrix& m, const std::filesystem::path& path) {
    if (m.cols() != 1) {
        throw IngestError(path, 4, "expected a single-column matrix");
    }
    return m.col(0);
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const EngineState& state, const SeparatorConfig& cfg,
                            const MeasurementOperator& op) {
    std::filesystem::create_directories(dir);
    std::ofstream meta(dir / "checkpoint.txt", std::ios::trunc);
    if (!meta) {
        throw Error("cannot write checkpoint in " + dir.string());
    }
    meta << "t=" << state.t << "\n"
         << "operator_m=" << op.m() << "\n"
         << "operator_n=" << op.n() << "\n"
         << "operator_seed=" << op.seed() << "\n"
         << "operator_generator=" << MeasurementOperator::generator_name() << "\n"
         << "operator_scale=" << detail::hex_double(op.scale()) << "\n"
         << "priors=" << state.sparse_priors.size() << "\n"
         << "history=" << state.history.size() << "\n";
    std::ofstream config(dir / "config.txt", std::ios::trunc);
    config << separator_key_values(cfg);
    if (!meta || !config) {
        throw Error("checkpoint write failed in " + dir.string());
    }

    io::write_f64_matrix(dir / "background_U.f64", state.background.U);
    io::write_f64_matrix(dir / "background_S.f64", state.background.S);
    io::write_f64_matrix(dir / "background_V.f64", state.background.V);
    for (std::size_t j = 0; j < state.sparse_priors.size(); ++j) {
        io::write_f64_matrix(dir / detail::indexed_name("prior", j), state.sparse_priors[j]);
    }
    for (std::size_t j = 0; j < state.history.size(); ++j) {
        io::write_f64_matrix(dir / detail::indexed_name("history", j), state.history[j]);
    }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const std::filesystem::path meta_path = dir / "checkpoint.txt";
    std::map<std::string, std::string> meta;
    for (auto& [key, value] : read_key_values(meta_path)) {
        meta[key] = value;
    }
    auto field = [&](const char* key) -> const std::string& {
        const auto it = meta.find(key);
        if (it == meta.end()) {
            throw IngestError(meta_path, 0, std::string("missing field '") + key + "'");
        }
        return it->second;
    };
    if (field("operator_generator") != MeasurementOperator::generator_name()) {
        throw IngestError(meta_path, 0, "operator generated by '" + field("operator_generator") + "'");
    }

    Checkpoint cp;
    cp.config = parse_run_config(read_key_values(dir / "config.txt")).separator;
    const auto m = detail::parse_number<long>("operator_m", field("operator_m"));
    const auto n = detail::parse_number<long>("operator_n", field("operator_n"));
    const auto seed = detail::parse_number<std::uint64_t>("operator_seed", field("operator_seed"));
    const double scale = std::strtod(field("operator_scale").c_str(), nullptr);
    cp.op = make_operator(m, n, seed);
    if (scale != cp.op.scale()) {
        cp.op = cp.op.with_scale(scale);
    }

    EngineState& st = cp.state;
    st.t = detail::parse_number<long>("t", field("t"));
    st.background.U = io::read_f64_matrix(dir / "background_U.f64");
    st.background.S = detail::as_vector(io::read_f64_matrix(dir / "background_S.f64"), dir / "background_S.f64");
    st.background.V = io::read_f64_matrix(dir / "background_V.f64");
    const auto priors = detail::parse_number<std::size_t>("priors", field("priors"));
    const auto history = detail::parse_number<std::size_t>("history", field("history"));
    for (std::size_t j = 0; j < priors; ++j) {
        const auto path = dir / detail::indexed_name("prior", j);
        st.sparse_priors.push_back(detail::as_vector(io::read_f64_matrix(path), path));
    }
    for (std::size_t j = 0; j < history; ++j) {
        const auto path = dir / detail::indexed_name("history", j);
        st.history.push_back(detail::as_vector(io::read_f64_matrix(path), path));
    }
    detail::check_state(st, cp.config, n);
    return cp;
}

} // namespace corpca
