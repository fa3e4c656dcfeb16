#pragma once

// Flat "key = value" configuration files. '#' starts a comment; blank lines
// are ignored; every key must be known to the consumer.

#include <corpca/engine.hpp>
#include <corpca/error.hpp>
#include <corpca/synthetic.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace corpca {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw InvalidConfig("config: cannot parse value '" + text + "' for key '" + key + "'");
    }
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true") {
        return true;
    }
    if (text == "0" || text == "false") {
        return false;
    }
    throw InvalidConfig("config: expected true/false for key '" + key + "'");
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline KeyValues parse_key_values(std::istream& in, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw InvalidConfig(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidConfig("cannot open config file " + path.string());
    }
    return parse_key_values(in, path.string());
}

/// Everything a separation run can be configured with from one file.
struct RunConfig {
    SeparatorConfig separator;
    SyntheticSpec synthetic;
    std::uint64_t operator_seed = 1;
    double support_threshold = 0.1;
};

namespace detail {

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& run_config_setters() {
    static const std::map<std::string, Setter> setters = [] {
        std::map<std::string, Setter> s;
        s["lambda"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.lambda = parse_number<double>(k, v); };
        s["mu_bar"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.mu_bar = parse_number<double>(k, v); };
        s["mu0"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.mu0 = parse_number<double>(k, v); };
        s["epsilon"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.epsilon = parse_number<double>(k, v); };
        s["continuation_decay"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.continuation_decay = parse_number<double>(k, v); };
        s["J"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.J = parse_number<int>(k, v); };
        s["d"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.separator.d = parse_number<int>(k, v);
            c.synthetic.training = c.separator.d;
        };
        s["max_iters"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.max_iters = parse_number<int>(k, v); };
        s["tol_scale"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.tol_scale = parse_number<double>(k, v); };
        s["height"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.separator.height = c.synthetic.height = parse_number<int>(k, v);
        };
        s["width"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.separator.width = c.synthetic.width = parse_number<int>(k, v);
        };
        s["adaptive_weights"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.adaptive_weights = parse_bool(k, v); };
        s["flow_levels"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.flow.levels = parse_number<int>(k, v); };
        s["flow_alpha"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.flow.alpha = parse_number<double>(k, v); };
        s["flow_warp_iters"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.flow.warp_iters = parse_number<int>(k, v); };
        s["flow_jacobi_iters"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.separator.flow.jacobi_iters = parse_number<int>(k, v); };
        s["rank"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.rank = parse_number<int>(k, v); };
        s["drift"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.drift = parse_number<double>(k, v); };
        s["block_height"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.block_height = parse_number<int>(k, v); };
        s["block_width"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.block_width = parse_number<int>(k, v); };
        s["velocity_x"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.velocity_x = parse_number<double>(k, v); };
        s["velocity_y"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.velocity_y = parse_number<double>(k, v); };
        s["intensity"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.intensity = parse_number<double>(k, v); };
        s["sparsity"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.sparsity = parse_number<double>(k, v); };
        s["noise"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.noise = parse_number<double>(k, v); };
        s["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.seed = parse_number<std::uint64_t>(k, v); };
        s["frames"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.frames = parse_number<int>(k, v); };
        s["eval_begin"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.synthetic.eval_begin = parse_number<int>(k, v); };
        s["operator_seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.operator_seed = parse_number<std::uint64_t>(k, v); };
        s["support_threshold"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.support_threshold = parse_number<double>(k, v); };
        return s;
    }();
    return setters;
}

} // namespace detail

/// Applies `kv` on top of the defaults; unknown or repeated keys are errors.
inline RunConfig parse_run_config(const KeyValues& kv, RunConfig base = {}) {
    const auto& setters = detail::run_config_setters();
    std::map<std::string, int> seen;
    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw InvalidConfig("config: unknown key '" + key + "'");
        }
        if (seen[key]++ > 0) {
            throw InvalidConfig("config: repeated key '" + key + "'");
        }
        it->second(base, key, value);
    }
    base.separator.validate();
    return base;
}

/// Separator fields as key=value lines (%.17g, so values round-trip exactly).
inline std::string separator_key_values(const SeparatorConfig& s) {
    using detail::format_double;
    std::ostringstream o;
    o << "lambda=" << format_double(s.lambda) << "\n"
      << "mu_bar=" << format_double(s.mu_bar) << "\n"
      << "mu0=" << format_double(s.mu0) << "\n"
      << "epsilon=" << format_double(s.epsilon) << "\n"
      << "continuation_decay=" << format_double(s.continuation_decay) << "\n"
      << "J=" << s.J << "\n"
      << "d=" << s.d << "\n"
      << "max_iters=" << s.max_iters << "\n"
      << "tol_scale=" << format_double(s.tol_scale) << "\n"
      << "height=" << s.height << "\n"
      << "width=" << s.width << "\n"
      << "adaptive_weights=" << (s.adaptive_weights ? "true" : "false") << "\n"
      << "flow_levels=" << s.flow.levels << "\n"
      << "flow_alpha=" << format_double(s.flow.alpha) << "\n"
      << "flow_warp_iters=" << s.flow.warp_iters << "\n"
      << "flow_jacobi_iters=" << s.flow.jacobi_iters << "\n";
    return o.str();
}

/// Full rendering; round-trips through parse_run_config. Geometry and the
/// training count come from the separator side.
inline std::string to_key_values(const RunConfig& c) {
    using detail::format_double;
    const SyntheticSpec& y = c.synthetic;
    std::ostringstream o;
    o << separator_key_values(c.separator)
      << "rank=" << y.rank << "\n"
      << "drift=" << format_double(y.drift) << "\n"
      << "block_height=" << y.block_height << "\n"
      << "block_width=" << y.block_width << "\n"
      << "velocity_x=" << format_double(y.velocity_x) << "\n"
      << "velocity_y=" << format_double(y.velocity_y) << "\n"
      << "intensity=" << format_double(y.intensity) << "\n"
      << "sparsity=" << format_double(y.sparsity) << "\n"
      << "noise=" << format_double(y.noise) << "\n"
      << "seed=" << y.seed << "\n"
      << "frames=" << y.frames << "\n"
      << "eval_begin=" << y.eval_begin << "\n"
      << "operator_seed=" << c.operator_seed << "\n"
      << "support_threshold=" << format_double(c.support_threshold) << "\n";
    return o.str();
}

} // namespace corpca
