#pragma once

// Synthetic sequences: rank-r drifting background plus a textured block
// moving at constant velocity (bouncing off the borders), with exact masks.

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>
#include <corpca/measurement.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace corpca {

/// Frames to separate plus optional ground truth.
struct Sequence {
    int height = 0;
    int width = 0;
    std::vector<Vector> training;
    std::vector<Vector> frames;
    std::vector<Vector> masks; ///< 0/1 per pixel, one per frame; empty when unknown
    int eval_begin = 0;        ///< first frame index included in metrics

    Eigen::Index n() const { return static_cast<Eigen::Index>(height) * width; }
};

struct SyntheticSpec {
    int height = 32;
    int width = 32;
    int rank = 2;
    double drift = 0.05; ///< angular rate (rad/frame) of the background coefficients
    int block_height = 0; ///< 0 derives a square block from `sparsity`
    int block_width = 0;
    double velocity_x = 2.0; ///< px/frame
    double velocity_y = 0.0;
    double intensity = 0.4;
    double sparsity = 0.05;
    double noise = 0.0;
    std::uint64_t seed = 1;
    int frames = 50;
    int training = 20;
    int eval_begin = 0;
};

struct SyntheticSequence {
    Sequence sequence;
    std::vector<Vector> true_background; ///< per evaluation frame
    std::vector<Vector> true_foreground; ///< frame - background, noise excluded
};

namespace detail {

// Smooth random field: a few low-frequency cosines with random phases, range [-1, 1] scaled.
inline Vector smooth_pattern(GaussianStream& rng, int height, int width) {
    Vector p(static_cast<Eigen::Index>(height) * width);
    constexpr int kTerms = 4;
    double fy[kTerms], fx[kTerms], phase[kTerms], amp[kTerms];
    for (int k = 0; k < kTerms; ++k) {
        fy[k] = (0.5 + 1.5 * rng.uniform()) * std::numbers::pi / height;
        fx[k] = (0.5 + 1.5 * rng.uniform()) * std::numbers::pi / width;
        phase[k] = 2.0 * std::numbers::pi * rng.uniform();
        amp[k] = 0.5 + rng.uniform();
    }
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kTerms; ++k) {
                acc += amp[k] * std::cos(fy[k] * r + fx[k] * c + phase[k]);
            }
            p(static_cast<Eigen::Index>(r) * width + c) = acc;
        }
    }
    const double lo = p.minCoeff();
    const double hi = p.maxCoeff();
    return hi > lo ? Vector((2.0 * (p.array() - lo) / (hi - lo) - 1.0).matrix()) : Vector::Zero(p.size());
}

// Reflect a coordinate into [0, span].
inline int bounce(double position, int span) {
    if (span == 0) {
        return 0;
    }
    const double period = 2.0 * span;
    double p = std::fmod(position, period);
    if (p < 0.0) {
        p += period;
    }
    if (p > span) {
        p = period - p;
    }
    return static_cast<int>(std::floor(p + 0.5));
}

} // namespace detail

inline SyntheticSequence generate_synthetic(const SyntheticSpec& spec) {
    if (spec.height < 2 || spec.width < 2 || spec.rank < 1 || spec.frames < 1 || spec.training < 1) {
        throw InvalidConfig("synthetic: dims, rank, frames and training must be positive");
    }
    if (!(spec.sparsity > 0.0 && spec.sparsity < 0.5)) {
        throw InvalidConfig("synthetic: sparsity must lie in (0, 0.5)");
    }
    if (spec.noise < 0.0 || spec.eval_begin < 0 || spec.eval_begin >= spec.frames) {
        throw InvalidConfig("synthetic: noise must be >= 0 and eval_begin inside the frame range");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(spec.height) * spec.width;
    int bh = spec.block_height;
    int bw = spec.block_width;
    if (bh == 0 && bw == 0) {
        const int side = static_cast<int>(std::lround(std::sqrt(spec.sparsity * static_cast<double>(n))));
        bh = bw = std::max(side, 1);
    }
    if (bh < 1 || bw < 1 || bh > spec.height || bw > spec.width) {
        throw InvalidConfig("synthetic: block does not fit in the frame");
    }

    GaussianStream rng(spec.seed);
    // background = base + sum_k c_k(t) P_k, kept inside roughly [0.2, 0.5 + 0.08 (r - 1)]
    std::vector<Vector> patterns;
    patterns.push_back((0.35 + 0.15 * detail::smooth_pattern(rng, spec.height, spec.width).array()).matrix());
    std::vector<double> phases;
    for (int k = 1; k < spec.rank; ++k) {
        patterns.push_back(0.08 * detail::smooth_pattern(rng, spec.height, spec.width));
        phases.push_back(2.0 * std::numbers::pi * rng.uniform());
    }
    auto background_at = [&](int t) {
        Vector b = patterns[0];
        for (int k = 1; k < spec.rank; ++k) {
            b += std::sin(spec.drift * k * t + phases[static_cast<std::size_t>(k - 1)]) * patterns[static_cast<std::size_t>(k)];
        }
        return b;
    };
    auto add_noise = [&](Vector f) {
        if (spec.noise > 0.0) {
            for (Eigen::Index i = 0; i < f.size(); ++i) {
                f(i) += spec.noise * rng.next();
            }
        }
        return Vector(f.cwiseMax(0.0).cwiseMin(1.0));
    };

    SyntheticSequence out;
    Sequence& seq = out.sequence;
    seq.height = spec.height;
    seq.width = spec.width;
    seq.eval_begin = spec.eval_begin;
    for (int t = 0; t < spec.training; ++t) {
        seq.training.push_back(add_noise(background_at(t)));
    }

    const int x0 = (spec.width - bw) / 4;
    const int y0 = (spec.height - bh) / 2;
    for (int f = 0; f < spec.frames; ++f) {
        const Vector bg = background_at(spec.training + f);
        const int left = detail::bounce(x0 + spec.velocity_x * f, spec.width - bw);
        const int top = detail::bounce(y0 + spec.velocity_y * f, spec.height - bh);
        Vector fg = Vector::Zero(n);
        Vector mask = Vector::Zero(n);
        for (int r = 0; r < bh; ++r) {
            for (int c = 0; c < bw; ++c) {
                const Eigen::Index i = static_cast<Eigen::Index>(top + r) * spec.width + (left + c);
                fg(i) = spec.intensity * (0.8 + 0.2 * std::cos(1.3 * r) * std::cos(1.7 * c));
                mask(i) = 1.0;
            }
        }
        const Vector clean = (bg + fg).cwiseMax(0.0).cwiseMin(1.0);
        out.true_background.push_back(bg);
        out.true_foreground.push_back(clean - bg);
        seq.frames.push_back(add_noise(clean));
        seq.masks.push_back(std::move(mask));
    }
    return out;
}

} // namespace corpca
