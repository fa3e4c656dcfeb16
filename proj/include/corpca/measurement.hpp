#pragma once

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace corpca {

/// Portable standard-normal stream: std::mt19937_64 (bit-exact across
/// standard libraries) feeding a basic Box-Muller transform. Both outputs of
/// each transform are used, cosine branch first. Do not change: golden
/// outputs and run manifests depend on it.
class GaussianStream {
public:
    static constexpr std::string_view name = "mt19937_64/box-muller";

    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Random projection Phi (m x n) with i.i.d. N(0, 1/m) entries, times an
/// optional global scale. (m == n, seed == 0) is reserved for the exact identity.
class MeasurementOperator {
public:
    MeasurementOperator() = default;

    static MeasurementOperator make(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
        if (m <= 0 || n <= 0) {
            throw InvalidInput("make_operator: dimensions must be positive");
        }
        if (m > n) {
            throw InvalidInput("make_operator: m must not exceed n");
        }
        MeasurementOperator op;
        op.m_ = m;
        op.n_ = n;
        op.seed_ = seed;
        if (m == n && seed == 0) {
            op.identity_ = true;
            return op;
        }
        op.entries_.resize(m, n);
        GaussianStream gauss(seed);
        const double sd = 1.0 / std::sqrt(static_cast<double>(m));
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                op.entries_(i, j) = gauss.next() * sd;
            }
        }
        return op;
    }

    Eigen::Index m() const { return m_; }
    Eigen::Index n() const { return n_; }
    std::uint64_t seed() const { return seed_; }
    double scale() const { return scale_; }
    bool is_identity() const { return identity_ && scale_ == 1.0; }
    static constexpr std::string_view generator_name() { return GaussianStream::name; }

    Vector apply(const Vector& x) const {
        if (x.size() != n_) {
            throw InvalidInput("apply: expected a length-n vector");
        }
        if (identity_) {
            return scale_ == 1.0 ? x : Vector(scale_ * x);
        }
        Vector y = entries_ * x;
        if (scale_ != 1.0) {
            y *= scale_;
        }
        return y;
    }

    Vector adjoint(const Vector& y) const {
        if (y.size() != m_) {
            throw InvalidInput("adjoint: expected a length-m vector");
        }
        if (identity_) {
            return scale_ == 1.0 ? y : Vector(scale_ * y);
        }
        Vector x = entries_.transpose() * y;
        if (scale_ != 1.0) {
            x *= scale_;
        }
        return x;
    }

    /// Dense entries including the scale (identity materialized if needed).
    Matrix dense() const {
        if (identity_) {
            return scale_ * Matrix::Identity(m_, n_);
        }
        return scale_ * entries_;
    }

    /// Largest singular value by a fixed-count power iteration from the all-ones vector.
    double spectral_norm(int iterations = 200) const {
        if (identity_) {
            return std::abs(scale_);
        }
        Vector x = Vector::Ones(n_) / std::sqrt(static_cast<double>(n_));
        double estimate = 0.0;
        for (int it = 0; it < iterations; ++it) {
            Vector z = adjoint(apply(x));
            const double norm = z.norm();
            if (norm == 0.0) {
                return 0.0;
            }
            estimate = norm;
            x = z / norm;
        }
        return std::sqrt(estimate);
    }

    /// Copy rescaled so that ||Phi||_2 <= 1, which makes the fixed 1/2 gradient
    /// step valid for the joint (x, v) problem. Unchanged when already <= 1.
    MeasurementOperator normalized_for_unit_step() const {
        MeasurementOperator op = *this;
        const double norm = spectral_norm();
        if (norm > 1.0) {
            op.scale_ = scale_ / (norm * kSpectralMargin);
        }
        return op;
    }

    /// Copy with an explicit global scale (restoring a checkpointed operator).
    MeasurementOperator with_scale(double scale) const {
        if (!std::isfinite(scale) || scale == 0.0) {
            throw InvalidInput("with_scale: scale must be finite and nonzero");
        }
        MeasurementOperator op = *this;
        op.scale_ = scale;
        return op;
    }

private:
    static constexpr double kSpectralMargin = 1.02;

    Eigen::Index m_ = 0;
    Eigen::Index n_ = 0;
    std::uint64_t seed_ = 0;
    double scale_ = 1.0;
    bool identity_ = false;
    Matrix entries_;
};

inline MeasurementOperator make_operator(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
    return MeasurementOperator::make(m, n, seed);
}

} // namespace corpca
