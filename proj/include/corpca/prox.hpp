#pragma once

// Proximal operators of the multi-prior weighted l1 term and the nuclear
// norm, plus the adaptive weight rules that drive them.

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace corpca {

inline double soft_threshold(double u, double tau) {
    if (!(tau >= 0.0)) {
        throw InvalidInput("soft_threshold: tau must be nonnegative");
    }
    if (u > tau) {
        return u - tau;
    }
    if (u < -tau) {
        return u + tau;
    }
    return 0.0;
}

/// Priors z_0..z_J (z_0 == 0) with per-element weights w_ji (rows) and
/// per-prior weights beta_j.
struct PriorSet {
    std::vector<Vector> priors;
    Matrix element_weights;
    Vector prior_weights;

    /// z_0 = 0 prepended to `sparse`; all w_ji = 1 and beta uniform.
    static PriorSet with_uniform_weights(const std::vector<Vector>& sparse, Eigen::Index n) {
        PriorSet p;
        p.priors.reserve(sparse.size() + 1);
        p.priors.push_back(Vector::Zero(n));
        for (const Vector& z : sparse) {
            if (z.size() != n) {
                throw InvalidInput("PriorSet: prior length differs from n");
            }
            p.priors.push_back(z);
        }
        const auto count = static_cast<Eigen::Index>(p.priors.size());
        p.element_weights = Matrix::Ones(count, n);
        p.prior_weights = Vector::Constant(count, 1.0 / static_cast<double>(count));
        return p;
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(priors.size()); }
    Eigen::Index dimension() const { return priors.empty() ? 0 : priors.front().size(); }

    void check(Eigen::Index n) const {
        if (priors.empty()) {
            throw InvalidInput("PriorSet: missing z_0");
        }
        if (element_weights.rows() != size() || element_weights.cols() != n || prior_weights.size() != size()) {
            throw InvalidInput("PriorSet: weight shapes do not match priors");
        }
        for (const Vector& z : priors) {
            if (z.size() != n) {
                throw InvalidInput("PriorSet: prior length differs from n");
            }
            if (!z.allFinite()) {
                throw InvalidInput("PriorSet: non-finite prior");
            }
        }
        if (!element_weights.allFinite() || !prior_weights.allFinite()) {
            throw InvalidInput("PriorSet: non-finite weights");
        }
    }
};

/// Scratch storage for the per-coordinate breakpoint search.
struct ProxWorkspace {
    std::vector<std::pair<double, double>> kinks; // (location, weight), merged
    std::vector<double> suffix;                   // sum of weights at index >= k
};

namespace detail {

// argmin_x (x - u)^2 + sum_k c_k |x - b_k| over kinks sorted by b, distinct.
inline double minimize_piecewise(double u, const std::vector<std::pair<double, double>>& kinks,
                                 std::vector<double>& suffix) {
    const std::size_t count = kinks.size();
    suffix.assign(count + 1, 0.0);
    for (std::size_t k = count; k-- > 0;) {
        suffix[k] = suffix[k + 1] + kinks[k].second;
    }
    double left = 0.0;
    for (std::size_t k = 0; k <= count; ++k) {
        // open interval (b_{k-1}, b_k): slope contribution left - right
        const double right = suffix[k];
        const double x = u - 0.5 * (left - right);
        const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : kinks[k - 1].first;
        const double hi = k == count ? std::numeric_limits<double>::infinity() : kinks[k].first;
        if (x > lo && x < hi) {
            return x;
        }
        if (k == count) {
            break;
        }
        const auto [b, c] = kinks[k];
        const double g = 2.0 * (b - u) + left - suffix[k + 1];
        if (std::abs(g) <= c) {
            return b;
        }
        left += c;
    }
    // Rounding left no certified piece; take the best breakpoint.
    double best = kinks.front().first;
    double best_value = std::numeric_limits<double>::infinity();
    for (const auto& [b, ignored] : kinks) {
        double value = (b - u) * (b - u);
        for (const auto& [bk, ck] : kinks) {
            value += ck * std::abs(b - bk);
        }
        if (value < best_value) {
            best_value = value;
            best = b;
        }
    }
    return best;
}

} // namespace detail

/// Per-coordinate exact minimizer of (x - u)^2 + tau*lambda*sum_j beta_j w_ji |x - z_ji|.
inline Vector prox_weighted_multi_l1(const Vector& u, const PriorSet& priors, double tau, double lambda,
                                     ProxWorkspace& ws) {
    if (!(tau >= 0.0) || !(lambda >= 0.0)) {
        throw InvalidInput("prox_weighted_multi_l1: tau and lambda must be nonnegative");
    }
    if (!u.allFinite() || !std::isfinite(tau) || !std::isfinite(lambda)) {
        throw InvalidInput("prox_weighted_multi_l1: non-finite input");
    }
    const Eigen::Index n = u.size();
    priors.check(n);
    const Eigen::Index count = priors.size();
    const double scale = tau * lambda;

    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ws.kinks.clear();
        for (Eigen::Index j = 0; j < count; ++j) {
            ws.kinks.emplace_back(priors.priors[static_cast<std::size_t>(j)](i),
                                  scale * priors.prior_weights(j) * priors.element_weights(j, i));
        }
        std::sort(ws.kinks.begin(), ws.kinks.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        // merge duplicate locations
        std::size_t w = 0;
        for (std::size_t r = 1; r < ws.kinks.size(); ++r) {
            if (ws.kinks[r].first == ws.kinks[w].first) {
                ws.kinks[w].second += ws.kinks[r].second;
            } else {
                ws.kinks[++w] = ws.kinks[r];
            }
        }
        ws.kinks.resize(w + 1);
        out(i) = detail::minimize_piecewise(u(i), ws.kinks, ws.suffix);
    }
    return out;
}

inline Vector prox_weighted_multi_l1(const Vector& u, const PriorSet& priors, double tau, double lambda) {
    ProxWorkspace ws;
    return prox_weighted_multi_l1(u, priors, tau, lambda, ws);
}

/// sum_j beta_j ||W_j (x - z_j)||_1
inline double weighted_multi_l1(const Vector& x, const PriorSet& priors) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < priors.size(); ++j) {
        const Vector& z = priors.priors[static_cast<std::size_t>(j)];
        total += priors.prior_weights(j) *
                 (priors.element_weights.row(j).transpose().array() * (x - z).array().abs()).sum();
    }
    return total;
}

/// Singular-value soft thresholding of X together with the shrunk factors.
struct SvtResult {
    Matrix matrix;
    SvdFactors factors;
};

inline SvtResult svt(const Matrix& x, double tau) {
    if (!(tau >= 0.0)) {
        throw InvalidInput("svt: tau must be nonnegative");
    }
    SvtResult r;
    r.factors = svd(x);
    r.factors.S = (r.factors.S.array() - tau).cwiseMax(0.0).matrix();
    r.matrix = r.factors.reconstruct();
    return r;
}

/// w_ji = n (|x_i - z_ji| + eps)^-1 / sum_l (|x_l - z_jl| + eps)^-1
inline Matrix update_element_weights(const Vector& x, const PriorSet& priors, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw InvalidInput("update_element_weights: epsilon must lie in (0, 1)");
    }
    const Eigen::Index n = x.size();
    if (!x.allFinite()) {
        throw InvalidInput("update_element_weights: non-finite estimate");
    }
    Matrix w(priors.size(), n);
    for (Eigen::Index j = 0; j < priors.size(); ++j) {
        const Vector& z = priors.priors[static_cast<std::size_t>(j)];
        if (z.size() != n) {
            throw InvalidInput("update_element_weights: prior length differs from n");
        }
        const Eigen::ArrayXd inv = ((x - z).array().abs() + epsilon).inverse();
        w.row(j) = (static_cast<double>(n) * inv / inv.sum()).matrix().transpose();
    }
    return w;
}

/// beta_j = (||W_j (x - z_j)||_1 + eps)^-1 / sum_l (||W_l (x - z_l)||_1 + eps)^-1,
/// using the element weights already stored in `priors`.
inline Vector update_prior_weights(const Vector& x, const PriorSet& priors, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw InvalidInput("update_prior_weights: epsilon must lie in (0, 1)");
    }
    if (!x.allFinite()) {
        throw InvalidInput("update_prior_weights: non-finite estimate");
    }
    Vector inv(priors.size());
    for (Eigen::Index j = 0; j < priors.size(); ++j) {
        const Vector& z = priors.priors[static_cast<std::size_t>(j)];
        const double residual = (priors.element_weights.row(j).transpose().array() * (x - z).array().abs()).sum();
        inv(j) = 1.0 / (residual + epsilon);
    }
    return inv / inv.sum();
}

} // namespace corpca
