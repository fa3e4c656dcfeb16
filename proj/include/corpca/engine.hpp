#pragma once

// Online compressive separation of one frame's measurements into a sparse
// foreground and a low-rank background, with optional motion-compensated
// foreground priors.

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>
#include <corpca/measurement.hpp>
#include <corpca/motion.hpp>
#include <corpca/prox.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace corpca {

struct SeparatorConfig {
    double lambda = 0.0;             ///< l1 weight; 0 selects 1/sqrt(n)
    double mu_bar = 3e-2;            ///< continuation floor
    double mu0 = 0.0;                ///< initial continuation value; 0 selects 0.99*||Phi^T y||_inf
    double epsilon = 0.8;            ///< weight smoothing, in (0, 1)
    double continuation_decay = 0.0; ///< mu_{k+1} = max(decay*mu_k, mu_bar); 0 reuses epsilon
    int J = 3;                       ///< number of sparse priors
    int d = 100;                     ///< low-rank prior width
    int max_iters = 2000;
    double tol_scale = 2e-7;
    int height = 0; ///< frame geometry, needed by the motion-compensated mode
    int width = 0;
    bool adaptive_weights = true; ///< false pins w_ji = 1 and beta_j = 1/(J+1)
    FlowConfig flow;

    double lambda_for(Eigen::Index n) const { return lambda > 0.0 ? lambda : 1.0 / std::sqrt(static_cast<double>(n)); }
    double decay() const { return continuation_decay > 0.0 ? continuation_decay : epsilon; }

    void validate() const {
        if (lambda < 0.0 || !(mu_bar > 0.0) || mu0 < 0.0) {
            throw InvalidConfig("SeparatorConfig: lambda, mu0 must be >= 0 and mu_bar > 0");
        }
        if (!(epsilon > 0.0 && epsilon < 1.0) || !(decay() > 0.0 && decay() < 1.0)) {
            throw InvalidConfig("SeparatorConfig: epsilon and continuation_decay must lie in (0, 1)");
        }
        if (J < 1 || d < 1 || max_iters < 1 || !(tol_scale > 0.0)) {
            throw InvalidConfig("SeparatorConfig: J, d, max_iters must be >= 1 and tol_scale > 0");
        }
        if (height < 0 || width < 0) {
            throw InvalidConfig("SeparatorConfig: negative frame geometry");
        }
        flow.validate();
    }
};

/// Prior information carried between frames.
struct EngineState {
    SvdFactors background;             ///< B_t, exactly d columns
    std::vector<Vector> sparse_priors; ///< z_1..z_J, oldest first (z_J is the newest)
    std::vector<Vector> history;       ///< up to three latest foregrounds, newest first
    long t = 0;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double residual_norm = 0.0;
    double mu = 0.0;
    double xi = 0.0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    bool converged = false;
    Matrix element_weights; ///< final w_ji
    Vector prior_weights;   ///< final beta_j
    std::vector<Vector> x_iterates; ///< filled only when SolveHooks::keep_iterates
    std::vector<Vector> v_iterates;
};

struct Separation {
    Vector foreground;
    Vector background;
    IterationTrace trace;
};

/// Test and diagnostics hooks for separate().
struct SolveHooks {
    /// Pins the low-rank component (the background block is not solved and B is not updated).
    std::optional<Vector> fixed_background;
    bool keep_iterates = false;
};

struct ConvergenceCheck {
    bool converged = false;
    double residual_sq = 0.0;
    double reference_sq = 0.0;
};

/// Composite-gradient-mapping test: r = 2((x~, v~) - (x+, v+)) + grad f(x+, v+) - grad f(x~, v~)
/// is an element of the subdifferential at the new point; converged when
/// ||r||^2 < tol * ||(x+, v+)||^2 (or r is exactly zero). Both block gradients
/// of f coincide, so a single gradient vector is passed for each point.
inline ConvergenceCheck check_convergence(const Vector& x_extrapolated, const Vector& v_extrapolated, const Vector& x_next,
                                          const Vector& v_next, const Vector& grad_extrapolated, const Vector& grad_next,
                                          double tol_scale, bool include_lowrank = true) {
    const Vector dg = grad_next - grad_extrapolated;
    ConvergenceCheck c;
    c.residual_sq = (2.0 * (x_extrapolated - x_next) + dg).squaredNorm();
    if (include_lowrank) {
        c.residual_sq += (2.0 * (v_extrapolated - v_next) + dg).squaredNorm();
    }
    c.reference_sq = x_next.squaredNorm() + v_next.squaredNorm();
    c.converged = c.residual_sq < tol_scale * c.reference_sq || c.residual_sq == 0.0;
    return c;
}

/// ||[B v]||_* from the factors of B.
inline double appended_nuclear_norm(const SvdFactors& background, const Vector& v) {
    return append_column(background, v).middle.S.sum();
}

/// H(x, v) = 1/2 ||Phi(x + v) - y||^2 + lambda*mu*sum_j beta_j ||W_j(x - z_j)||_1 + mu*||[B v]||_*
inline double objective(const Vector& x, const Vector& v, const Vector& y, const MeasurementOperator& op,
                        const PriorSet& priors, const SvdFactors& background, double lambda, double mu) {
    const double data = 0.5 * (op.apply(x + v) - y).squaredNorm();
    return data + lambda * mu * weighted_multi_l1(x, priors) + mu * appended_nuclear_norm(background, v);
}

/// B_0 from exactly cfg.d training frames; no foreground observed yet.
inline EngineState init_from_training(const std::vector<Vector>& frames, const SeparatorConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(frames.size()) != cfg.d) {
        throw InvalidInput("init_from_training: expected exactly d training frames");
    }
    const Eigen::Index n = frames.front().size();
    if (n <= cfg.d) {
        throw InvalidInput("init_from_training: frame length must exceed d");
    }
    Matrix training(n, cfg.d);
    for (int k = 0; k < cfg.d; ++k) {
        if (frames[static_cast<std::size_t>(k)].size() != n) {
            throw InvalidInput("init_from_training: frame lengths differ");
        }
        training.col(k) = frames[static_cast<std::size_t>(k)];
    }
    EngineState state;
    state.background = svd(training);
    state.sparse_priors.assign(static_cast<std::size_t>(cfg.J), Vector::Zero(n));
    return state;
}

namespace detail {

inline void check_state(const EngineState& state, const SeparatorConfig& cfg, Eigen::Index n) {
    if (state.background.U.rows() != n || state.background.S.size() != cfg.d) {
        throw InvalidInput("separate: background prior does not match n x d");
    }
    if (static_cast<int>(state.sparse_priors.size()) != cfg.J) {
        throw InvalidInput("separate: expected J sparse priors");
    }
}

inline Separation solve_instance(EngineState& state, const Vector& y, const MeasurementOperator& op,
                                 const SeparatorConfig& cfg, const std::vector<Vector>& sparse_priors,
                                 const SolveHooks& hooks) {
    cfg.validate();
    const Eigen::Index n = op.n();
    if (y.size() != op.m()) {
        throw InvalidInput("separate: measurement length differs from m");
    }
    if (!y.allFinite()) {
        throw InvalidInput("separate: non-finite measurements");
    }
    check_state(state, cfg, n);
    const bool lowrank_free = !hooks.fixed_background.has_value();
    if (!lowrank_free && hooks.fixed_background->size() != n) {
        throw InvalidInput("separate: fixed background length differs from n");
    }

    const double lambda = cfg.lambda_for(n);
    const double decay = cfg.decay();
    const Eigen::Index r = state.background.S.size();

    PriorSet priors = PriorSet::with_uniform_weights(sparse_priors, n);
    if (cfg.adaptive_weights) {
        priors.prior_weights = update_prior_weights(Vector::Zero(n), priors, cfg.epsilon);
    }

    Vector x = Vector::Zero(n);
    Vector x_prev = x;
    Vector v = lowrank_free ? Vector::Zero(n) : *hooks.fixed_background;
    Vector v_prev = v;
    // Phi^T(Phi(x + v) - y) at the last two iterates; the gradient is affine,
    // so the extrapolated point's gradient is the same combination of these.
    Vector grad_cur = op.adjoint(op.apply(x + v) - y);
    Vector grad_prev = grad_cur;
    double xi = 1.0;
    double xi_prev = 1.0;
    double mu = cfg.mu0 > 0.0 ? cfg.mu0 : 0.99 * op.adjoint(y).lpNorm<Eigen::Infinity>();
    mu = std::max(mu, cfg.mu_bar);

    Separation out;
    ProxWorkspace ws;
    ColumnAppend last_append;
    double last_mu = mu;
    double best_objective = std::numeric_limits<double>::infinity();

    for (int k = 0; k < cfg.max_iters; ++k) {
        const double momentum = (xi_prev - 1.0) / xi;
        const Vector xt = x + momentum * (x - x_prev);
        const Vector vt = lowrank_free ? Vector(v + momentum * (v - v_prev)) : v;
        const Vector grad = grad_cur + momentum * (grad_cur - grad_prev);

        Vector v_next;
        if (lowrank_free) {
            last_append = append_column(state.background, vt - 0.5 * grad);
            const SvdFactors& mid = last_append.middle;
            const Vector shrunk = (mid.S.array() - 0.5 * mu).cwiseMax(0.0).matrix();
            // last column of [U q] * Utilde * diag(shrunk) * Vtilde^T * blockdiag(V, 1)^T
            const Vector coeffs = mid.U * shrunk.cwiseProduct(mid.V.row(r).transpose());
            v_next = state.background.U * coeffs.head(r) + last_append.q * coeffs(r);
        } else {
            v_next = v;
        }
        Vector x_next = prox_weighted_multi_l1(xt - 0.5 * grad, priors, mu, lambda, ws);

        if (!x_next.allFinite() || !v_next.allFinite()) {
            throw DivergenceDetected("separate: non-finite iterate", k);
        }

        if (cfg.adaptive_weights) {
            priors.element_weights = update_element_weights(x_next, priors, cfg.epsilon);
            priors.prior_weights = update_prior_weights(x_next, priors, cfg.epsilon);
        }

        const Vector data_residual = op.apply(x_next + v_next) - y;
        const Vector grad_next = op.adjoint(data_residual);
        const ConvergenceCheck conv =
            check_convergence(xt, vt, x_next, v_next, grad, grad_next, cfg.tol_scale, lowrank_free);

        double h = 0.5 * data_residual.squaredNorm() + lambda * mu * weighted_multi_l1(x_next, priors);
        if (lowrank_free) {
            h += mu * appended_nuclear_norm(state.background, v_next);
        }
        if (!std::isfinite(h)) {
            throw DivergenceDetected("separate: non-finite objective", k);
        }
        best_objective = std::min(best_objective, h);
        if (h > 1e6 * std::max(best_objective, std::numeric_limits<double>::min())) {
            throw DivergenceDetected("separate: objective grew 1e6x above its minimum", k);
        }
        out.trace.records.push_back({k, h, std::sqrt(conv.residual_sq), mu, xi});
        if (hooks.keep_iterates) {
            out.trace.x_iterates.push_back(x_next);
            out.trace.v_iterates.push_back(v_next);
        }

        const double xi_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * xi * xi));
        last_mu = mu;
        mu = std::max(decay * mu, cfg.mu_bar);
        xi_prev = xi;
        xi = xi_next;
        grad_prev = std::move(grad_cur);
        grad_cur = grad_next;
        x_prev = std::move(x);
        x = std::move(x_next);
        v_prev = std::move(v);
        v = std::move(v_next);

        // The residual only certifies optimality for the current mu, so stopping
        // waits until the continuation has reached its floor.
        if (conv.converged && last_mu == cfg.mu_bar) {
            out.trace.converged = true;
            break;
        }
    }

    out.trace.element_weights = priors.element_weights;
    out.trace.prior_weights = priors.prior_weights;

    // prior update: Z_t keeps the J latest foregrounds; B_t the d leading shrunk factors
    state.sparse_priors.erase(state.sparse_priors.begin());
    state.sparse_priors.push_back(x);
    state.history.insert(state.history.begin(), x);
    if (state.history.size() > 3) {
        state.history.pop_back();
    }
    if (lowrank_free) {
        const Truncation kept = truncate_factors(assemble(state.background, last_append), cfg.d, 0.5 * last_mu);
        state.background.U = kept.retained.U;
        state.background.S = kept.retained.S;
        state.background.V = Matrix::Identity(cfg.d, cfg.d);
    }
    ++state.t;

    out.foreground = std::move(x);
    out.background = std::move(v);
    return out;
}

} // namespace detail

/// One time instance without motion compensation; updates `state` in place.
inline Separation separate(EngineState& state, const Vector& y, const MeasurementOperator& op,
                           const SeparatorConfig& cfg, const SolveHooks& hooks = {}) {
    const std::vector<Vector> priors = state.sparse_priors;
    return detail::solve_instance(state, y, op, cfg, priors, hooks);
}

/// One time instance with motion-compensated foreground priors. Falls back to
/// separate() until three foregrounds have been recovered.
inline Separation separate_with_flow_priors(EngineState& state, const Vector& y, const MeasurementOperator& op,
                                            const SeparatorConfig& cfg, const SolveHooks& hooks = {}) {
    if (state.history.size() < 3) {
        return separate(state, y, op, cfg, hooks);
    }
    if (static_cast<Eigen::Index>(cfg.height) * cfg.width != op.n()) {
        throw InvalidConfig("separate_with_flow_priors: height*width must equal n");
    }
    std::vector<Vector> priors = state.sparse_priors;
    const FlowPriors flow = generate_priors(state.history[0], state.history[1], state.history[2], cfg.height,
                                            cfg.width, cfg.flow);
    const std::size_t j = priors.size();
    priors[j - 1] = flow.latest;
    if (j >= 2) {
        priors[j - 2] = flow.from_previous;
    }
    if (j >= 3) {
        priors[j - 3] = flow.half_motion;
    }
    return detail::solve_instance(state, y, op, cfg, priors, hooks);
}

} // namespace corpca
