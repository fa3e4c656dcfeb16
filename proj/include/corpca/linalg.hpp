#pragma once

// Dense primitives for the low-rank prior: a deterministic one-sided Jacobi
// SVD, the rank-one column-append update of a thin SVD, and truncation with
// singular-value shrinkage.

#include <corpca/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace corpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD A = U * diag(S) * V^T, S nonincreasing.
struct SvdFactors {
    Matrix U;
    Vector S;
    Matrix V;

    Eigen::Index rank() const { return S.size(); }

    Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

namespace detail {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Deterministic unit vector orthogonal to the first `count` columns of `basis`,
// taken from the canonical basis e_0, e_1, ... in order.
inline Vector orthogonal_complement_vector(const Matrix& basis, Eigen::Index count) {
    const Eigen::Index n = basis.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector c = Vector::Zero(n);
        c(i) = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index k = 0; k < count; ++k) {
                c -= basis.col(k).dot(c) * basis.col(k);
            }
        }
        const double norm = c.norm();
        if (norm > 0.5) {
            return c / norm;
        }
    }
    throw InvalidInput("no orthogonal complement: basis already spans the space");
}

// Largest-magnitude entry of each U column is made nonnegative; V follows.
inline void normalize_signs(Matrix& U, Matrix& V) {
    for (Eigen::Index k = 0; k < U.cols(); ++k) {
        Eigen::Index arg = 0;
        U.col(k).cwiseAbs().maxCoeff(&arg);
        if (U(arg, k) < 0.0) {
            U.col(k) = -U.col(k);
            V.col(k) = -V.col(k);
        }
    }
}

// Hestenes one-sided Jacobi for rows >= cols.
inline SvdFactors jacobi_svd_tall(const Matrix& a) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    Matrix w = a;
    Matrix v = Matrix::Identity(n, n);
    const double tol = kEps * static_cast<double>(m);
    constexpr int kMaxSweeps = 80;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double alpha = w.col(i).squaredNorm();
                const double beta = w.col(j).squaredNorm();
                const double gamma = w.col(i).dot(w.col(j));
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Eigen::Index r = 0; r < m; ++r) {
                    const double wi = w(r, i);
                    const double wj = w(r, j);
                    w(r, i) = c * wi - s * wj;
                    w(r, j) = s * wi + c * wj;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double vi = v(r, i);
                    const double vj = v(r, j);
                    v(r, i) = c * vi - s * vj;
                    v(r, j) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) {
            break;
        }
    }

    Vector norms(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        norms(k) = w.col(k).norm();
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) { return norms(p) > norms(q); });

    SvdFactors f;
    f.U = Matrix::Zero(m, n);
    f.S = Vector::Zero(n);
    f.V = Matrix::Zero(n, n);
    const double smax = norms.size() > 0 ? norms(order[0]) : 0.0;
    const double floor = smax * kEps * static_cast<double>(std::max(m, n));

    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        f.V.col(k) = v.col(src);
        const double sigma = norms(src);
        Vector u;
        bool usable = sigma > floor && sigma > 0.0;
        if (usable) {
            u = w.col(src) / sigma;
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index p = 0; p < k; ++p) {
                    u -= f.U.col(p).dot(u) * f.U.col(p);
                }
            }
            const double un = u.norm();
            usable = un > 0.5;
            if (usable) {
                u /= un;
            }
        }
        if (usable) {
            f.S(k) = sigma;
        } else {
            u = orthogonal_complement_vector(f.U, k);
            f.S(k) = 0.0;
        }
        f.U.col(k) = u;
    }
    normalize_signs(f.U, f.V);
    return f;
}

} // namespace detail

/// Thin SVD with r = min(rows, cols). Deterministic: fixed cyclic sweep order
/// and sign convention (largest-magnitude entry of each U column >= 0).
inline SvdFactors svd(const Matrix& a) {
    if (a.size() == 0) {
        throw InvalidInput("svd: empty matrix");
    }
    if (!all_finite(a)) {
        throw InvalidInput("svd: non-finite input");
    }
    if (std::min(a.rows(), a.cols()) > 4096) {
        throw InvalidInput("svd: matrix too large for the dense Jacobi path");
    }
    if (a.rows() >= a.cols()) {
        return detail::jacobi_svd_tall(a);
    }
    SvdFactors t = detail::jacobi_svd_tall(a.transpose());
    SvdFactors f{std::move(t.V), std::move(t.S), std::move(t.U)};
    detail::normalize_signs(f.U, f.V);
    return f;
}

/// The pieces of a column-append update [B v] = [U q] * K * blockdiag(V, 1)^T,
/// with K the (r+1)x(r+1) middle matrix [[diag(S), e], [0, rho]].
struct ColumnAppend {
    Vector e;          // U^T v
    Vector q;          // unit residual direction
    double rho = 0.0;  // ||v - U e||
    SvdFactors middle; // SVD of K
};

/// Residual norms below this are treated as exact zero (v in span(U)).
inline constexpr double kAppendZeroResidual = 1e-12;

inline ColumnAppend append_column(const SvdFactors& prior, const Vector& v) {
    const Eigen::Index n = prior.U.rows();
    const Eigen::Index r = prior.S.size();
    if (v.size() != n || prior.U.cols() != r || prior.V.cols() != r) {
        throw InvalidInput("inc_svd: dimension mismatch");
    }
    if (!v.allFinite()) {
        throw InvalidInput("inc_svd: non-finite column");
    }
    if (r + 1 > n) {
        throw InvalidInput("inc_svd: appended column would exceed the ambient dimension");
    }
    ColumnAppend a;
    a.e = prior.U.transpose() * v;
    Vector delta = v - prior.U * a.e;
    // second Gram-Schmidt pass keeps delta orthogonal to U at machine precision
    const Vector correction = prior.U.transpose() * delta;
    a.e += correction;
    delta -= prior.U * correction;
    a.rho = delta.norm();
    if (a.rho < kAppendZeroResidual) {
        a.rho = 0.0;
        a.q = detail::orthogonal_complement_vector(prior.U, r);
    } else {
        a.q = delta / a.rho;
    }

    Matrix k = Matrix::Zero(r + 1, r + 1);
    k.topLeftCorner(r, r) = prior.S.asDiagonal();
    k.topRightCorner(r, 1) = a.e;
    k(r, r) = a.rho;
    a.middle = svd(k);
    return a;
}

/// Materializes the full updated factors from a column-append step.
inline SvdFactors assemble(const SvdFactors& prior, const ColumnAppend& a) {
    const Eigen::Index n = prior.U.rows();
    const Eigen::Index r = prior.S.size();
    const Eigen::Index c = prior.V.rows();
    Matrix basis(n, r + 1);
    basis.leftCols(r) = prior.U;
    basis.col(r) = a.q;

    Matrix right = Matrix::Zero(c + 1, r + 1);
    right.topLeftCorner(c, r) = prior.V;
    right(c, r) = 1.0;

    SvdFactors f;
    f.U = basis * a.middle.U;
    f.S = a.middle.S;
    f.V = right * a.middle.V;
    detail::normalize_signs(f.U, f.V);
    return f;
}

/// SVD of [B v] from the SVD of B, via the (r+1)x(r+1) middle matrix only.
inline SvdFactors inc_svd(const SvdFactors& prior, const Vector& v) {
    return assemble(prior, append_column(prior, v));
}

/// Retained leading factors after shrinking singular values by tau.
struct Truncation {
    Matrix matrix;       // U_d * diag(max(S_d - tau, 0)) * V_d^T
    SvdFactors retained; // U_d, shrunk S_d, V_d
};

inline Truncation truncate_factors(const SvdFactors& f, int d, double tau) {
    if (d <= 0) {
        throw InvalidInput("truncate_factors: d must be positive");
    }
    if (f.S.size() < d) {
        throw InvalidInput("truncate_factors: fewer singular values than d");
    }
    if (!(tau >= 0.0)) {
        throw InvalidInput("truncate_factors: negative threshold");
    }
    Truncation t;
    t.retained.U = f.U.leftCols(d);
    t.retained.S = (f.S.head(d).array() - tau).cwiseMax(0.0).matrix();
    t.retained.V = f.V.leftCols(d);
    t.matrix = t.retained.reconstruct();
    return t;
}

} // namespace corpca
