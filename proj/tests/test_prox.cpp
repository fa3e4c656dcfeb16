#include <corpca/prox.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using corpca::Matrix;
using corpca::PriorSet;
using corpca::Vector;

namespace {

// Random prior set with J sparse priors, positive weights (not normalized).
PriorSet random_priors(Eigen::Index n, int J, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> loc(-2.0, 2.0);
    std::uniform_real_distribution<double> wt(0.1, 2.0);
    std::vector<Vector> z;
    for (int j = 0; j < J; ++j) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i) = loc(gen);
        }
        z.push_back(v);
    }
    PriorSet p = PriorSet::with_uniform_weights(z, n);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        p.prior_weights(j) = wt(gen);
        for (Eigen::Index i = 0; i < n; ++i) {
            p.element_weights(j, i) = wt(gen);
        }
    }
    return p;
}

double coordinate_objective(double x, double u, const PriorSet& p, Eigen::Index i, double tau, double lambda) {
    double v = (x - u) * (x - u);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        v += tau * lambda * p.prior_weights(j) * p.element_weights(j, i) *
             std::abs(x - p.priors[static_cast<std::size_t>(j)](i));
    }
    return v;
}

double brute_coordinate(double u, const PriorSet& p, Eigen::Index i, double tau, double lambda) {
    std::vector<double> b;
    std::vector<double> c;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        b.push_back(p.priors[static_cast<std::size_t>(j)](i));
        c.push_back(tau * lambda * p.prior_weights(j) * p.element_weights(j, i));
    }
    return oracle::brute_prox(u, b, c);
}

} // namespace

TEST(SoftThreshold, ClosedForm) {
    EXPECT_DOUBLE_EQ(corpca::soft_threshold(3.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(corpca::soft_threshold(-0.5, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(corpca::soft_threshold(-3.0, 1.0), -2.0);
    for (double u : {-4.2, -1e-9, 0.0, 0.3, 17.0}) {
        EXPECT_EQ(corpca::soft_threshold(u, 0.0), u);
    }
    EXPECT_THROW(corpca::soft_threshold(1.0, -0.1), corpca::InvalidInput);
}

TEST(MultiL1Prox, SinglePriorCollapsesToSoftThreshold) {
    const Eigen::Index n = 16;
    const PriorSet p = PriorSet::with_uniform_weights({}, n);
    ASSERT_EQ(p.size(), 1);
    EXPECT_EQ(p.prior_weights(0), 1.0);
    const Vector u = 3.0 * oracle::random_vector(n, 4);
    const double tau = 0.8;
    const double lambda = 1.5;
    const Vector x = corpca::prox_weighted_multi_l1(u, p, tau, lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_NEAR(x(i), corpca::soft_threshold(u(i), tau * lambda / 2.0), 1e-15);
    }
}

TEST(MultiL1Prox, ZeroTauIsIdentity) {
    const PriorSet p = random_priors(16, 2, 3);
    const Vector u = oracle::random_vector(16, 5);
    EXPECT_TRUE(corpca::prox_weighted_multi_l1(u, p, 0.0, 1.0) == u);
}

TEST(MultiL1Prox, MatchesBruteForceJ2) {
    const Eigen::Index n = 16;
    const PriorSet p = random_priors(n, 2, 17);
    const Vector u = 2.5 * oracle::random_vector(n, 18);
    const double tau = 1.3;
    const double lambda = 0.9;
    const Vector x = corpca::prox_weighted_multi_l1(u, p, tau, lambda);
    for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_NEAR(x(i), brute_coordinate(u(i), p, i, tau, lambda), 1e-6) << "coordinate " << i;
    }
}

TEST(MultiL1Prox, DuplicateBreakpointsMerge) {
    const Eigen::Index n = 4;
    Vector z = Vector::Constant(n, 0.5);
    z(3) = 0.0;
    PriorSet p = PriorSet::with_uniform_weights({z, z}, n);
    const Vector u = Vector::Constant(n, 1.4);
    const Vector x = corpca::prox_weighted_multi_l1(u, p, 2.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_NEAR(x(i), brute_coordinate(u(i), p, i, 2.0, 1.0), 1e-6);
    }
}

TEST(MultiL1Prox, MinimizerProperty) {
    const Eigen::Index n = 32;
    const PriorSet p = random_priors(n, 3, 71);
    const Vector u = 2.0 * oracle::random_vector(n, 72);
    const Vector x = corpca::prox_weighted_multi_l1(u, p, 0.7, 1.1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double at_x = coordinate_objective(x(i), u(i), p, i, 0.7, 1.1);
        EXPECT_LE(at_x, coordinate_objective(u(i), u(i), p, i, 0.7, 1.1) + 1e-12);
        for (const Vector& z : p.priors) {
            EXPECT_LE(at_x, coordinate_objective(z(i), u(i), p, i, 0.7, 1.1) + 1e-12);
        }
    }
}

TEST(MultiL1Prox, OneLipschitzInU) {
    const Eigen::Index n = 64;
    const PriorSet p = random_priors(n, 3, 5);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Vector u1 = 3.0 * oracle::random_vector(n, 300 + s);
        const Vector u2 = 3.0 * oracle::random_vector(n, 400 + s);
        const Vector d = corpca::prox_weighted_multi_l1(u1, p, 1.0, 1.0) - corpca::prox_weighted_multi_l1(u2, p, 1.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            EXPECT_LE(std::abs(d(i)), std::abs(u1(i) - u2(i)) + 1e-12);
        }
    }
}

TEST(MultiL1Prox, ShiftEquivariance) {
    const Eigen::Index n = 24;
    const double c = 0.75;
    const PriorSet p = random_priors(n, 2, 90);
    PriorSet shifted = p;
    for (auto& z : shifted.priors) {
        z.array() += c;
    }
    const Vector u = oracle::random_vector(n, 91);
    const Vector a = corpca::prox_weighted_multi_l1(u, p, 0.9, 1.0);
    const Vector b = corpca::prox_weighted_multi_l1((u.array() + c).matrix(), shifted, 0.9, 1.0);
    EXPECT_LE((b - (a.array() + c).matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiL1Prox, RejectsNonFinite) {
    const PriorSet p = PriorSet::with_uniform_weights({}, 3);
    Vector u = Vector::Zero(3);
    u(1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(corpca::prox_weighted_multi_l1(u, p, 1.0, 1.0), corpca::InvalidInput);
    EXPECT_THROW(corpca::prox_weighted_multi_l1(Vector::Zero(3), p, -1.0, 1.0), corpca::InvalidInput);
}

TEST(Svt, DiagonalCase) {
    Matrix x = Matrix::Zero(3, 3);
    x.diagonal() << 5, 1, 0.1;
    const corpca::SvtResult r = corpca::svt(x, 1.0);
    Matrix want = Matrix::Zero(3, 3);
    want(0, 0) = 4.0;
    EXPECT_LE((r.matrix - want).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_DOUBLE_EQ(r.factors.S(0), 4.0);
    EXPECT_EQ(r.factors.S(1), 0.0);
}

TEST(Svt, ZeroThresholdKeepsInput) {
    const Matrix x = oracle::random_matrix(6, 4, 8);
    EXPECT_LE((corpca::svt(x, 0.0).matrix - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Svt, NuclearNormOfOutput) {
    const Matrix x = oracle::random_matrix(6, 4, 9);
    const corpca::SvtResult r = corpca::svt(x, 0.5);
    const double want = (oracle::singular_values(x).array() - 0.5).cwiseMax(0.0).sum();
    EXPECT_NEAR(oracle::singular_values(r.matrix).sum(), want, 1e-10);
}

TEST(Svt, IsTheProximalMinimizer) {
    const Matrix x = oracle::random_matrix(6, 4, 10);
    const double tau = 0.4;
    auto objective = [&](const Matrix& v) { return tau * oracle::singular_values(v).sum() + 0.5 * (v - x).squaredNorm(); };
    const Matrix best = corpca::svt(x, tau).matrix;
    const double at_best = objective(best);
    EXPECT_LE(at_best, objective(x) + 1e-12);
    for (std::uint64_t s = 0; s < 50; ++s) {
        EXPECT_LE(at_best, objective(best + 0.05 * oracle::random_matrix(6, 4, 500 + s)) + 1e-12);
    }
}

TEST(Weights, EqualToPriorGivesUnitWeights) {
    const Vector z = oracle::random_vector(8, 2);
    const PriorSet p = PriorSet::with_uniform_weights({z}, 8);
    const Matrix w = corpca::update_element_weights(z, p, 0.5);
    for (Eigen::Index i = 0; i < 8; ++i) {
        EXPECT_NEAR(w(1, i), 1.0, 1e-15);
    }
}

TEST(Weights, TwoElementFormula) {
    Vector z(2);
    z << 0.0, -1.0;
    const PriorSet p = PriorSet::with_uniform_weights({z}, 2);
    const Matrix w = corpca::update_element_weights(Vector::Zero(2), p, 0.1);
    // residuals (0, 1): weights 2 * (1/0.1, 1/1.1) / (1/0.1 + 1/1.1)
    const double a = 1.0 / 0.1;
    const double b = 1.0 / 1.1;
    EXPECT_NEAR(w(1, 0), 2.0 * a / (a + b), 1e-12);
    EXPECT_NEAR(w(1, 1), 2.0 * b / (a + b), 1e-12);
    EXPECT_NEAR(w(1, 0), 1.8333, 1e-4);
    EXPECT_NEAR(w(1, 1), 0.1667, 1e-4);
}

TEST(Weights, ScaleInvariantAsEpsilonVanishes) {
    const Vector z = oracle::random_vector(10, 6);
    const PriorSet p = PriorSet::with_uniform_weights({z}, 10);
    const Vector x = oracle::random_vector(10, 7);
    const Matrix w1 = corpca::update_element_weights(x, p, 1e-12);
    const PriorSet p3 = PriorSet::with_uniform_weights({3.0 * z}, 10);
    const Matrix w3 = corpca::update_element_weights(3.0 * x, p3, 1e-12);
    EXPECT_LE((w1 - w3).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Weights, PriorWeightFormula) {
    Vector z(2);
    z << 1.0, 0.0;
    PriorSet p = PriorSet::with_uniform_weights({z}, 2);
    Vector x(2);
    x << 1.0, 0.0;
    // prior 1 has zero residual, z_0 has weighted residual 1
    p.element_weights = Matrix::Ones(2, 2);
    p.priors[1] = x;
    const Vector beta = corpca::update_prior_weights(x, p, 0.1);
    const double a = 1.0 / 1.1;
    const double b = 1.0 / 0.1;
    EXPECT_NEAR(beta(0), a / (a + b), 1e-12);
    EXPECT_NEAR(beta(1), b / (a + b), 1e-12);
    EXPECT_NEAR(beta(1), 0.9167, 1e-4);
    EXPECT_NEAR(beta(0), 0.0833, 1e-4);
}

TEST(Weights, EquidistantPriorsUniformBeta) {
    // every prior, z_0 = 0 included, sits at distance c from x in every coordinate
    const Eigen::Index n = 6;
    const double c = 0.5;
    const Vector x = Vector::Constant(n, c);
    Vector alt1(n);
    Vector alt2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        alt1(i) = i % 2 == 0 ? 0.0 : 2.0 * c;
        alt2(i) = 2.0 * c - alt1(i);
    }
    const PriorSet p = PriorSet::with_uniform_weights({Vector::Constant(n, 2.0 * c), alt1, alt2}, n);
    const Vector beta = corpca::update_prior_weights(x, p, 0.3);
    for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_NEAR(beta(j), 0.25, 1e-15);
    }
    const PriorSet only = PriorSet::with_uniform_weights({}, n);
    EXPECT_DOUBLE_EQ(corpca::update_prior_weights(oracle::random_vector(n, 1), only, 0.3)(0), 1.0);
}

TEST(Weights, NormalizationsHoldOnRandomInputs) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        PriorSet p = random_priors(50, 3, 700 + s);
        const Vector x = oracle::random_vector(50, 800 + s);
        p.element_weights = corpca::update_element_weights(x, p, 0.8);
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            EXPECT_NEAR(p.element_weights.row(j).mean(), 1.0, 1e-9);
            EXPECT_GT(p.element_weights.row(j).minCoeff(), 0.0);
        }
        const Vector beta = corpca::update_prior_weights(x, p, 0.8);
        EXPECT_NEAR(beta.sum(), 1.0, 1e-9);
        EXPECT_GT(beta.minCoeff(), 0.0);
    }
}

TEST(Weights, RejectEpsilonOutsideUnitInterval) {
    const PriorSet p = PriorSet::with_uniform_weights({}, 3);
    EXPECT_THROW(corpca::update_element_weights(Vector::Zero(3), p, 0.0), corpca::InvalidInput);
    EXPECT_THROW(corpca::update_prior_weights(Vector::Zero(3), p, 1.0), corpca::InvalidInput);
}
