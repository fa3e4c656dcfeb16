#include <corpca/motion.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using corpca::FlowConfig;
using corpca::FlowField;
using corpca::Frame2D;
using corpca::Image;
using corpca::Vector;

namespace {

template <typename F>
Frame2D render(int h, int w, F&& f) {
    Image img(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            img(r, c) = f(static_cast<double>(r), static_cast<double>(c));
        }
    }
    return Frame2D{img};
}

double blob(double r, double c, double r0, double c0, double sigma) {
    const double d2 = (r - r0) * (r - r0) + (c - c0) * (c - c0);
    return 0.1 + 0.8 * std::exp(-d2 / (2.0 * sigma * sigma));
}

double median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
}

Frame2D block_frame(int h, int w, int top, int left, int size) {
    Image img = Image::Zero(h, w);
    img.block(top, left, size, size).setConstant(0.6);
    return Frame2D{img};
}

Eigen::Vector2d centroid(const Image& img) {
    double total = 0.0;
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (Eigen::Index r = 0; r < img.rows(); ++r) {
        for (Eigen::Index c = 0; c < img.cols(); ++c) {
            total += img(r, c);
            acc += img(r, c) * Eigen::Vector2d(static_cast<double>(c), static_cast<double>(r));
        }
    }
    return acc / total;
}

} // namespace

TEST(Flow, IdenticalFramesGiveZeroFlow) {
    const oracle::Texture tex(3);
    const Frame2D f = render(64, 80, [&](double r, double c) { return tex(r, c); });
    const FlowField flow = corpca::estimate_flow(f, f);
    EXPECT_LE(flow.vx.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(flow.vy.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Flow, BlobTranslatedThreePixels) {
    const Frame2D ref = render(64, 80, [](double r, double c) { return blob(r, c, 32.0, 38.0, 7.0); });
    const Frame2D tgt = render(64, 80, [](double r, double c) { return blob(r, c, 32.0, 41.0, 7.0); });
    const FlowField flow = corpca::estimate_flow(ref, tgt);
    double epe = 0.0;
    int count = 0;
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 80; ++c) {
            if (ref.pixels(r, c) > 0.3) {
                epe += std::hypot(flow.vx(r, c) - 3.0, flow.vy(r, c));
                ++count;
            }
        }
    }
    ASSERT_GT(count, 50);
    EXPECT_LE(epe / count, 0.5);
}

TEST(Flow, GlobalShiftOfTexture) {
    const oracle::Texture tex(11);
    const Frame2D ref = render(64, 80, [&](double r, double c) { return tex(r, c); });
    const Frame2D tgt = render(64, 80, [&](double r, double c) { return tex(r - 2.0, c - 1.0); });
    const FlowField flow = corpca::estimate_flow(ref, tgt);
    std::vector<double> vx;
    std::vector<double> vy;
    for (int r = 8; r < 56; ++r) {
        for (int c = 8; c < 72; ++c) {
            vx.push_back(flow.vx(r, c));
            vy.push_back(flow.vy(r, c));
        }
    }
    EXPECT_NEAR(median(vx), 1.0, 0.3);
    EXPECT_NEAR(median(vy), 2.0, 0.3);
}

TEST(Flow, DeterministicBitwise) {
    const oracle::Texture tex(5);
    const Frame2D ref = render(32, 40, [&](double r, double c) { return tex(r, c); });
    const Frame2D tgt = render(32, 40, [&](double r, double c) { return tex(r, c - 1.5); });
    const FlowField a = corpca::estimate_flow(ref, tgt);
    const FlowField b = corpca::estimate_flow(ref, tgt);
    EXPECT_TRUE(a.vx == b.vx);
    EXPECT_TRUE(a.vy == b.vy);
}

TEST(Flow, PyramidConsistencyUnderDoubling) {
    const oracle::Texture tex(21);
    const double base = 1.5;
    const Frame2D ref = render(32, 40, [&](double r, double c) { return tex(r, c); });
    const Frame2D tgt = render(32, 40, [&](double r, double c) { return tex(r, c - base); });
    const Frame2D ref2 = render(64, 80, [&](double r, double c) { return tex(r / 2.0, c / 2.0); });
    const Frame2D tgt2 = render(64, 80, [&](double r, double c) { return tex(r / 2.0, (c - 2.0 * base) / 2.0); });
    FlowConfig cfg;
    cfg.levels = 2;
    FlowConfig cfg2 = cfg;
    cfg2.levels = 3;
    const FlowField f1 = corpca::estimate_flow(ref, tgt, cfg);
    const FlowField f2 = corpca::estimate_flow(ref2, tgt2, cfg2);
    auto mean_error = [](const FlowField& f, double want, int margin) {
        double e = 0.0;
        int n = 0;
        for (Eigen::Index r = margin; r < f.height() - margin; ++r) {
            for (Eigen::Index c = margin; c < f.width() - margin; ++c) {
                e += std::hypot(f.vx(r, c) - want, f.vy(r, c));
                ++n;
            }
        }
        return e / n;
    };
    const double e1 = mean_error(f1, base, 4);
    const double e2 = mean_error(f2, 2.0 * base, 8);
    EXPECT_LE(e1, 0.5);
    EXPECT_LE(e2, 2.0 * 0.5);
}

TEST(Flow, RejectsBadInputs) {
    const Frame2D a{Image::Zero(16, 16)};
    const Frame2D b{Image::Zero(16, 18)};
    EXPECT_THROW(corpca::estimate_flow(a, b), corpca::InvalidInput);
    const Frame2D tiny{Image::Zero(4, 4)};
    EXPECT_THROW(corpca::estimate_flow(tiny, tiny), corpca::InvalidConfig);
    FlowConfig bad;
    bad.alpha = -1.0;
    EXPECT_THROW(corpca::estimate_flow(a, a, bad), corpca::InvalidConfig);
}

TEST(Compensate, ZeroFlowIsIdentity) {
    const oracle::Texture tex(8);
    const Frame2D f = render(12, 15, [&](double r, double c) { return tex(r, c); });
    const Frame2D g = corpca::compensate(f, FlowField::zero(12, 15), 1.0);
    EXPECT_TRUE(g.pixels == f.pixels);
    EXPECT_TRUE(corpca::compensate(f, FlowField::zero(12, 15), 0.5).pixels == f.pixels);
}

TEST(Compensate, ZeroFlowKeepsSignedValues) {
    Image img = Image::Zero(4, 5);
    img(1, 1) = -0.3;
    img(2, 3) = 1.7;
    img(0, 4) = 2e-9;
    const Frame2D g = corpca::compensate(Frame2D{img}, FlowField::zero(4, 5), 1.0);
    EXPECT_TRUE(g.pixels == img);
}

TEST(Compensate, IntegerShiftRight) {
    const oracle::Texture tex(9);
    const Frame2D f = render(10, 12, [&](double r, double c) { return tex(r, c); });
    FlowField flow = FlowField::zero(10, 12);
    flow.vx.setConstant(2.0);
    const Frame2D g = corpca::compensate(f, flow, 1.0);
    EXPECT_TRUE(g.pixels.leftCols(2).isZero(0.0));
    EXPECT_TRUE(g.pixels.rightCols(10) == f.pixels.leftCols(10));
}

TEST(Compensate, HalfScaleShiftsOnePixel) {
    const oracle::Texture tex(10);
    const Frame2D f = render(10, 12, [&](double r, double c) { return tex(r, c); });
    FlowField flow = FlowField::zero(10, 12);
    flow.vx.setConstant(2.0);
    const Frame2D g = corpca::compensate(f, flow, 0.5);
    EXPECT_TRUE(g.pixels.col(0).isZero(0.0));
    EXPECT_TRUE(g.pixels.rightCols(11) == f.pixels.leftCols(11));
}

TEST(Compensate, ScaleEqualsScaledFlow) {
    const oracle::Texture tex(12);
    const Frame2D f = render(14, 14, [&](double r, double c) { return 0.5 * tex(r, c); });
    FlowField flow = FlowField::zero(14, 14);
    for (int r = 0; r < 14; ++r) {
        for (int c = 0; c < 14; ++c) {
            flow.vx(r, c) = 0.3 * std::sin(0.4 * r) + 1.0;
            flow.vy(r, c) = 0.7 * std::cos(0.3 * c) - 0.5;
        }
    }
    const Frame2D a = corpca::compensate(f, flow, 0.5);
    const Frame2D b = corpca::compensate(f, flow.scaled(0.5), 1.0);
    EXPECT_TRUE(a.pixels == b.pixels);
}

TEST(Compensate, CollisionsSumAndClamp) {
    Image img = Image::Zero(3, 4);
    img(1, 0) = 0.7;
    img(1, 1) = 0.6;
    FlowField flow = FlowField::zero(3, 4);
    flow.vx(1, 0) = 2.0;
    flow.vx(1, 1) = 1.0;
    const Frame2D g = corpca::compensate(Frame2D{img}, flow, 1.0);
    EXPECT_EQ(g.pixels(1, 2), 1.0);
    EXPECT_EQ(g.pixels.sum(), 1.0);
}

TEST(Priors, IdenticalFramesGiveIdenticalPriors) {
    const Frame2D f = block_frame(32, 32, 10, 12, 7);
    const Vector x = f.to_vector();
    const corpca::FlowPriors p = corpca::generate_priors(x, x, x, 32, 32);
    EXPECT_TRUE(p.latest == x);
    EXPECT_TRUE(p.from_previous == x);
    EXPECT_TRUE(p.half_motion == x);
}

TEST(Priors, IdenticalSignedFramesPassThrough) {
    Vector x = block_frame(16, 16, 4, 5, 6).to_vector();
    x(0) = -0.25;
    x(200) = 1.5;
    const corpca::FlowPriors p = corpca::generate_priors(x, x, x, 16, 16);
    EXPECT_TRUE(p.from_previous == x);
    EXPECT_TRUE(p.half_motion == x);
}

TEST(Priors, MovingBlockPredictsNextPosition) {
    // block moving +2 px/frame: x_{t-3}, x_{t-2}, x_{t-1} at left = 8, 10, 12; x_t at 14
    const int size = 8;
    const Frame2D x3 = block_frame(32, 40, 12, 8, size);
    const Frame2D x2 = block_frame(32, 40, 12, 10, size);
    const Frame2D x1 = block_frame(32, 40, 12, 12, size);
    const Frame2D xt = block_frame(32, 40, 12, 14, size);
    const corpca::FlowPriors p = corpca::generate_priors(x1.to_vector(), x2.to_vector(), x3.to_vector(), 32, 40);
    const Eigen::Vector2d want = centroid(xt.pixels);
    const Eigen::Vector2d predicted = centroid(Frame2D::from_vector(p.from_previous, 32, 40).pixels);
    const Eigen::Vector2d lagging = centroid(x2.pixels);
    EXPECT_LE((predicted - want).norm(), 1.0);
    EXPECT_LT((predicted - want).norm(), (lagging - want).norm());
    // half of the t-1 -> t-3 motion (4 px) also lands near the next position
    const Eigen::Vector2d half = centroid(Frame2D::from_vector(p.half_motion, 32, 40).pixels);
    EXPECT_LE((half - want).norm(), 1.0);
}

TEST(Priors, HalfMotionRuleWithStaticOldestFrame) {
    const Frame2D x3 = block_frame(32, 40, 12, 8, 8);
    const Frame2D x2 = block_frame(32, 40, 12, 10, 8);
    const Frame2D x1 = block_frame(32, 40, 12, 12, 8);
    const corpca::FlowPriors p = corpca::generate_priors(x1.to_vector(), x2.to_vector(), x3.to_vector(), 32, 40);
    const FlowField back2 = corpca::estimate_flow(x1, x3);
    const Frame2D manual = corpca::compensate(x1, back2.scaled(-0.5), 1.0);
    EXPECT_TRUE(manual.to_vector() == p.half_motion);
}

TEST(Color, ZeroFlowIsWhite) {
    const corpca::RgbImage img = corpca::flow_to_color(FlowField::zero(5, 6));
    for (std::uint8_t b : img.data) {
        EXPECT_EQ(b, 255);
    }
}

TEST(Color, ConstantFlowIsUniform) {
    FlowField flow = FlowField::zero(4, 4);
    flow.vx.setConstant(1.5);
    const corpca::RgbImage img = corpca::flow_to_color(flow);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            EXPECT_EQ(img.at(r, c), img.at(0, 0));
        }
    }
    EXPECT_NE(img.at(0, 0), (std::array<std::uint8_t, 3>{255, 255, 255}));
}

TEST(Color, OppositeFlowsHaveComplementaryHues) {
    FlowField flow = FlowField::zero(1, 2);
    flow.vx(0, 0) = 1.0;
    flow.vy(0, 0) = 0.5;
    flow.vx(0, 1) = -1.0;
    flow.vy(0, 1) = -0.5;
    const corpca::RgbImage img = corpca::flow_to_color(flow);
    auto hue = [](std::array<std::uint8_t, 3> rgb) {
        const double r = rgb[0] / 255.0;
        const double g = rgb[1] / 255.0;
        const double b = rgb[2] / 255.0;
        return std::atan2(std::sqrt(3.0) * (g - b), 2.0 * r - g - b);
    };
    double diff = std::abs(hue(img.at(0, 0)) - hue(img.at(0, 1)));
    diff = std::min(diff, 2.0 * std::numbers::pi - diff);
    EXPECT_NEAR(diff, std::numbers::pi, 0.05);
}
