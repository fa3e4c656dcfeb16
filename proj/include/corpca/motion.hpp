#pragma once

// Motion estimation (coarse-to-fine Horn-Schunck) and forward motion
// compensation used to build motion-aligned foreground priors.

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

namespace corpca {

using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Grayscale frame with intensities in [0, 1].
struct Frame2D {
    Image pixels;

    Eigen::Index height() const { return pixels.rows(); }
    Eigen::Index width() const { return pixels.cols(); }

    /// Row-major reshape of a frame vector, clamped to [0, 1].
    static Frame2D from_vector(const Vector& v, Eigen::Index height, Eigen::Index width) {
        if (height <= 0 || width <= 0 || v.size() != height * width) {
            throw InvalidInput("Frame2D: vector length does not match height*width");
        }
        Frame2D f;
        f.pixels = Eigen::Map<const Image>(v.data(), height, width).cwiseMax(0.0).cwiseMin(1.0);
        return f;
    }

    Vector to_vector() const { return Eigen::Map<const Vector>(pixels.data(), pixels.size()); }
};

/// Per-pixel displacement (vx horizontal, vy vertical) in pixels.
struct FlowField {
    Image vx;
    Image vy;

    static FlowField zero(Eigen::Index height, Eigen::Index width) {
        return {Image::Zero(height, width), Image::Zero(height, width)};
    }

    Eigen::Index height() const { return vx.rows(); }
    Eigen::Index width() const { return vx.cols(); }

    FlowField scaled(double s) const { return {s * vx, s * vy}; }
};

struct FlowConfig {
    int levels = 3;
    double alpha = 15.0;
    int warp_iters = 5;
    int jacobi_iters = 100;
    /// Intensities are multiplied by this before estimation, so alpha is on an 8-bit scale.
    double intensity_scale = 255.0;

    void validate() const {
        if (levels < 1 || warp_iters < 1 || jacobi_iters < 1 || !(alpha > 0.0) || !(intensity_scale > 0.0)) {
            throw InvalidConfig("FlowConfig: levels, iterations, alpha and intensity_scale must be positive");
        }
    }
};

namespace detail {

inline Eigen::Index clamp_index(Eigen::Index i, Eigen::Index size) { return std::clamp<Eigen::Index>(i, 0, size - 1); }

// Separable 5-tap binomial blur with replicated borders.
inline Image binomial_blur(const Image& in) {
    constexpr std::array<double, 5> taps{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const Eigen::Index h = in.rows();
    const Eigen::Index w = in.cols();
    Image tmp(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) {
                acc += taps[static_cast<std::size_t>(k + 2)] * in(r, clamp_index(c + k, w));
            }
            tmp(r, c) = acc;
        }
    }
    Image out(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) {
                acc += taps[static_cast<std::size_t>(k + 2)] * tmp(clamp_index(r + k, h), c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

// Blur then average 2x2 blocks; coarse pixel i is centred between fine 2i and 2i+1.
inline Image downsample(const Image& in) {
    const Image b = binomial_blur(in);
    const Eigen::Index h = in.rows() / 2;
    const Eigen::Index w = in.cols() / 2;
    Image out(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            out(r, c) = 0.25 * (b(2 * r, 2 * c) + b(2 * r, 2 * c + 1) + b(2 * r + 1, 2 * c) + b(2 * r + 1, 2 * c + 1));
        }
    }
    return out;
}

// Bilinear sample at real coordinates with replicated borders.
inline double sample(const Image& img, double row, double col) {
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    row = std::clamp(row, 0.0, static_cast<double>(h - 1));
    col = std::clamp(col, 0.0, static_cast<double>(w - 1));
    const auto r0 = static_cast<Eigen::Index>(std::floor(row));
    const auto c0 = static_cast<Eigen::Index>(std::floor(col));
    const Eigen::Index r1 = std::min(r0 + 1, h - 1);
    const Eigen::Index c1 = std::min(c0 + 1, w - 1);
    const double fr = row - static_cast<double>(r0);
    const double fc = col - static_cast<double>(c0);
    const double top = (1.0 - fc) * img(r0, c0) + fc * img(r0, c1);
    const double bottom = (1.0 - fc) * img(r1, c0) + fc * img(r1, c1);
    return (1.0 - fr) * top + fr * bottom;
}

// Resample a flow component to (h, w) by pixel-centre mapping, scaling values by `gain`.
inline Image resize_bilinear(const Image& in, Eigen::Index h, Eigen::Index w, double gain) {
    const double sr = static_cast<double>(in.rows()) / static_cast<double>(h);
    const double sc = static_cast<double>(in.cols()) / static_cast<double>(w);
    Image out(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            out(r, c) = gain * sample(in, (static_cast<double>(r) + 0.5) * sr - 0.5, (static_cast<double>(c) + 0.5) * sc - 0.5);
        }
    }
    return out;
}

// Central differences with replicated borders.
inline void gradients(const Image& img, Image& gx, Image& gy) {
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    gx.resize(h, w);
    gy.resize(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            gx(r, c) = 0.5 * (img(r, clamp_index(c + 1, w)) - img(r, clamp_index(c - 1, w)));
            gy(r, c) = 0.5 * (img(clamp_index(r + 1, h), c) - img(clamp_index(r - 1, h), c));
        }
    }
}

// Four-neighbour mean with replicated borders.
inline double neighbour_mean(const Image& f, Eigen::Index r, Eigen::Index c) {
    const Eigen::Index h = f.rows();
    const Eigen::Index w = f.cols();
    return 0.25 * (f(clamp_index(r - 1, h), c) + f(clamp_index(r + 1, h), c) + f(r, clamp_index(c - 1, w)) +
                   f(r, clamp_index(c + 1, w)));
}

// One pyramid level: warp, linearize, Jacobi-solve the Horn-Schunck system.
inline void refine_level(const Image& reference, const Image& target, FlowField& flow, const FlowConfig& cfg) {
    const Eigen::Index h = reference.rows();
    const Eigen::Index w = reference.cols();
    const double alpha2 = cfg.alpha * cfg.alpha;
    Image rx, ry, wx, wy;
    gradients(reference, rx, ry);

    for (int warp = 0; warp < cfg.warp_iters; ++warp) {
        Image warped(h, w);
        for (Eigen::Index r = 0; r < h; ++r) {
            for (Eigen::Index c = 0; c < w; ++c) {
                warped(r, c) = sample(target, static_cast<double>(r) + flow.vy(r, c), static_cast<double>(c) + flow.vx(r, c));
            }
        }
        gradients(warped, wx, wy);
        const Image ix = 0.5 * (rx + wx);
        const Image iy = 0.5 * (ry + wy);
        const Image it = warped - reference;
        const Image u0 = flow.vx;
        const Image v0 = flow.vy;

        Image u = u0;
        Image v = v0;
        Image un(h, w), vn(h, w);
        for (int iter = 0; iter < cfg.jacobi_iters; ++iter) {
            for (Eigen::Index r = 0; r < h; ++r) {
                for (Eigen::Index c = 0; c < w; ++c) {
                    const double ub = neighbour_mean(u, r, c);
                    const double vb = neighbour_mean(v, r, c);
                    const double gx = ix(r, c);
                    const double gy = iy(r, c);
                    const double residual = gx * (ub - u0(r, c)) + gy * (vb - v0(r, c)) + it(r, c);
                    const double k = residual / (alpha2 + gx * gx + gy * gy);
                    un(r, c) = ub - gx * k;
                    vn(r, c) = vb - gy * k;
                }
            }
            u.swap(un);
            v.swap(vn);
        }
        flow.vx = u;
        flow.vy = v;
    }
}

} // namespace detail

/// Flow from `reference` to `target`: target(p + flow(p)) ~ reference(p).
/// Coarse-to-fine Horn-Schunck with fixed iteration counts (deterministic).
inline FlowField estimate_flow(const Frame2D& reference, const Frame2D& target, const FlowConfig& cfg = {}) {
    cfg.validate();
    if (reference.height() != target.height() || reference.width() != target.width()) {
        throw InvalidInput("estimate_flow: frame dimensions differ");
    }
    const Eigen::Index minimum = Eigen::Index{1} << cfg.levels;
    if (reference.height() < minimum || reference.width() < minimum) {
        throw InvalidConfig("estimate_flow: frames smaller than 2^levels");
    }

    std::vector<Image> ref_pyr{cfg.intensity_scale * reference.pixels};
    std::vector<Image> tgt_pyr{cfg.intensity_scale * target.pixels};
    for (int level = 1; level < cfg.levels; ++level) {
        ref_pyr.push_back(detail::downsample(ref_pyr.back()));
        tgt_pyr.push_back(detail::downsample(tgt_pyr.back()));
    }

    FlowField flow = FlowField::zero(ref_pyr.back().rows(), ref_pyr.back().cols());
    for (int level = cfg.levels - 1; level >= 0; --level) {
        const Image& ref = ref_pyr[static_cast<std::size_t>(level)];
        const Image& tgt = tgt_pyr[static_cast<std::size_t>(level)];
        if (flow.height() != ref.rows() || flow.width() != ref.cols()) {
            const double gain_x = static_cast<double>(ref.cols()) / static_cast<double>(flow.width());
            const double gain_y = static_cast<double>(ref.rows()) / static_cast<double>(flow.height());
            flow = FlowField{detail::resize_bilinear(flow.vx, ref.rows(), ref.cols(), gain_x),
                             detail::resize_bilinear(flow.vy, ref.rows(), ref.cols(), gain_y)};
        }
        detail::refine_level(ref, tgt, flow, cfg);
    }
    return flow;
}

/// Forward-warps `source` by scale*flow with separable linear splatting.
/// Contributions landing on one pixel are summed, then clamped to the wider of
/// [0, 1] and the source's own range. Pixels that receive nothing stay 0.
inline Frame2D compensate(const Frame2D& source, const FlowField& flow, double scale = 1.0) {
    if (flow.height() != source.height() || flow.width() != source.width()) {
        throw InvalidInput("compensate: flow dimensions differ from the frame");
    }
    if (!(scale > 0.0)) {
        throw InvalidInput("compensate: scale must be positive");
    }
    const Eigen::Index h = source.height();
    const Eigen::Index w = source.width();
    Image out = Image::Zero(h, w);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            const double value = source.pixels(r, c);
            if (value == 0.0) {
                continue;
            }
            const double dr = static_cast<double>(r) + scale * flow.vy(r, c);
            const double dc = static_cast<double>(c) + scale * flow.vx(r, c);
            const double fr = std::floor(dr);
            const double fc = std::floor(dc);
            const double ar = dr - fr;
            const double ac = dc - fc;
            const std::array<double, 2> row_w{1.0 - ar, ar};
            const std::array<double, 2> col_w{1.0 - ac, ac};
            for (int i = 0; i < 2; ++i) {
                const double rr = fr + i;
                if (row_w[static_cast<std::size_t>(i)] == 0.0 || rr < 0.0 || rr >= static_cast<double>(h)) {
                    continue;
                }
                for (int j = 0; j < 2; ++j) {
                    const double cc = fc + j;
                    if (col_w[static_cast<std::size_t>(j)] == 0.0 || cc < 0.0 || cc >= static_cast<double>(w)) {
                        continue;
                    }
                    out(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(cc)) +=
                        value * row_w[static_cast<std::size_t>(i)] * col_w[static_cast<std::size_t>(j)];
                }
            }
        }
    }
    const double lo = std::min(0.0, source.pixels.minCoeff());
    const double hi = std::max(1.0, source.pixels.maxCoeff());
    return Frame2D{out.cwiseMax(lo).cwiseMin(hi)};
}

/// Motion-aligned priors from the three latest foregrounds (newest first).
struct FlowPriors {
    Vector latest;        // x'_{t-1} = x_{t-1}
    Vector from_previous; // x_{t-1} pushed along the t-2 -> t-1 motion
    Vector half_motion;   // x_{t-1} pushed along half the t-3 -> t-1 motion
};

inline FlowPriors generate_priors(const Vector& x_prev1, const Vector& x_prev2, const Vector& x_prev3,
                                  Eigen::Index height, Eigen::Index width, const FlowConfig& cfg = {}) {
    if (x_prev1.size() != x_prev2.size() || x_prev1.size() != x_prev3.size()) {
        throw InvalidInput("generate_priors: frame lengths differ");
    }
    const Frame2D f1 = Frame2D::from_vector(x_prev1, height, width);
    const Frame2D f2 = Frame2D::from_vector(x_prev2, height, width);
    const Frame2D f3 = Frame2D::from_vector(x_prev3, height, width);
    // Both fields live on x_{t-1}'s grid and point backwards in time, so the
    // forward prediction pushes x_{t-1} along their negation. Flow sees the
    // clamped frames; the warp carries the raw values.
    const FlowField back1 = estimate_flow(f1, f2, cfg);
    const FlowField back2 = estimate_flow(f1, f3, cfg);
    const Frame2D raw{Eigen::Map<const Image>(x_prev1.data(), height, width)};
    return FlowPriors{x_prev1, compensate(raw, back1.scaled(-1.0), 1.0).to_vector(),
                      compensate(raw, back2.scaled(-1.0), 0.5).to_vector()};
}

/// 8-bit RGB raster, row-major interleaved.
struct RgbImage {
    Eigen::Index height = 0;
    Eigen::Index width = 0;
    std::vector<std::uint8_t> data;

    std::array<std::uint8_t, 3> at(Eigen::Index r, Eigen::Index c) const {
        const auto i = static_cast<std::size_t>(3 * (r * width + c));
        return {data[i], data[i + 1], data[i + 2]};
    }
};

/// Hue = direction, saturation = magnitude / 95th-percentile magnitude, value = 1.
inline RgbImage flow_to_color(const FlowField& flow) {
    RgbImage img;
    img.height = flow.height();
    img.width = flow.width();
    const Eigen::Index count = img.height * img.width;
    img.data.resize(static_cast<std::size_t>(3 * count));

    std::vector<double> magnitude(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
        magnitude[static_cast<std::size_t>(i)] = std::hypot(flow.vx.data()[i], flow.vy.data()[i]);
    }
    double reference = 0.0;
    if (count > 0) {
        std::vector<double> sorted = magnitude;
        const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(count))) - 1;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
        reference = sorted[rank];
    }
    for (Eigen::Index i = 0; i < count; ++i) {
        const double sat = reference > 0.0 ? std::min(magnitude[static_cast<std::size_t>(i)] / reference, 1.0) : 0.0;
        double hue = std::atan2(flow.vy.data()[i], flow.vx.data()[i]) * 180.0 / std::numbers::pi;
        if (hue < 0.0) {
            hue += 360.0;
        }
        // HSV -> RGB with V = 1
        const double sector = hue / 60.0;
        const double frac = sector - std::floor(sector);
        const double p = 1.0 - sat;
        const double q = 1.0 - sat * frac;
        const double t = 1.0 - sat * (1.0 - frac);
        std::array<double, 3> rgb{};
        switch (static_cast<int>(std::floor(sector)) % 6) {
        case 0: rgb = {1.0, t, p}; break;
        case 1: rgb = {q, 1.0, p}; break;
        case 2: rgb = {p, 1.0, t}; break;
        case 3: rgb = {p, q, 1.0}; break;
        case 4: rgb = {t, p, 1.0}; break;
        default: rgb = {1.0, p, q}; break;
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
            img.data[static_cast<std::size_t>(3 * i) + ch] = static_cast<std::uint8_t>(std::lround(255.0 * rgb[ch]));
        }
    }
    return img;
}

} // namespace corpca
