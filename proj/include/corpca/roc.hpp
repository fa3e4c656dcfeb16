#pragma once

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

namespace corpca {

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Points ordered by decreasing threshold, hence nondecreasing TPR/FPR.
struct RocCurve {
    std::vector<RocPoint> points;

    /// Trapezoidal area under TPR(FPR), anchored at (0, 0) and (1, 1).
    double area() const {
        double total = 0.0;
        double px = 0.0;
        double py = 0.0;
        for (const RocPoint& p : points) {
            total += 0.5 * (p.fpr - px) * (p.tpr + py);
            px = p.fpr;
            py = p.tpr;
        }
        total += 0.5 * (1.0 - px) * (1.0 + py);
        return total;
    }
};

/// `count` log-spaced thresholds from max|x| down to `low`, descending.
inline std::vector<double> default_thresholds(const std::vector<Vector>& recovered, int count = 64, double low = 1e-4) {
    double high = low;
    for (const Vector& x : recovered) {
        if (x.size() > 0) {
            high = std::max(high, x.cwiseAbs().maxCoeff());
        }
    }
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double frac = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
        t[static_cast<std::size_t>(i)] = std::exp(std::log(high) + frac * (std::log(low) - std::log(high)));
    }
    t.front() = high;
    t.back() = low;
    for (std::size_t i = 1; i < t.size(); ++i) {
        t[i] = std::min(t[i], t[i - 1]); // exp(log(.)) may round upwards when high ~ low
    }
    return t;
}

/// Pooled-pixel ROC: predicted support {i : |x_i| >= threshold} against the masks.
inline RocCurve evaluate_roc(const std::vector<Vector>& recovered, const std::vector<Vector>& masks,
                             const std::vector<double>& thresholds) {
    if (recovered.size() != masks.size() || recovered.empty()) {
        throw InvalidInput("evaluate_roc: recovered and mask counts differ");
    }
    if (!std::is_sorted(thresholds.begin(), thresholds.end(), std::greater<>())) {
        throw InvalidInput("evaluate_roc: thresholds must be sorted descending");
    }
    double positives = 0.0;
    double negatives = 0.0;
    for (std::size_t f = 0; f < masks.size(); ++f) {
        if (masks[f].size() != recovered[f].size()) {
            throw InvalidInput("evaluate_roc: frame and mask sizes differ");
        }
        const double p = (masks[f].array() != 0.0).count();
        positives += p;
        negatives += static_cast<double>(masks[f].size()) - p;
    }
    if (positives == 0.0) {
        throw InvalidInput("evaluate_roc: ground truth has an empty support");
    }
    RocCurve curve;
    for (double theta : thresholds) {
        double tp = 0.0;
        double fp = 0.0;
        for (std::size_t f = 0; f < masks.size(); ++f) {
            const auto predicted = recovered[f].array().abs() >= theta;
            const auto truth = masks[f].array() != 0.0;
            tp += (predicted && truth).count();
            fp += (predicted && !truth).count();
        }
        curve.points.push_back({theta, tp / positives, negatives > 0.0 ? fp / negatives : 0.0});
    }
    return curve;
}

/// F1 of the support {|x_i| >= threshold} against a 0/1 mask (1 when both are empty).
inline double support_f1(const Vector& recovered, const Vector& mask, double threshold) {
    const auto predicted = recovered.array().abs() >= threshold;
    const auto truth = mask.array() != 0.0;
    const double tp = (predicted && truth).count();
    const double pred = predicted.count();
    const double actual = truth.count();
    if (pred + actual == 0.0) {
        return 1.0;
    }
    return 2.0 * tp / (pred + actual);
}

/// CSV with header "threshold,tpr,fpr", 9 significant digits.
inline void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << "threshold,tpr,fpr\n";
    char line[96];
    for (const RocPoint& p : curve.points) {
        std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", p.threshold, p.tpr, p.fpr);
        out << line;
    }
}

} // namespace corpca
