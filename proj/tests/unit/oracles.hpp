#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace oracle {

inline double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Inverse normal CDF by bisection.
inline double phi_inv(double p) {
    double lo = -40, hi = 40;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// sup |F_n - Phi| checked on both sides of every jump.
inline double ks_d(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = phi(x[i]);
        d = std::max({d, std::abs((i + 1) / n - f), std::abs(f - i / n)});
    }
    return d;
}

inline std::vector<double> dft_magnitude(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> out;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> s = 0;
        for (std::size_t t = 0; t < n; ++t)
            s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
        out.push_back(std::abs(s));
    }
    return out;
}

/// Brute-force pair counting.
inline double kendall_a(const std::vector<double>& x, const std::vector<double>& y) {
    long c = 0, d = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (i == j) continue;
            const double s = (x[i] - x[j]) * (y[i] - y[j]);
            if (s > 0) ++c;
            if (s < 0) ++d;
        }
    const double n = static_cast<double>(x.size());
    return static_cast<double>(c - d) / 2.0 / (n * (n - 1) / 2);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : x) {
            less += v < x[i];
            equal += v == x[i];
        }
        r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
}

/// Confusion-count metrics for one positive class.
struct Binary {
    double accuracy, precision, recall, f;
};

inline Binary binary_metrics(const std::vector<double>& t, const std::vector<double>& p, double pos) {
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == pos && p[i] == pos) ++tp;
        else if (t[i] != pos && p[i] != pos) ++tn;
        else if (p[i] == pos) ++fp;
        else ++fn;
    }
    Binary b{};
    b.accuracy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) b.accuracy += t[i] == p[i];
    b.accuracy /= static_cast<double>(t.size());
    b.precision = tp + fp > 0 ? tp / (tp + fp) : 0;
    b.recall = tp + fn > 0 ? tp / (tp + fn) : 0;
    b.f = b.precision + b.recall > 0 ? 2 * b.precision * b.recall / (b.precision + b.recall) : 0;
    return b;
}

/// Least squares via 2x2 normal equations: pred = a * truth + b.
inline std::pair<double, double> line_fit(const std::vector<double>& truth, const std::vector<double>& pred) {
    double n = static_cast<double>(truth.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        sx += truth[i];
        sy += pred[i];
        sxx += truth[i] * truth[i];
        sxy += truth[i] * pred[i];
    }
    const double det = n * sxx - sx * sx;
    return {(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

} // namespace oracle
