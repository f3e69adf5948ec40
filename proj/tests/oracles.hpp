#pragma once

// Independent reference implementations used by the tests. Each one is
// written from the textbook definition, not from the library code.

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// Panda arm in modified DH form (Craig): Rx(alpha) Tx(a) Rz(theta) Tz(d) per
// joint, then the flange offset and the hand with its TCP.
inline Eigen::Isometry3d panda_dh_fk(const Eigen::Matrix<double, 7, 1>& q) {
    using std::numbers::pi;
    const double a[7] = {0, 0, 0, 0.0825, -0.0825, 0, 0.088};
    const double d[7] = {0.333, 0, 0.316, 0, 0.384, 0, 0};
    const double alpha[7] = {0, -pi / 2, pi / 2, pi / 2, -pi / 2, pi / 2, pi / 2};
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    for (int i = 0; i < 7; ++i) {
        t = t * Eigen::AngleAxisd(alpha[i], Eigen::Vector3d::UnitX()) * Eigen::Translation3d(a[i], 0, 0) *
            Eigen::AngleAxisd(q[i], Eigen::Vector3d::UnitZ()) * Eigen::Translation3d(0, 0, d[i]);
    }
    t = t * Eigen::Translation3d(0, 0, 0.107);
    t = t * Eigen::AngleAxisd(-pi / 4, Eigen::Vector3d::UnitZ()) * Eigen::Translation3d(0, 0, 0.1034);
    return t;
}

// Delay line as a flat list: every event is stamped with its due time and the
// whole list is sorted once.
struct Stamped {
    int channel;
    std::int64_t emit;
    std::int64_t due;
    std::uint64_t seq;
};

inline std::vector<Stamped> sorted_delivery(std::vector<Stamped> events) {
    std::stable_sort(events.begin(), events.end(), [](const Stamped& x, const Stamped& y) {
        return x.due != y.due ? x.due < y.due : x.seq < y.seq;
    });
    return events;
}

inline double planar_distance(double x1, double y1, double x2, double y2) {
    const double dx = x1 - x2, dy = y1 - y2;
    return std::sqrt(dx * dx + dy * dy);
}

inline double luminance(double r, double g, double b) { return std::sqrt(0.299 * r * r + 0.587 * g * g + 0.114 * b * b); }

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Windowed median / MAD outlier replacement, recomputed from scratch at every index.
inline std::vector<double> hampel(const std::vector<double>& x, std::size_t k, double n_sigma) {
    std::vector<double> out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i])) continue;
        std::vector<double> w;
        const std::size_t lo = i >= k ? i - k : 0;
        const std::size_t hi = std::min(x.size() - 1, i + k);
        for (std::size_t j = lo; j <= hi; ++j) {
            if (!std::isnan(x[j])) w.push_back(x[j]);
        }
        const double med = median_of(w);
        std::vector<double> dev;
        for (double v : w) dev.push_back(std::abs(v - med));
        const double mad = 1.4826 * median_of(dev);
        if (std::abs(x[i] - med) > n_sigma * mad) out[i] = med;
    }
    return out;
}

// Standard normal quantile by bisection on the CDF.
inline double normal_quantile(double p) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
        (cdf < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Lag maximizing the plain cross-correlation of two centered sequences.
inline long best_lag(const std::vector<double>& x, const std::vector<double>& ref, long max_lag) {
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double e : v) s += e;
        return s / static_cast<double>(v.size());
    };
    const double mx = mean(x), mr = mean(ref);
    long best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (long lag = -max_lag; lag <= max_lag; ++lag) {
        double s = 0;
        long n = 0;
        for (long i = 0; i < static_cast<long>(ref.size()); ++i) {
            const long j = i + lag;
            if (j < 0 || j >= static_cast<long>(x.size())) continue;
            s += (x[static_cast<std::size_t>(j)] - mx) * (ref[static_cast<std::size_t>(i)] - mr);
            ++n;
        }
        if (n > 0 && s / n > best_score) {
            best_score = s / n;
            best = lag;
        }
    }
    return best;
}

// Two-sided exact signed-rank p-value by enumerating all 2^n sign patterns.
inline double wilcoxon_exact_p(const std::vector<double>& diffs) {
    std::vector<double> d;
    for (double v : diffs) {
        if (v != 0.0) d.push_back(v);
    }
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[order[i]] = static_cast<double>(i + 1);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0) w_plus += rank[i];
    }
    const double total = static_cast<double>(n * (n + 1)) / 2.0;
    const double observed = std::min(w_plus, total - w_plus);
    std::uint64_t extreme = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1u) w += static_cast<double>(i + 1);
        }
        if (std::min(w, total - w) <= observed + 1e-9) ++extreme;
    }
    return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
}

// Two-sided Student t p-value by Simpson integration of the density.
inline double t_two_sided_p(double t, double dof) {
    const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
    const double x = std::abs(t);
    const int steps = 200000;
    const double h = x / steps;
    double s = pdf(0) + pdf(x);
    for (int i = 1; i < steps; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
    const double central = s * h / 3.0; // P(0 < T < x)
    return std::clamp(1.0 - 2.0 * central, 0.0, 1.0);
}

} // namespace oracle
