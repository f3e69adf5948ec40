#include "telesim/stats.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace telesim {

namespace {

void check_pairs(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("paired test needs equal-length samples");
    if (a.empty()) throw InputError("paired test on empty samples");
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    check_pairs(a, b);
    std::vector<double> diff;
    std::vector<double> all;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        all.push_back(d);
        if (d != 0.0) diff.push_back(d);
    }
    TestResult r;
    r.center = median(all);
    r.n = diff.size();
    if (diff.empty()) return r;

    // average ranks of |d|
    std::vector<std::size_t> order(diff.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return std::abs(diff[i]) < std::abs(diff[j]); });
    std::vector<double> rank(diff.size());
    bool ties = false;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        const double t = static_cast<double>(j - i + 1);
        if (t > 1) {
            ties = true;
            tie_term += t * t * t - t;
        }
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double w_plus = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        if (diff[i] > 0) w_plus += rank[i];
    }
    r.statistic = w_plus;
    const std::size_t n = diff.size();

    if (!ties && n <= 25) {
        const std::size_t max_w = n * (n + 1) / 2;
        std::vector<double> count(max_w + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t k = 1; k <= n; ++k) {
            for (std::size_t w = max_w; w >= k; --w) count[w] += count[w - k];
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        const auto w = static_cast<std::size_t>(w_plus);
        double lower = 0.0, upper = 0.0;
        for (std::size_t k = 0; k <= max_w; ++k) {
            if (k <= w) lower += count[k];
            if (k >= w) upper += count[k];
        }
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
        return r;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4.0;
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return r;
    const double dev = std::max(0.0, std::abs(w_plus - mean) - 0.5);
    const boost::math::normal_distribution<double> n01;
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(n01, dev / std::sqrt(var))));
    return r;
}

TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    check_pairs(a, b);
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    TestResult r;
    r.n = n;
    r.center = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    if (n < 2) return r;
    double ss = 0.0;
    for (double v : d) ss += (v - r.center) * (v - r.center);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) {
        r.p_value = r.center == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.statistic = r.center / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))));
    return r;
}

std::string format_p(double p) {
    if (p < 0.001) return "p<0.001";
    char buf[32];
    std::snprintf(buf, sizeof buf, "p=%.3f", p);
    return buf;
}

std::string ComparisonRow::label() const {
    return std::string(display_name(first)) + " vs " + std::string(display_name(second));
}

std::string ComparisonRow::summary() const { return direction + " (" + format_p(test.p_value) + ")"; }

std::vector<ComparisonRow> compare_conditions(const ConditionGroups& groups, PairedTest test, double alpha) {
    if (groups.size() < 2) throw InputError("condition comparison needs at least two groups");
    const std::map<std::uint64_t, double>* reference = nullptr;
    for (const auto& [kind, values] : groups) {
        if (values.empty()) throw InputError("condition group '" + std::string(to_string(kind)) + "' is empty");
        if (reference) {
            const bool same_ids = values.size() == reference->size() &&
                                  std::equal(values.begin(), values.end(), reference->begin(),
                                             [](const auto& x, const auto& y) { return x.first == y.first; });
            if (!same_ids) throw InputError("condition groups are not paired on the same ids");
        }
        reference = &values;
    }

    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < kAllConditions.size(); ++i) {
        for (std::size_t j = i + 1; j < kAllConditions.size(); ++j) {
            const auto a_it = groups.find(kAllConditions[i]);
            const auto b_it = groups.find(kAllConditions[j]);
            if (a_it == groups.end() || b_it == groups.end()) continue;
            std::vector<double> a, b;
            for (const auto& [id, v] : a_it->second) a.push_back(v);
            for (const auto& [id, v] : b_it->second) b.push_back(v);
            ComparisonRow row;
            row.first = kAllConditions[i];
            row.second = kAllConditions[j];
            row.test = test == PairedTest::wilcoxon ? wilcoxon_signed_rank(a, b) : paired_t_test(a, b);
            if (row.test.p_value < alpha && row.test.center != 0.0) {
                row.direction = row.test.center < 0.0 ? "Smaller" : "Larger";
            } else {
                row.direction = "No Difference";
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace telesim
