#pragma once

#include "telesim/condition.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace telesim {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;      // pairs with a nonzero difference (Wilcoxon) or all pairs (t)
    double center = 0.0;    // median (Wilcoxon) or mean (t) of a - b
};

/// Two-sided Wilcoxon signed-rank test on a - b. Zero differences are dropped;
/// exact null distribution up to 25 nonzero pairs without ties, normal
/// approximation with tie correction otherwise.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Two-sided paired t-test on a - b.
TestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class PairedTest { wilcoxon, t };

struct ComparisonRow {
    ConditionKind first = ConditionKind::control;
    ConditionKind second = ConditionKind::control;
    TestResult test;
    std::string direction; // "Smaller", "Larger" or "No Difference", for `first`

    std::string label() const;  // "Anchoring vs Synchronous"
    std::string summary() const; // "Smaller (p=0.009)"
};

/// Per-condition metric values keyed by pairing id (subject or seed).
using ConditionGroups = std::map<ConditionKind, std::map<std::uint64_t, double>>;

/// Pairwise paired comparisons in table order (Control, Anchoring,
/// Asynchronous, Synchronous). Throws InputError with fewer than two groups,
/// an empty group, or groups whose pairing ids differ.
std::vector<ComparisonRow> compare_conditions(const ConditionGroups& groups, PairedTest test = PairedTest::wilcoxon,
                                              double alpha = 0.05);

std::string format_p(double p);

} // namespace telesim
