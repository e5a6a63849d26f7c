#include "red/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace red {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    if (q < 0.0 || q > 1.0) {
        throw std::invalid_argument("quantile level outside [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    const double frac = pos - static_cast<double>(lo);
    const double low = values[lo];
    const double high = values[lo + 1];
    if (frac == 0.0 || low == high) {
        return low; // also keeps interpolation between infinities sane
    }
    return low + frac * (high - low);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("paired samples must have equal length");
    }
    std::vector<double> diffs;
    diffs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) {
            diffs.push_back(d);
        }
    }

    WilcoxonResult res;
    res.n = diffs.size();
    if (diffs.empty()) {
        res.p_value = 1.0;
        return res;
    }

    // Rank |d| ascending with average ranks for ties.
    std::vector<std::size_t> order(diffs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return std::abs(diffs[i]) < std::abs(diffs[j]);
    });

    std::vector<double> ranks(diffs.size(), 0.0);
    bool has_ties = false;
    double tie_term = 0.0; // sum of t^3 - t over tie groups
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
            ++j;
        }
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg_rank;
        }
        if (j > i) {
            has_ties = true;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }

    double w_plus = 0.0;
    for (std::size_t k = 0; k < diffs.size(); ++k) {
        if (diffs[k] > 0.0) {
            w_plus += ranks[k];
        }
    }
    res.statistic = w_plus;

    const std::size_t n = diffs.size();
    if (n <= 25 && !has_ties) {
        // Exact null distribution of W+ over all 2^n sign patterns, built by
        // dynamic programming over integer ranks 1..n.
        const std::size_t max_sum = n * (n + 1) / 2;
        std::vector<double> counts(max_sum + 1, 0.0);
        counts[0] = 1.0;
        for (std::size_t r = 1; r <= n; ++r) {
            for (std::size_t s = max_sum + 1; s-- > r;) {
                counts[s] += counts[s - r];
            }
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        const auto w = static_cast<std::size_t>(std::llround(w_plus));
        double le = 0.0;
        double ge = 0.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (s <= w) le += counts[s];
            if (s >= w) ge += counts[s];
        }
        res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total);
        res.exact = true;
    } else {
        const double nd = static_cast<double>(n);
        const double mean = nd * (nd + 1.0) / 4.0;
        const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0.0) {
            res.p_value = 1.0;
            return res;
        }
        // Continuity correction toward the mean.
        double z = w_plus - mean;
        z -= (z > 0.0) ? 0.5 : (z < 0.0 ? -0.5 : 0.0);
        z /= std::sqrt(var);
        res.p_value = std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
    }
    return res;
}

} // namespace red
