#ifndef RED_STATS_HPP
#define RED_STATS_HPP

#include <cstddef>
#include <vector>

namespace red {

/// Quantile with linear interpolation between order statistics
/// (position (n-1)*q). `q` must lie in [0, 1]; the input need not be sorted.
double quantile(std::vector<double> values, double q);

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct WilcoxonResult {
    double statistic = 0.0; // W+ = sum of ranks of positive differences
    double p_value = 1.0;   // two-sided
    std::size_t n = 0;      // non-zero differences
    bool exact = false;     // exact distribution vs normal approximation
};

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped; ties get average ranks. Uses the exact distribution for
/// n <= 25 without ties, a tie-corrected normal approximation otherwise.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

double normal_cdf(double z);

} // namespace red

#endif
