#ifndef RED_POSTPROC_HPP
#define RED_POSTPROC_HPP

#include <optional>
#include <string>
#include <vector>

#include "red/eds.hpp"
#include "red/refine.hpp"

namespace red {

enum class MethodKind { Classic, Red, Permute, HyperGrid, Refit, SeededGp };

std::string_view method_name(MethodKind kind) noexcept;
std::optional<MethodKind> method_from_name(std::string_view name) noexcept;

struct MethodSpec {
    MethodKind kind = MethodKind::Classic;
    RedConfig red;                // Red
    int permute_n = 0;            // Permute; must be resolved to > 0 before running
    std::vector<GpConfig> grid;   // HyperGrid: default config first, then variants
    GpConfig seeded_gp;           // SeededGp engine configuration

    static MethodSpec classic();
    static MethodSpec red_method(RedConfig config = {});
    static MethodSpec permute(int n);
    /// Default spec grid: the base config plus two variants (larger
    /// population with more mutation; smaller population with stronger
    /// parsimony).
    static MethodSpec hyper_grid(const GpConfig& base);
    static MethodSpec refit();
    static MethodSpec seeded(GpConfig config = {});
};

struct EquationRecord {
    Expression expr;
    double train_mse = 0.0;
    double val_mse = 0.0; // NaN for methods that fold validation into training
    double test_mse = 0.0;
    int operator_count = 0;
};

struct IterationPoint {
    int iteration = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    int operator_count = 0;
};

struct RunResult {
    std::string method;
    std::string dataset_id;
    std::uint64_t seed = 0;
    std::vector<EquationRecord> equations;
    int best = -1; // index of the lowest test MSE, -1 when empty
    double runtime_seconds = 0.0;
    bool completed = false;

    // Filled for refinement runs only.
    int red_iterations = 0;
    double red_initial_val_mse = 0.0;
    double red_final_val_mse = 0.0;
    std::vector<IterationPoint> iteration_curve;

    const EquationRecord& best_equation() const;
};

struct DataSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Runs one post-processing method. Non-Classic methods need `initial` (the
/// Classic output). Methods without a validation concept are fitted on
/// train+val merged; the refinement method keeps the split. `base_seed`
/// derives the per-repetition RNG streams.
RunResult run_method(const MethodSpec& spec, EdsModel& model, const Expression* initial,
                     const DataSplits& splits, std::uint64_t base_seed);

/// Seed for a per-node seeded GP run: the initial tree with the subtree
/// under `node` replaced by a placeholder leaf drawn from the variables and
/// the constant 1 with a per-node RNG stream.
Expression seed_for_node(const Expression& initial, NodeId node, std::size_t variable_count,
                         std::uint64_t seed);

struct WinLoss {
    std::size_t wins = 0;
    std::size_t draws = 0;
    std::size_t losses = 0;

    std::size_t total() const { return wins + draws + losses; }
    double ratio() const {
        return total() == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(total());
    }
};

/// Compares every equation of `a` against every equation of `b` by test
/// MSE. Lower wins; values within 1e-12 of each other draw.
WinLoss count_wins(const RunResult& a, const RunResult& b);

/// wins / (wins + draws + losses) over all pairwise comparisons. Throws
/// EmptyComparison when either side proposed no equation.
double win_ratio(const RunResult& a, const RunResult& b);

} // namespace red

#endif
