#ifndef RED_REFINE_HPP
#define RED_REFINE_HPP

#include <optional>
#include <vector>

#include "red/eds.hpp"
#include "red/expression.hpp"
#include "red/residual.hpp"

namespace red {

struct RedConfig {
    int max_iterations = 10;     // i_max
    double error_threshold = 0.001; // stop once the validation MSE is this good
    bool record_trace = false;   // keep per-iteration tree snapshots

    void validate() const;
};

/// One refinement iteration: which node was tried, how the candidate scored
/// on validation, and the state of the current equation afterwards.
struct IterationRecord {
    NodeId node = kNoNode;
    double candidate_val_mse = 0.0; // NaN when no candidate was produced
    bool accepted = false;
    double train_mse = 0.0; // of the current tree after the decision
    int operator_count = 0; // of the current tree after the decision
    std::optional<Expression> snapshot; // current tree, with record_trace
};

struct RedTrace {
    std::vector<IterationRecord> iterations;
    double initial_val_mse = 0.0;
    double final_val_mse = 0.0;

    int accepted_count() const {
        int n = 0;
        for (const auto& it : iterations) {
            n += it.accepted ? 1 : 0;
        }
        return n;
    }
};

/// Mean of squared residuals (tree(x) - y)^2 over the dataset. Rows where
/// the tree evaluates to a non-finite value make the MSE infinite, which
/// rejects the equation wherever this score is compared.
double mean_squared_error(const Expression& tree, const Dataset& data);

/// Hands out residual-list nodes in order. After an accepted update the list
/// is rebuilt for the new tree and pruned of the updated node and its
/// ancestors, whose residual problems were already tried.
class RefinementQueue {
public:
    explicit RefinementQueue(const Expression& tree);

    /// Next node to try, or nothing when exhausted.
    std::optional<NodeId> next_node();
    /// Signals that `spliced_root` in `new_tree` replaced the last node.
    void tree_updated(const Expression& new_tree, NodeId spliced_root);

    std::size_t pending() const noexcept { return list_.size() - cursor_; }

private:
    ResidualList list_;
    std::size_t cursor_ = 0;
};

struct RefineResult {
    Expression tree;
    RedTrace trace;
};

/// Iteratively improves `tree`: per residual-list order, compute the
/// residual target on the training set, let the model fit a subtree, splice
/// it in, and keep the result iff the validation MSE strictly improves.
/// Runs until the error threshold is reached, max_iterations passes are
/// spent, or the list is exhausted. Node-level failures (non-invertible
/// paths, too few valid rows, failed fits, external timeouts) consume the
/// iteration and move on. `error_val` is the caller-known validation MSE of
/// `tree`; a stale value is recomputed.
RefineResult red_refine(EdsModel& model, const Expression& tree, const Dataset& train,
                        const Dataset& val, const RedConfig& config, double error_val);

} // namespace red

#endif
