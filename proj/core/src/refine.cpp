#include "red/refine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "red/dataset.hpp"
#include "red/errors.hpp"

namespace red {

void RedConfig::validate() const {
    if (max_iterations < 1) {
        throw std::invalid_argument("max_iterations must be at least 1");
    }
    if (error_threshold < 0.0) {
        throw std::invalid_argument("error_threshold must be non-negative");
    }
}

double mean_squared_error(const Expression& tree, const Dataset& data) {
    if (data.rows() == 0) {
        throw std::invalid_argument("cannot score an equation on an empty dataset");
    }
    const std::vector<double> out = evaluate(tree, data);
    const std::vector<double>& y = data.y();
    double sse = 0.0;
    for (std::size_t r = 0; r < out.size(); ++r) {
        if (!std::isfinite(out[r])) {
            return std::numeric_limits<double>::infinity();
        }
        const double d = out[r] - y[r];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(out.size());
    return std::isfinite(mse) ? mse : std::numeric_limits<double>::infinity();
}

RefinementQueue::RefinementQueue(const Expression& tree) : list_(build_residual_list(tree)) {}

std::optional<NodeId> RefinementQueue::next_node() {
    if (cursor_ >= list_.size()) {
        return std::nullopt;
    }
    return list_[cursor_++];
}

void RefinementQueue::tree_updated(const Expression& new_tree, NodeId spliced_root) {
    list_ = prune_after_update(build_residual_list(new_tree), new_tree, spliced_root);
    cursor_ = 0;
}

RefineResult red_refine(EdsModel& model, const Expression& tree, const Dataset& train,
                        const Dataset& val, const RedConfig& config, double error_val) {
    config.validate();

    RefineResult result;
    result.tree = tree;

    // Trust the caller-supplied score only if it agrees with a fresh one.
    const double actual = mean_squared_error(tree, val);
    if (!(std::abs(actual - error_val) <= 1e-12)) {
        error_val = actual;
    }
    result.trace.initial_val_mse = error_val;

    RefinementQueue queue(result.tree);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    int i = 0;
    while (error_val > config.error_threshold && i < config.max_iterations && queue.pending() > 0) {
        ++i;
        const std::optional<NodeId> node = queue.next_node();
        if (!node.has_value()) {
            break;
        }

        IterationRecord record;
        record.node = *node;
        record.candidate_val_mse = nan;

        try {
            const ResidualTarget residual = compute_residual(result.tree, *node, train);
            const FitOutcome fitted = model.fit(train, FitTarget::from_residual(residual));
            NodeId spliced = kNoNode;
            Expression candidate = replace_subtree(result.tree, *node, fitted.expr, &spliced);
            const double candidate_val = mean_squared_error(candidate, val);
            record.candidate_val_mse = candidate_val;
            if (candidate_val < error_val) {
                error_val = candidate_val;
                result.tree = std::move(candidate);
                queue.tree_updated(result.tree, spliced);
                record.accepted = true;
            }
        } catch (const NotInvertible&) {
        } catch (const AllRowsInvalid&) {
        } catch (const FitFailed&) {
        } catch (const TimeoutError&) {
        } catch (const ProtocolError&) {
        } catch (const SyntaxError&) {
        }
        // Any of the above consumes the iteration and moves to the next node.

        record.train_mse = mean_squared_error(result.tree, train);
        record.operator_count = count_operators(result.tree);
        if (config.record_trace) {
            record.snapshot = result.tree;
        }
        result.trace.iterations.push_back(std::move(record));
    }

    result.trace.final_val_mse = error_val;
    return result;
}

} // namespace red
