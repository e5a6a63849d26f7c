#ifndef RED_RESIDUAL_HPP
#define RED_RESIDUAL_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "red/expression.hpp"

namespace red {

class Dataset;

/// Fewest valid rows a residual must keep to be a usable fitting target.
inline constexpr std::size_t kMinValidResidualRows = 10;

/// Per-row target values a subexpression must produce for the whole tree to
/// reproduce y, together with a validity mask. Rows whose inversion is
/// undefined are masked out instead of failing the node.
struct ResidualTarget {
    std::vector<double> values;
    std::vector<bool> valid;
    NodeId source_node = kNoNode;

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (bool b : valid) {
            n += b ? 1 : 0;
        }
        return n;
    }
};

/// Identifies which child of an operator asks for its required value.
enum class Caller : int { Child0 = 0, Child1 = 1 };

/// One inversion step of the caller-dependent node calculus. `parent_values`
/// holds what the node itself must produce; `sibling_values` the forward
/// value of the other child (binary operators only). Returns what the
/// calling child must produce; rows without a real-valued answer become NaN.
/// For the Y kind the demand is the y column, which the caller passes in as
/// `parent_values`. Throws NotInvertible for sine/cosine and NotApplicable
/// for leaves.
std::vector<double> invert_step(NodeOp kind, Caller caller, const std::vector<double>& parent_values,
                                const std::vector<double>* sibling_values = nullptr);

/// Ordered node ids eligible for residual computation on one tree: BFS
/// order, skipping the Y node, its direct child, and every node whose path
/// to the root crosses a non-invertible operator.
using ResidualList = std::vector<NodeId>;

ResidualList build_residual_list(const Expression& tree);

/// Removes `last_updated` and all of its ancestors from the list; their
/// residual problems are unchanged by the update and were already tried.
ResidualList prune_after_update(const ResidualList& list, const Expression& tree_new,
                                NodeId last_updated);

struct ResidualStats {
    std::size_t node_evaluations = 0;
};

/// Computes the residual target for `node` by evaluating the tree once and
/// walking the path from the root down to the node, inverting each operator
/// along the way. Costs one forward evaluation per tree node.
/// Throws NotInvertible when the path crosses sine/cosine and AllRowsInvalid
/// when fewer than kMinValidResidualRows rows survive the mask.
ResidualTarget compute_residual(const Expression& tree, NodeId node, const Dataset& data,
                                ResidualStats* stats = nullptr);

} // namespace red

#endif
