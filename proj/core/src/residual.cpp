#include "red/residual.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "red/dataset.hpp"
#include "red/errors.hpp"

namespace red {

namespace {

inline double guarded(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

} // namespace

std::vector<double> invert_step(NodeOp kind, Caller caller, const std::vector<double>& parent_values,
                                const std::vector<double>* sibling_values) {
    if (kind == NodeOp::Sine || kind == NodeOp::Cosine) {
        throw NotInvertible(std::string(node_op_name(kind)) + " is not invertible");
    }
    if (is_leaf(kind)) {
        throw NotApplicable(std::string(node_op_name(kind)) + " has no children asking for values");
    }
    if (is_binary(kind) && sibling_values == nullptr) {
        throw std::logic_error("binary inversion needs the sibling's forward values");
    }
    if (sibling_values != nullptr && sibling_values->size() != parent_values.size()) {
        throw std::logic_error("operand lengths differ");
    }

    const std::size_t rows = parent_values.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> out(rows);

    for (std::size_t r = 0; r < rows; ++r) {
        const double p = parent_values[r];
        const double s = sibling_values != nullptr ? (*sibling_values)[r] : 0.0;
        if (!std::isfinite(p) || (sibling_values != nullptr && !std::isfinite(s))) {
            out[r] = nan;
            continue;
        }
        double v = nan;
        switch (kind) {
        case NodeOp::Plus:
            v = p - s;
            break;
        case NodeOp::Minus:
            v = (caller == Caller::Child0) ? p + s : s - p;
            break;
        case NodeOp::Product:
            v = p / s;
            break;
        case NodeOp::Division:
            if (caller == Caller::Child0) {
                // c0 = p * c1; a zero divisor admits no consistent numerator.
                v = (s == 0.0) ? nan : p * s;
            } else {
                // c1 = c0 / p; with c0 = 0 the quotient is 0 regardless of c1.
                v = (s == 0.0) ? nan : s / p;
            }
            break;
        case NodeOp::Power:
            if (caller == Caller::Child0) {
                // exponent = ln(p) / ln(base); real-domain guards.
                v = (p <= 0.0 || s <= 0.0 || s == 1.0) ? nan : std::log(p) / std::log(s);
            } else {
                // base = p ^ (1 / exponent); exponent 0 pins the power to 1.
                if (s != 0.0) {
                    v = std::pow(p, 1.0 / s);
                    if (p < 0.0 && std::isfinite(v)) {
                        // A negative demand only survives if the round trip
                        // really lands on p (1/exponent may alias to an even
                        // integer and flip the sign).
                        const double forward = std::pow(v, s);
                        if (!(std::abs(forward - p) <= 1e-9 * std::max(1.0, std::abs(p)))) {
                            v = nan;
                        }
                    }
                }
            }
            break;
        case NodeOp::Logarithm:
            v = std::exp(p);
            break;
        case NodeOp::Exponential:
            v = std::log(p);
            break;
        case NodeOp::SquareRoot:
            // sqrt never yields negatives, so negative demands are unmet.
            v = (p < 0.0) ? nan : p * p;
            break;
        case NodeOp::Y:
            v = p;
            break;
        default:
            break;
        }
        out[r] = guarded(v);
    }
    return out;
}

ResidualList build_residual_list(const Expression& tree) {
    ResidualList list;
    const std::size_t n = tree.node_count();
    if (n <= 2) {
        return list; // only Y and its child
    }
    std::vector<bool> blocked(n, false);
    // BFS ids grow downward, so a forward pass sees parents first.
    for (std::size_t i = 2; i < n; ++i) {
        const Node& node = tree.node(static_cast<NodeId>(i));
        const Node& parent = tree.node(node.parent);
        const bool parent_blocks = parent.op == NodeOp::Sine || parent.op == NodeOp::Cosine;
        blocked[i] = blocked[static_cast<std::size_t>(node.parent)] || parent_blocks;
        if (!blocked[i]) {
            list.push_back(static_cast<NodeId>(i));
        }
    }
    return list;
}

ResidualList prune_after_update(const ResidualList& list, const Expression& tree_new,
                                NodeId last_updated) {
    tree_new.node(last_updated); // throws NodeNotFound
    std::unordered_set<NodeId> removed;
    NodeId cur = last_updated;
    while (cur != kNoNode) {
        removed.insert(cur);
        cur = tree_new.node(cur).parent;
    }
    ResidualList out;
    out.reserve(list.size());
    for (NodeId id : list) {
        if (!removed.contains(id)) {
            out.push_back(id);
        }
    }
    return out;
}

ResidualTarget compute_residual(const Expression& tree, NodeId node, const Dataset& data,
                                ResidualStats* stats) {
    const Node& target_node = tree.node(node); // throws NodeNotFound
    if (target_node.op == NodeOp::Y) {
        throw NotApplicable("the Y node has no residual");
    }
    if (target_node.parent == tree.root()) {
        throw NotApplicable("the residual of the root's child is the original problem");
    }

    // Path from the body's root down to `node`.
    std::vector<NodeId> path;
    for (NodeId cur = node; cur != 0; cur = tree.node(cur).parent) {
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const NodeOp op = tree.node(path[i]).op;
        if (op == NodeOp::Sine || op == NodeOp::Cosine) {
            throw NotInvertible("the path to the root crosses " + std::string(node_op_name(op)));
        }
    }

    // One forward pass over the whole tree; sibling columns come from here.
    EvalCounter counter;
    const auto columns = evaluate_all_nodes(tree, data, nullptr, &counter);
    if (stats != nullptr) {
        stats->node_evaluations = counter.node_evaluations;
    }

    // Walk down: the demand on the body root is y itself.
    std::vector<double> demand = invert_step(NodeOp::Y, Caller::Child0, data.y());
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const Node& ancestor = tree.node(path[i]);
        const NodeId toward = path[i + 1];
        const Caller caller = (ancestor.child[0] == toward) ? Caller::Child0 : Caller::Child1;
        const std::vector<double>* sibling = nullptr;
        if (is_binary(ancestor.op)) {
            const NodeId other = (caller == Caller::Child0) ? ancestor.child[1] : ancestor.child[0];
            sibling = &columns[static_cast<std::size_t>(other)];
        }
        demand = invert_step(ancestor.op, caller, demand, sibling);
    }

    ResidualTarget out;
    out.values = std::move(demand);
    out.valid.resize(out.values.size());
    for (std::size_t r = 0; r < out.values.size(); ++r) {
        out.valid[r] = std::isfinite(out.values[r]);
    }
    out.source_node = node;

    if (out.valid_count() < kMinValidResidualRows) {
        throw AllRowsInvalid("only " + std::to_string(out.valid_count()) +
                             " rows have a defined residual (need " +
                             std::to_string(kMinValidResidualRows) + ")");
    }
    return out;
}

} // namespace red
