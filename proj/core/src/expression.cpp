#include "red/expression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "red/dataset.hpp"
#include "red/errors.hpp"

namespace red {

std::string_view node_op_name(NodeOp op) noexcept {
    switch (op) {
    case NodeOp::Plus: return "plus";
    case NodeOp::Minus: return "minus";
    case NodeOp::Product: return "product";
    case NodeOp::Division: return "division";
    case NodeOp::Power: return "power";
    case NodeOp::Logarithm: return "ln";
    case NodeOp::Exponential: return "exp";
    case NodeOp::Sine: return "sin";
    case NodeOp::Cosine: return "cos";
    case NodeOp::SquareRoot: return "sqrt";
    case NodeOp::Constant: return "constant";
    case NodeOp::Variable: return "variable";
    case NodeOp::Y: return "Y";
    }
    return "?";
}

const Node& Expression::node(NodeId id) const {
    if (!contains(id)) {
        throw NodeNotFound("node id " + std::to_string(id) + " does not resolve");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Expression Expression::from_pool(const std::vector<Node>& pool, NodeId root) {
    if (root < 0 || static_cast<std::size_t>(root) >= pool.size()) {
        throw NodeNotFound("root id does not resolve in pool");
    }

    Expression out;
    std::deque<std::pair<NodeId, NodeId>> queue; // (pool id, parent id in out)

    if (pool[static_cast<std::size_t>(root)].op == NodeOp::Y) {
        queue.emplace_back(pool[static_cast<std::size_t>(root)].child[0], kNoNode);
    } else {
        queue.emplace_back(root, kNoNode);
    }

    Node y;
    y.op = NodeOp::Y;
    out.nodes_.push_back(y);
    // Fix up: the body becomes node 1, child of the Y root.
    bool first = true;
    while (!queue.empty()) {
        auto [pool_id, parent] = queue.front();
        queue.pop_front();
        const Node& src = pool.at(static_cast<std::size_t>(pool_id));
        if (src.op == NodeOp::Y) {
            throw std::logic_error("nested Y node in pool");
        }

        Node copy = src;
        copy.parent = first ? 0 : parent;
        copy.child = {kNoNode, kNoNode};
        NodeId new_id = static_cast<NodeId>(out.nodes_.size());
        out.nodes_.push_back(copy);
        if (first) {
            out.nodes_[0].child[0] = new_id;
            first = false;
        } else {
            Node& p = out.nodes_[static_cast<std::size_t>(parent)];
            if (p.child[0] == kNoNode) {
                p.child[0] = new_id;
            } else {
                p.child[1] = new_id;
            }
        }
        for (int c = 0; c < src.child_count(); ++c) {
            queue.emplace_back(src.child[static_cast<std::size_t>(c)], new_id);
        }
    }
    return out;
}

Expression Expression::constant(double value) {
    Node n;
    n.op = NodeOp::Constant;
    n.value = value;
    return from_pool({n}, 0);
}

Expression Expression::variable(std::int32_t index) {
    Node n;
    n.op = NodeOp::Variable;
    n.variable = index;
    return from_pool({n}, 0);
}

int Expression::depth_of(NodeId id) const {
    const Node& n = node(id);
    int best = 0;
    for (int c = 0; c < n.child_count(); ++c) {
        best = std::max(best, 1 + depth_of(n.child[static_cast<std::size_t>(c)]));
    }
    return best;
}

int Expression::depth() const { return depth_of(body()); }

std::vector<NodeId> Expression::subtree_ids(NodeId id) const {
    node(id); // bounds check
    std::vector<NodeId> ids;
    std::deque<NodeId> queue{id};
    while (!queue.empty()) {
        NodeId cur = queue.front();
        queue.pop_front();
        ids.push_back(cur);
        const Node& n = nodes_[static_cast<std::size_t>(cur)];
        for (int c = 0; c < n.child_count(); ++c) {
            queue.push_back(n.child[static_cast<std::size_t>(c)]);
        }
    }
    return ids;
}

Expression Expression::subtree(NodeId id) const {
    node(id);
    if (nodes_[static_cast<std::size_t>(id)].op == NodeOp::Y) {
        return *this;
    }
    return from_pool(nodes_, id);
}

std::vector<NodeId> Expression::constant_nodes() const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].op == NodeOp::Constant) {
            out.push_back(static_cast<NodeId>(i));
        }
    }
    return out;
}

std::int32_t Expression::max_variable() const {
    std::int32_t best = -1;
    for (const Node& n : nodes_) {
        if (n.op == NodeOp::Variable) {
            best = std::max(best, n.variable);
        }
    }
    return best;
}

bool Expression::operator==(const Expression& other) const noexcept {
    if (nodes_.size() != other.nodes_.size()) {
        return false;
    }
    // Both trees are BFS-normalized, so structural equality reduces to a
    // node-by-node comparison.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& a = nodes_[i];
        const Node& b = other.nodes_[i];
        if (a.op != b.op || a.parent != b.parent || a.child != b.child) {
            return false;
        }
        if (a.op == NodeOp::Constant && a.value != b.value) {
            return false;
        }
        if (a.op == NodeOp::Variable && a.variable != b.variable) {
            return false;
        }
    }
    return true;
}

Expression Expression::with_constants(const std::vector<double>& values) const {
    Expression out = *this;
    std::size_t next = 0;
    for (Node& n : out.nodes_) {
        if (n.op == NodeOp::Constant) {
            if (next >= values.size()) {
                throw std::logic_error("constant value count mismatch");
            }
            n.value = values[next++];
        }
    }
    if (next != values.size()) {
        throw std::logic_error("constant value count mismatch");
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf, ptr);
}

int count_operators(const Expression& expr) {
    int count = 0;
    for (const Node& n : expr.nodes()) {
        if (is_operator(n.op)) {
            ++count;
        }
    }
    return count;
}

namespace {

// Printer precedence levels; larger binds tighter. NegativeConstant sits
// between multiplicative and power, mirroring how the grammar reaches the
// unary minus (term -> factor -> atom -> '-' factor).
enum Precedence : int {
    kAdditive = 1,
    kMultiplicative = 2,
    kNegativeConstant = 3,
    kPower = 4,
    kAtom = 5,
};

int precedence_of(const Expression& e, NodeId id) {
    const Node& n = e.node(id);
    switch (n.op) {
    case NodeOp::Plus:
    case NodeOp::Minus:
        return kAdditive;
    case NodeOp::Product:
    case NodeOp::Division:
        return kMultiplicative;
    case NodeOp::Power:
        return kPower;
    case NodeOp::Constant:
        return n.value < 0 ? kNegativeConstant : kAtom;
    default:
        return kAtom;
    }
}

void print_node(const Expression& e, NodeId id, std::string& out);

void print_child(const Expression& e, NodeId id, int min_precedence, std::string& out) {
    bool parens = precedence_of(e, id) < min_precedence;
    if (parens) {
        out.push_back('(');
    }
    print_node(e, id, out);
    if (parens) {
        out.push_back(')');
    }
}

void print_node(const Expression& e, NodeId id, std::string& out) {
    const Node& n = e.node(id);
    switch (n.op) {
    case NodeOp::Plus:
    case NodeOp::Minus:
        print_child(e, n.child[0], kAdditive, out);
        out += (n.op == NodeOp::Plus) ? " + " : " - ";
        print_child(e, n.child[1], kAdditive + 1, out);
        break;
    case NodeOp::Product:
    case NodeOp::Division:
        print_child(e, n.child[0], kMultiplicative, out);
        out += (n.op == NodeOp::Product) ? " * " : " / ";
        print_child(e, n.child[1], kMultiplicative + 1, out);
        break;
    case NodeOp::Power:
        // Printed base ^ exponent; child 0 stores the exponent.
        print_child(e, n.child[1], kPower + 1, out);
        out += " ^ ";
        print_child(e, n.child[0], kNegativeConstant, out);
        break;
    case NodeOp::Logarithm:
    case NodeOp::Exponential:
    case NodeOp::Sine:
    case NodeOp::Cosine:
    case NodeOp::SquareRoot:
        out += node_op_name(n.op);
        out.push_back('(');
        print_node(e, n.child[0], out);
        out.push_back(')');
        break;
    case NodeOp::Constant:
        out += format_double(n.value);
        break;
    case NodeOp::Variable:
        out.push_back('x');
        out += std::to_string(n.variable);
        break;
    case NodeOp::Y:
        print_node(e, n.child[0], out);
        break;
    }
}

} // namespace

std::string print_expression(const Expression& expr) {
    std::string out;
    print_node(expr, expr.root(), out);
    return out;
}

std::vector<std::vector<double>> evaluate_all_nodes(const Expression& expr, const Dataset& data,
                                                    const EvalOverride* override_col,
                                                    EvalCounter* counter) {
    const std::int32_t max_var = expr.max_variable();
    if (max_var >= static_cast<std::int32_t>(data.x_count())) {
        throw VariableOutOfRange("expression uses x" + std::to_string(max_var) + " but dataset has " +
                                 std::to_string(data.x_count()) + " independent columns");
    }

    const std::size_t rows = data.rows();
    const std::size_t n = expr.node_count();
    std::vector<std::vector<double>> columns(n);

    // BFS ids guarantee children have larger ids than their parent, so a
    // reverse pass evaluates bottom-up without recursion.
    for (std::size_t idx = n; idx-- > 0;) {
        const NodeId id = static_cast<NodeId>(idx);
        const Node& node = expr.node(id);
        std::vector<double>& out = columns[idx];

        if (override_col != nullptr && override_col->node == id) {
            out = *override_col->values;
            continue;
        }
        if (counter != nullptr) {
            ++counter->node_evaluations;
        }

        switch (node.op) {
        case NodeOp::Constant:
            out.assign(rows, node.value);
            break;
        case NodeOp::Variable:
            out = data.x(static_cast<std::size_t>(node.variable));
            break;
        case NodeOp::Y:
            out = columns[static_cast<std::size_t>(node.child[0])];
            break;
        case NodeOp::Logarithm:
        case NodeOp::Exponential:
        case NodeOp::Sine:
        case NodeOp::Cosine:
        case NodeOp::SquareRoot: {
            const auto& a = columns[static_cast<std::size_t>(node.child[0])];
            out.resize(rows);
            switch (node.op) {
            case NodeOp::Logarithm:
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::log(a[r]);
                break;
            case NodeOp::Exponential:
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::exp(a[r]);
                break;
            case NodeOp::Sine:
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::sin(a[r]);
                break;
            case NodeOp::Cosine:
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::cos(a[r]);
                break;
            default:
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::sqrt(a[r]);
                break;
            }
            break;
        }
        default: {
            const auto& a = columns[static_cast<std::size_t>(node.child[0])];
            const auto& b = columns[static_cast<std::size_t>(node.child[1])];
            out.resize(rows);
            switch (node.op) {
            case NodeOp::Plus:
                for (std::size_t r = 0; r < rows; ++r) out[r] = a[r] + b[r];
                break;
            case NodeOp::Minus:
                for (std::size_t r = 0; r < rows; ++r) out[r] = a[r] - b[r];
                break;
            case NodeOp::Product:
                for (std::size_t r = 0; r < rows; ++r) out[r] = a[r] * b[r];
                break;
            case NodeOp::Division:
                for (std::size_t r = 0; r < rows; ++r) out[r] = a[r] / b[r];
                break;
            default: // Power: base is child 1, exponent child 0
                for (std::size_t r = 0; r < rows; ++r) out[r] = std::pow(b[r], a[r]);
                break;
            }
            break;
        }
        }
    }
    return columns;
}

std::vector<double> evaluate(const Expression& expr, const Dataset& data) {
    auto columns = evaluate_all_nodes(expr, data);
    return std::move(columns[0]);
}

Expression replace_subtree(const Expression& tree, NodeId node, const Expression& subtree,
                           NodeId* spliced_root) {
    const Node& target = tree.node(node); // throws NodeNotFound
    if (target.op == NodeOp::Y) {
        throw CannotReplaceRoot("the Y root cannot be replaced");
    }

    // Merge both node vectors into one pool; subtree ids are shifted past
    // the original tree's, and the parent of `node` is repointed at the
    // subtree body.
    std::vector<Node> pool = tree.nodes();
    const NodeId offset = static_cast<NodeId>(pool.size());
    for (const Node& n : subtree.nodes()) {
        Node copy = n;
        for (int c = 0; c < copy.child_count(); ++c) {
            copy.child[static_cast<std::size_t>(c)] += offset;
        }
        pool.push_back(copy);
    }
    const NodeId sub_body = subtree.body() + offset;

    const NodeId parent = target.parent;
    Node& p = pool[static_cast<std::size_t>(parent)];
    for (int c = 0; c < p.child_count(); ++c) {
        if (p.child[static_cast<std::size_t>(c)] == node) {
            p.child[static_cast<std::size_t>(c)] = sub_body;
            break;
        }
    }

    Expression out = Expression::from_pool(pool, 0);

    if (spliced_root != nullptr) {
        // Recover the new id of the splice point by walking the same
        // child-index path from the root in the new tree.
        std::vector<int> path;
        NodeId walker = node;
        while (walker != 0) {
            const NodeId par = tree.node(walker).parent;
            const Node& pn = tree.node(par);
            for (int c = 0; c < pn.child_count(); ++c) {
                if (pn.child[static_cast<std::size_t>(c)] == walker) {
                    path.push_back(c);
                    break;
                }
            }
            walker = par;
        }
        std::reverse(path.begin(), path.end());
        NodeId pos = 0;
        for (int c : path) {
            pos = out.node(pos).child[static_cast<std::size_t>(c)];
        }
        *spliced_root = pos;
    }
    return out;
}

} // namespace red
