#ifndef RED_EXPRESSION_HPP
#define RED_EXPRESSION_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace red {

class Dataset;

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Node kinds of an equation syntax tree. Binary operators take two
/// children, functions one, leaves none. Y is the synthetic root added above
/// the equation body; it stands for the dependent column of a dataset.
enum class NodeOp : std::uint8_t {
    Plus,
    Minus,
    Product,
    Division,
    Power, // child 0 is the exponent, child 1 the base: value = c1 ^ c0
    Logarithm,
    Exponential,
    Sine,
    Cosine,
    SquareRoot,
    Constant,
    Variable,
    Y,
};

constexpr int arity(NodeOp op) noexcept {
    switch (op) {
    case NodeOp::Plus:
    case NodeOp::Minus:
    case NodeOp::Product:
    case NodeOp::Division:
    case NodeOp::Power:
        return 2;
    case NodeOp::Logarithm:
    case NodeOp::Exponential:
    case NodeOp::Sine:
    case NodeOp::Cosine:
    case NodeOp::SquareRoot:
    case NodeOp::Y:
        return 1;
    case NodeOp::Constant:
    case NodeOp::Variable:
        return 0;
    }
    return 0;
}

constexpr bool is_leaf(NodeOp op) noexcept { return arity(op) == 0; }
constexpr bool is_binary(NodeOp op) noexcept { return arity(op) == 2; }
constexpr bool is_unary_function(NodeOp op) noexcept { return arity(op) == 1 && op != NodeOp::Y; }
/// True for every node that counts as a mathematical operator (all non-leaf
/// kinds except the synthetic Y root).
constexpr bool is_operator(NodeOp op) noexcept { return !is_leaf(op) && op != NodeOp::Y; }

std::string_view node_op_name(NodeOp op) noexcept;

struct Node {
    NodeOp op = NodeOp::Constant;
    double value = 0.0;        // payload for Constant
    std::int32_t variable = 0; // payload for Variable
    NodeId parent = kNoNode;
    std::array<NodeId, 2> child{kNoNode, kNoNode};

    int child_count() const noexcept { return arity(op); }
};

/// An equation as an immutable syntax tree.
///
/// Nodes are stored in breadth-first order: id 0 is always the Y root, id 1
/// its single child (the equation body), and children always carry larger
/// ids than their parent. Every structural edit returns a new Expression
/// with freshly assigned breadth-first ids.
class Expression {
public:
    Expression() = default;

    /// Wraps a bare value / variable / operator tree given as a node pool.
    /// The pool may be in any order; ids are normalized to BFS. `root` must
    /// denote the body (a Y node is added on top if the root is not Y).
    static Expression from_pool(const std::vector<Node>& pool, NodeId root);

    static Expression constant(double value);
    static Expression variable(std::int32_t index);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const Node& node(NodeId id) const;
    bool contains(NodeId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < nodes_.size();
    }

    NodeId root() const noexcept { return 0; }
    /// Id of the equation body (the single child of the Y root).
    NodeId body() const { return nodes_.at(0).child[0]; }

    /// Number of nodes on the longest path from the body to a leaf, counted
    /// in edges. A single leaf has depth 0.
    int depth() const;
    int depth_of(NodeId id) const;

    /// Ids of the subtree rooted at `id`, in BFS order starting with `id`.
    std::vector<NodeId> subtree_ids(NodeId id) const;

    /// Extracts the subtree rooted at `id` as a standalone Expression
    /// (with its own Y root).
    Expression subtree(NodeId id) const;

    /// Indices of all Constant nodes, in id order.
    std::vector<NodeId> constant_nodes() const;
    /// Largest variable index used, or -1 if the tree has no variables.
    std::int32_t max_variable() const;

    bool operator==(const Expression& other) const noexcept;
    bool operator!=(const Expression& other) const noexcept { return !(*this == other); }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Returns a copy with the Constant node values replaced in id order.
    Expression with_constants(const std::vector<double>& values) const;

private:
    friend Expression replace_subtree(const Expression&, NodeId, const Expression&, NodeId*);
    std::vector<Node> nodes_;
};

/// Parses an equation in the toolkit grammar (infix, `^` right-associative,
/// function-call syntax for sin/cos/ln/exp/sqrt) and wraps it under a Y
/// root. Throws SyntaxError / UnknownSymbol on malformed input.
Expression parse_expression(std::string_view text);

/// Prints the canonical form: minimal parentheses, one space around binary
/// operators, constants in shortest round-trip notation. The result parses
/// back to a structurally identical tree.
std::string print_expression(const Expression& expr);

/// Formats a double with the shortest representation that round-trips.
std::string format_double(double v);

/// Counts mathematical operator nodes (all non-leaf nodes except Y).
int count_operators(const Expression& expr);

/// Zero-based evaluation counter used to verify cost bounds in tests.
struct EvalCounter {
    std::size_t node_evaluations = 0;
};

/// Per-node column override: evaluation of `node` is skipped and `values`
/// used as its output instead.
struct EvalOverride {
    NodeId node = kNoNode;
    const std::vector<double>* values = nullptr;
};

/// Evaluates the tree over every row of the dataset. Rows that hit a domain
/// violation (division by zero, log of a non-positive value, non-real
/// powers, overflow) yield a non-finite marker instead of aborting.
/// Throws VariableOutOfRange before evaluating anything if the tree uses a
/// variable the dataset does not have.
std::vector<double> evaluate(const Expression& expr, const Dataset& data);

/// Evaluation returning one value column per node (indexed by NodeId).
/// This is the workhorse behind residual computation: it touches every node
/// exactly once.
std::vector<std::vector<double>> evaluate_all_nodes(const Expression& expr, const Dataset& data,
                                                    const EvalOverride* override_col = nullptr,
                                                    EvalCounter* counter = nullptr);

/// Returns a new Expression where the subtree rooted at `node` is replaced
/// by the body of `subtree` (its Y root is stripped). Ids are reassigned in
/// BFS order; `spliced_root`, when given, receives the new id of the splice
/// point. Throws NodeNotFound / CannotReplaceRoot.
Expression replace_subtree(const Expression& tree, NodeId node, const Expression& subtree,
                           NodeId* spliced_root = nullptr);

} // namespace red

#endif
