#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/expression.hpp"

namespace red {

namespace {

// Recursive descent over:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := atom ('^' factor)?
//   atom   := number | 'x' digits | func '(' expr ')' | '(' expr ')' | '-' factor
// '^' is right-associative and binds tighter than the unary minus, which is
// why '-' takes a whole factor: "-x0^2" reads as -(x0^2). A '-' directly in
// front of a numeric literal folds into a negative constant so that printed
// constants re-parse to the same node.
class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expression parse() {
        NodeId root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("unexpected trailing input", "end of input");
        }
        return Expression::from_pool(pool_, root);
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    std::vector<Node> pool_;

    [[noreturn]] void fail(const std::string& what, std::string expected) {
        throw SyntaxError(what + " at position " + std::to_string(pos_), pos_, std::move(expected));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodeId add(Node n) {
        pool_.push_back(n);
        return static_cast<NodeId>(pool_.size() - 1);
    }

    NodeId add_binary(NodeOp op, NodeId c0, NodeId c1) {
        Node n;
        n.op = op;
        n.child = {c0, c1};
        return add(n);
    }

    NodeId add_constant(double v) {
        Node n;
        n.op = NodeOp::Constant;
        n.value = v;
        return add(n);
    }

    NodeId parse_expr() {
        struct DepthGuard {
            int& d;
            explicit DepthGuard(int& depth) : d(depth) { ++d; }
            ~DepthGuard() { --d; }
        } guard(depth_);
        if (depth_ > 400) {
            fail("expression nested too deeply", "shallower expression");
        }

        NodeId lhs = parse_term();
        while (true) {
            if (eat('+')) {
                lhs = add_binary(NodeOp::Plus, lhs, parse_term());
            } else if (eat('-')) {
                lhs = add_binary(NodeOp::Minus, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    NodeId parse_term() {
        NodeId lhs = parse_factor();
        while (true) {
            if (eat('*')) {
                lhs = add_binary(NodeOp::Product, lhs, parse_factor());
            } else if (eat('/')) {
                lhs = add_binary(NodeOp::Division, lhs, parse_factor());
            } else {
                return lhs;
            }
        }
    }

    NodeId parse_factor() {
        NodeId base = parse_atom();
        if (eat('^')) {
            NodeId exponent = parse_factor(); // right-associative
            return add_binary(NodeOp::Power, exponent, base);
        }
        return base;
    }

    NodeId parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("unexpected end of input", "number, variable, function or '('");
        }
        const char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            NodeId inner = parse_expr();
            if (!eat(')')) {
                fail("unbalanced parenthesis", "')'");
            }
            return inner;
        }
        if (c == '-') {
            ++pos_;
            const std::size_t operand_start = pool_.size();
            NodeId operand = parse_factor();
            // Fold '-literal' into a negative constant node.
            if (pool_.size() == operand_start + 1 && pool_.back().op == NodeOp::Constant) {
                pool_.back().value = -pool_.back().value;
                return operand;
            }
            return add_binary(NodeOp::Minus, add_constant(0.0), operand);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return parse_identifier();
        }
        fail(std::string("unexpected character '") + c + "'", "number, variable, function or '('");
    }

    NodeId parse_number() {
        double value = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{}) {
            fail("malformed number", "numeric literal");
        }
        pos_ += static_cast<std::size_t>(ptr - begin);
        return add_constant(value);
    }

    NodeId parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view ident = text_.substr(start, pos_ - start);

        if (ident.size() >= 2 && ident[0] == 'x') {
            bool all_digits = true;
            for (std::size_t i = 1; i < ident.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(ident[i]))) {
                    all_digits = false;
                    break;
                }
            }
            if (all_digits) {
                std::int32_t index = 0;
                std::from_chars(ident.data() + 1, ident.data() + ident.size(), index);
                Node n;
                n.op = NodeOp::Variable;
                n.variable = index;
                return add(n);
            }
        }

        NodeOp op;
        if (ident == "sin") {
            op = NodeOp::Sine;
        } else if (ident == "cos") {
            op = NodeOp::Cosine;
        } else if (ident == "ln") {
            op = NodeOp::Logarithm;
        } else if (ident == "exp") {
            op = NodeOp::Exponential;
        } else if (ident == "sqrt") {
            op = NodeOp::SquareRoot;
        } else {
            pos_ = start;
            throw UnknownSymbol("unknown symbol '" + std::string(ident) + "' at position " +
                                    std::to_string(start),
                                start, std::string(ident));
        }

        if (!eat('(')) {
            fail("expected argument list after function name", "'('");
        }
        NodeId arg = parse_expr();
        if (!eat(')')) {
            fail("unbalanced parenthesis in function call", "')'");
        }
        Node n;
        n.op = op;
        n.child = {arg, kNoNode};
        return add(n);
    }
};

} // namespace

Expression parse_expression(std::string_view text) {
    Parser parser(text);
    return parser.parse();
}

} // namespace red
