#ifndef RED_TESTS_HELPERS_HPP
#define RED_TESTS_HELPERS_HPP

#include <cmath>
#include <random>
#include <vector>

#include "red/dataset.hpp"
#include "red/expression.hpp"
#include "red/residual.hpp"

namespace red::testing {

inline Dataset make_dataset(std::vector<std::vector<double>> x_columns, std::vector<double> y) {
    return Dataset(std::move(x_columns), std::move(y));
}

/// Uniform draw from +-[lo, hi].
inline double signed_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> mag(lo, hi);
    const double v = mag(rng);
    return (rng() & 1u) ? v : -v;
}

/// Random syntax trees plus datasets for the substitution-soundness
/// properties. Trees and data are screened so forward values stay tame:
/// unbounded magnitudes make any fixed-precision round-trip claim vacuous.
struct RandomTreeGen {
    std::mt19937_64 rng;
    int max_depth = 5;
    std::size_t rows = 100;
    std::size_t variables = 3;
    double magnitude_cap = 50.0;

    explicit RandomTreeGen(std::uint64_t seed) : rng(seed) {}

    NodeOp random_op() {
        // Arithmetic dominates; transcendentals and power appear but less
        // often, mirroring how benchmark equations are built.
        static const NodeOp ops[] = {NodeOp::Plus,      NodeOp::Plus,    NodeOp::Minus,
                                     NodeOp::Minus,     NodeOp::Product, NodeOp::Product,
                                     NodeOp::Division,  NodeOp::Power,   NodeOp::Logarithm,
                                     NodeOp::Exponential, NodeOp::Sine,  NodeOp::Cosine,
                                     NodeOp::SquareRoot};
        return ops[std::uniform_int_distribution<std::size_t>(0, std::size(ops) - 1)(rng)];
    }

    NodeId grow(std::vector<Node>& pool, int depth) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (depth <= 0 || unit(rng) < 0.25) {
            Node leaf;
            if (unit(rng) < 0.4) {
                leaf.op = NodeOp::Constant;
                leaf.value = signed_uniform(rng, 0.3, 3.0);
            } else {
                leaf.op = NodeOp::Variable;
                leaf.variable = static_cast<std::int32_t>(
                    std::uniform_int_distribution<std::size_t>(0, variables - 1)(rng));
            }
            pool.push_back(leaf);
            return static_cast<NodeId>(pool.size() - 1);
        }
        Node n;
        n.op = random_op();
        n.child[0] = grow(pool, depth - 1);
        if (is_binary(n.op)) {
            n.child[1] = grow(pool, depth - 1);
        }
        pool.push_back(n);
        return static_cast<NodeId>(pool.size() - 1);
    }

    Expression tree() {
        std::vector<Node> pool;
        const int depth = std::uniform_int_distribution<int>(1, max_depth)(rng);
        const NodeId root = grow(pool, depth);
        return Expression::from_pool(pool, root);
    }

    Dataset dataset() {
        std::vector<std::vector<double>> xs(variables, std::vector<double>(rows));
        std::vector<double> ys(rows);
        for (std::size_t c = 0; c < variables; ++c) {
            for (std::size_t r = 0; r < rows; ++r) {
                xs[c][r] = signed_uniform(rng, 0.3, 3.0);
            }
        }
        for (std::size_t r = 0; r < rows; ++r) {
            ys[r] = signed_uniform(rng, 0.5, 5.0);
        }
        return Dataset(std::move(xs), std::move(ys));
    }

    /// True when every finite forward value of every node stays within the
    /// magnitude cap and at least 60% of the root rows are finite.
    bool tame(const Expression& expr, const Dataset& data) {
        const auto columns = evaluate_all_nodes(expr, data);
        std::size_t finite_root = 0;
        for (double v : columns[0]) {
            finite_root += std::isfinite(v) ? 1 : 0;
        }
        if (finite_root * 10 < data.rows() * 6) {
            return false;
        }
        for (const auto& col : columns) {
            for (double v : col) {
                if (std::isfinite(v) && std::abs(v) > magnitude_cap) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Draws a (tree, dataset) pair with a non-empty residual list that
    /// passes the tameness screen.
    std::pair<Expression, Dataset> sample() {
        while (true) {
            Expression t = tree();
            if (build_residual_list(t).empty()) {
                continue;
            }
            Dataset d = dataset();
            if (tame(t, d)) {
                return {std::move(t), std::move(d)};
            }
        }
    }
};

} // namespace red::testing

#endif
