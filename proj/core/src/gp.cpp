#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "red/eds.hpp"
#include "red/errors.hpp"

namespace red {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    // splitmix64 finalizer over the combined state.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::string_view salt) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char c : salt) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix_seed(base, h);
}

FitTarget FitTarget::from_column(const std::vector<double>& y) {
    FitTarget t;
    t.values = y;
    t.valid.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        t.valid[i] = std::isfinite(y[i]);
    }
    return t;
}

FitTarget FitTarget::from_residual(const ResidualTarget& residual) {
    FitTarget t;
    t.values = residual.values;
    t.valid = residual.valid;
    return t;
}

std::vector<NodeOp> GpConfig::default_operator_set() {
    return {NodeOp::Plus,   NodeOp::Minus,       NodeOp::Product, NodeOp::Division, NodeOp::Sine,
            NodeOp::Cosine, NodeOp::Exponential, NodeOp::Logarithm, NodeOp::SquareRoot};
}

void GpConfig::validate() const {
    if (population_size < 2 || generations < 1 || tournament_size < 1 || max_depth < 1) {
        throw std::invalid_argument("population, generations, tournament and depth must be positive");
    }
    if (crossover_prob < 0.0 || mutation_prob < 0.0 || crossover_prob + mutation_prob > 1.0) {
        throw std::invalid_argument("crossover_prob + mutation_prob must stay within [0, 1]");
    }
    if (population_size < 2 * tournament_size) {
        throw std::invalid_argument("population_size must be at least twice the tournament size");
    }
    if (parsimony_coefficient < 0.0) {
        throw std::invalid_argument("parsimony_coefficient must be non-negative");
    }
    if (operator_set.empty()) {
        throw std::invalid_argument("operator_set must not be empty");
    }
    for (NodeOp op : operator_set) {
        if (!is_operator(op)) {
            throw std::invalid_argument("operator_set may only contain operator kinds");
        }
    }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kConstLow = -5.0;
constexpr double kConstHigh = 5.0;
constexpr double kTerminalConstProb = 0.3;
constexpr double kConstantJitterProb = 0.2;
constexpr double kEarlyStopMse = 1e-12;

struct OpSplit {
    std::vector<NodeOp> binary;
    std::vector<NodeOp> unary;
};

OpSplit split_ops(const std::vector<NodeOp>& ops) {
    OpSplit s;
    for (NodeOp op : ops) {
        (is_binary(op) ? s.binary : s.unary).push_back(op);
    }
    return s;
}

Node random_terminal(std::size_t variable_count, std::mt19937_64& rng) {
    Node n;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (variable_count == 0 || unit(rng) < kTerminalConstProb) {
        n.op = NodeOp::Constant;
        n.value = std::uniform_real_distribution<double>(kConstLow, kConstHigh)(rng);
    } else {
        n.op = NodeOp::Variable;
        n.variable = static_cast<std::int32_t>(
            std::uniform_int_distribution<std::size_t>(0, variable_count - 1)(rng));
    }
    return n;
}

// Builds a random subtree into `pool`, returning its root id. With
// `full_method` every branch reaches exactly `depth`; otherwise leaves may
// appear early.
NodeId grow_tree(std::vector<Node>& pool, const OpSplit& ops, int depth, bool full_method,
                 std::size_t variable_count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool make_leaf = depth <= 0 || (!full_method && unit(rng) < 0.3);
    if (make_leaf) {
        pool.push_back(random_terminal(variable_count, rng));
        return static_cast<NodeId>(pool.size() - 1);
    }

    const std::size_t total = ops.binary.size() + ops.unary.size();
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    Node n;
    if (pick < ops.binary.size()) {
        n.op = ops.binary[pick];
        NodeId c0 = grow_tree(pool, ops, depth - 1, full_method, variable_count, rng);
        NodeId c1 = grow_tree(pool, ops, depth - 1, full_method, variable_count, rng);
        n.child = {c0, c1};
    } else {
        n.op = ops.unary[pick - ops.binary.size()];
        NodeId c0 = grow_tree(pool, ops, depth - 1, full_method, variable_count, rng);
        n.child = {c0, kNoNode};
    }
    pool.push_back(n);
    return static_cast<NodeId>(pool.size() - 1);
}

Expression random_expression(const OpSplit& ops, int depth, bool full_method,
                             std::size_t variable_count, std::mt19937_64& rng) {
    std::vector<Node> pool;
    NodeId root = grow_tree(pool, ops, depth, full_method, variable_count, rng);
    return Expression::from_pool(pool, root);
}

struct Individual {
    Expression expr;
    double mse = kInf;
    double fitness = kInf;
    std::size_t invalid_rows = 0; // valid-target rows the candidate breaks on
};

} // namespace

Expression truncate_to_depth(const Expression& expr, int max_depth, std::size_t variable_count,
                             std::mt19937_64& rng) {
    if (expr.depth() <= max_depth) {
        return expr;
    }
    std::vector<Node> pool = expr.nodes();
    // Walk from the body marking depths; operators at the limit become
    // random leaves.
    std::vector<int> depth(pool.size(), 0);
    for (std::size_t i = 1; i < pool.size(); ++i) {
        const NodeId parent = pool[i].parent;
        depth[i] = (parent <= 0) ? 0 : depth[static_cast<std::size_t>(parent)] + 1;
        if (depth[i] >= max_depth && !is_leaf(pool[i].op)) {
            Node leaf = random_terminal(variable_count, rng);
            leaf.parent = pool[i].parent;
            pool[i] = leaf;
        }
    }
    return Expression::from_pool(pool, 0);
}

std::vector<Expression> seed_population(const GpConfig& config, const std::vector<Expression>& seeds,
                                        std::size_t variable_count, std::mt19937_64& rng) {
    if (seeds.empty()) {
        throw std::invalid_argument("seed_population needs at least one seed");
    }
    const OpSplit ops = split_ops(config.operator_set);
    std::vector<Expression> population;
    population.reserve(config.population_size);

    const std::size_t seeded = config.population_size / 2;
    std::uniform_int_distribution<std::size_t> pick(0, seeds.size() - 1);
    for (std::size_t i = 0; i < seeded; ++i) {
        population.push_back(truncate_to_depth(seeds[pick(rng)], config.max_depth, variable_count, rng));
    }

    const int max_init = std::min(6, config.max_depth);
    std::size_t i = seeded;
    while (population.size() < config.population_size) {
        const int depth = 2 + static_cast<int>(i % static_cast<std::size_t>(std::max(1, max_init - 1)));
        const bool full_method = (i % 2) == 0;
        population.push_back(random_expression(ops, depth, full_method, variable_count, rng));
        ++i;
    }
    return population;
}

BuiltinGp::BuiltinGp(GpConfig config) : config_(std::move(config)) { config_.validate(); }

FitOutcome BuiltinGp::fit(const Dataset& data, const FitTarget& target) {
    if (target.values.size() != data.rows()) {
        throw std::invalid_argument("target length must match the dataset");
    }
    if (target.valid_count() < kMinValidResidualRows) {
        throw FitFailed("fewer than " + std::to_string(kMinValidResidualRows) +
                        " valid rows in the fitting target");
    }

    const std::size_t variable_count = data.x_count();
    const OpSplit ops = split_ops(config_.operator_set);
    std::mt19937_64 variation_rng(mix_seed(config_.rng_seed, "gp-variation"));
    std::mt19937_64 selection_rng(mix_seed(config_.rng_seed, "gp-selection"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t valid_rows = target.valid_count();

    // Scale for the domain-violation pressure: an individual that breaks on
    // every row must rank far behind a plain mean predictor.
    double target_mean = 0.0;
    for (std::size_t r = 0; r < target.values.size(); ++r) {
        if (target.valid[r]) {
            target_mean += target.values[r];
        }
    }
    target_mean /= static_cast<double>(valid_rows);
    double target_var = 0.0;
    for (std::size_t r = 0; r < target.values.size(); ++r) {
        if (target.valid[r]) {
            const double d = target.values[r] - target_mean;
            target_var += d * d;
        }
    }
    target_var /= static_cast<double>(valid_rows);
    const double invalid_penalty = 10.0 * (target_var + 1e-9);

    auto evaluate_individual = [&](Individual& ind) {
        const std::vector<double> out = evaluate(ind.expr, data);
        double sse = 0.0;
        std::size_t finite = 0;
        for (std::size_t r = 0; r < out.size(); ++r) {
            if (!target.valid[r]) {
                continue;
            }
            if (std::isfinite(out[r])) {
                const double d = out[r] - target.values[r];
                sse += d * d;
                ++finite;
            }
        }
        ind.invalid_rows = valid_rows - finite;
        // Individuals that fail on more than half of the rows are unusable.
        if (finite * 2 < valid_rows || !std::isfinite(sse)) {
            ind.mse = kInf;
            ind.fitness = kInf;
            return;
        }
        ind.mse = sse / static_cast<double>(finite);
        const double invalid_fraction =
            static_cast<double>(ind.invalid_rows) / static_cast<double>(valid_rows);
        ind.fitness = ind.mse + invalid_fraction * invalid_penalty +
                      config_.parsimony_coefficient * static_cast<double>(ind.expr.node_count() - 1);
    };

    // Initial population.
    std::vector<Individual> population(config_.population_size);
    if (!seeds_.empty()) {
        auto seeded = seed_population(config_, seeds_, variable_count, variation_rng);
        for (std::size_t i = 0; i < population.size(); ++i) {
            population[i].expr = std::move(seeded[i]);
        }
    } else {
        const int max_init = std::min(6, config_.max_depth);
        for (std::size_t i = 0; i < population.size(); ++i) {
            const int depth =
                2 + static_cast<int>(i % static_cast<std::size_t>(std::max(1, max_init - 1)));
            population[i].expr =
                random_expression(ops, depth, (i % 2) == 0, variable_count, variation_rng);
        }
    }
    for (auto& ind : population) {
        evaluate_individual(ind);
    }

    // Partially broken individuals may keep breeding (their sound parts are
    // useful building blocks) but only one that is finite on every valid
    // row may be returned.
    Individual best;
    auto consider_best = [&](const Individual& ind) {
        if (ind.invalid_rows == 0 && ind.fitness < best.fitness) {
            best = ind;
        }
    };
    for (const auto& ind : population) {
        consider_best(ind);
    }

    auto tournament = [&]() -> const Individual& {
        std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
        const Individual* winner = &population[pick(selection_rng)];
        for (std::size_t i = 1; i < config_.tournament_size; ++i) {
            const Individual& challenger = population[pick(selection_rng)];
            if (challenger.fitness < winner->fitness) {
                winner = &challenger;
            }
        }
        return *winner;
    };

    auto random_node_id = [&](const Expression& e) -> NodeId {
        // Any body node (never the Y root).
        return static_cast<NodeId>(
            std::uniform_int_distribution<std::size_t>(1, e.node_count() - 1)(variation_rng));
    };

    auto crossover = [&](const Expression& a, const Expression& b) -> Expression {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const NodeId point = random_node_id(a);
            const NodeId donor = random_node_id(b);
            Expression child = replace_subtree(a, point, b.subtree(donor));
            if (child.depth() <= config_.max_depth) {
                return child;
            }
        }
        return a;
    };

    auto mutate = [&](const Expression& a) -> Expression {
        Expression out = a;
        const NodeId point = random_node_id(out);
        const int point_depth = [&] {
            int d = 0;
            for (NodeId cur = point; cur != out.body() && cur != 0; cur = out.node(cur).parent) {
                ++d;
            }
            return d;
        }();
        const int budget = std::max(1, std::min(3, config_.max_depth - point_depth));
        Expression subtree = random_expression(ops, budget, false, variable_count, variation_rng);
        out = replace_subtree(out, point, subtree);

        // Constant jitter.
        std::vector<double> values;
        bool changed = false;
        for (const Node& n : out.nodes()) {
            if (n.op == NodeOp::Constant) {
                double v = n.value;
                if (unit(variation_rng) < kConstantJitterProb) {
                    v += std::normal_distribution<double>(0.0, 1.0)(variation_rng);
                    changed = true;
                }
                values.push_back(v);
            }
        }
        if (changed) {
            out = out.with_constants(values);
        }
        return out;
    };

    for (std::size_t gen = 1; gen < config_.generations; ++gen) {
        if (best.mse <= kEarlyStopMse) {
            break;
        }
        std::vector<Individual> next;
        next.reserve(population.size());
        if (std::isfinite(best.fitness)) {
            next.push_back(best); // elite
        }
        while (next.size() < population.size()) {
            Individual child;
            const double r = unit(selection_rng);
            if (r < config_.crossover_prob) {
                child.expr = crossover(tournament().expr, tournament().expr);
            } else if (r < config_.crossover_prob + config_.mutation_prob) {
                child.expr = mutate(tournament().expr);
            } else {
                child.expr = tournament().expr;
            }
            evaluate_individual(child);
            next.push_back(std::move(child));
        }
        population = std::move(next);
        for (const auto& ind : population) {
            consider_best(ind);
        }
    }

    if (!std::isfinite(best.fitness)) {
        throw FitFailed("no individual stayed finite on the fitting rows");
    }

    // Polish the winner's constants before returning it.
    if (!best.expr.constant_nodes().empty()) {
        const RefitOutcome refit = refit_constants(best.expr, data, target);
        Individual polished;
        polished.expr = refit.expr;
        evaluate_individual(polished);
        if (polished.invalid_rows == 0 && polished.fitness <= best.fitness) {
            best = polished;
        }
    }

    FitOutcome outcome;
    outcome.expr = best.expr;
    outcome.no_operator_prediction = count_operators(best.expr) == 0;
    outcome.train_mse = best.mse;
    return outcome;
}

} // namespace red
