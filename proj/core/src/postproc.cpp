#include "red/postproc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "red/errors.hpp"

namespace red {

std::string_view method_name(MethodKind kind) noexcept {
    switch (kind) {
    case MethodKind::Classic: return "classic";
    case MethodKind::Red: return "red";
    case MethodKind::Permute: return "permute";
    case MethodKind::HyperGrid: return "hyper";
    case MethodKind::Refit: return "refit";
    case MethodKind::SeededGp: return "seeded";
    }
    return "?";
}

std::optional<MethodKind> method_from_name(std::string_view name) noexcept {
    for (MethodKind kind : {MethodKind::Classic, MethodKind::Red, MethodKind::Permute,
                            MethodKind::HyperGrid, MethodKind::Refit, MethodKind::SeededGp}) {
        if (method_name(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

MethodSpec MethodSpec::classic() { return MethodSpec{}; }

MethodSpec MethodSpec::red_method(RedConfig config) {
    MethodSpec s;
    s.kind = MethodKind::Red;
    s.red = config;
    return s;
}

MethodSpec MethodSpec::permute(int n) {
    MethodSpec s;
    s.kind = MethodKind::Permute;
    s.permute_n = n;
    return s;
}

MethodSpec MethodSpec::hyper_grid(const GpConfig& base) {
    MethodSpec s;
    s.kind = MethodKind::HyperGrid;
    GpConfig wide = base;
    wide.population_size = 2000;
    wide.mutation_prob = 0.35;
    wide.crossover_prob = std::min(base.crossover_prob, 1.0 - wide.mutation_prob);
    wide.max_depth = 10;
    GpConfig narrow = base;
    narrow.population_size = 500;
    narrow.mutation_prob = 0.1;
    narrow.max_depth = 6;
    narrow.parsimony_coefficient = 0.01;
    s.grid = {base, wide, narrow};
    return s;
}

MethodSpec MethodSpec::refit() {
    MethodSpec s;
    s.kind = MethodKind::Refit;
    return s;
}

MethodSpec MethodSpec::seeded(GpConfig config) {
    MethodSpec s;
    s.kind = MethodKind::SeededGp;
    s.seeded_gp = config;
    return s;
}

const EquationRecord& RunResult::best_equation() const {
    if (best < 0 || static_cast<std::size_t>(best) >= equations.size()) {
        throw std::logic_error("run has no best equation");
    }
    return equations[static_cast<std::size_t>(best)];
}

Expression seed_for_node(const Expression& initial, NodeId node, std::size_t variable_count,
                         std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(node)));
    // Placeholder drawn uniformly from the variables plus the constant 1.
    const std::size_t pick =
        std::uniform_int_distribution<std::size_t>(0, variable_count)(rng);
    Expression leaf = (pick < variable_count)
                          ? Expression::variable(static_cast<std::int32_t>(pick))
                          : Expression::constant(1.0);
    return replace_subtree(initial, node, leaf);
}

namespace {

EquationRecord make_record(Expression expr, const Dataset& train, const Dataset& test,
                           double val_mse) {
    EquationRecord rec;
    rec.train_mse = mean_squared_error(expr, train);
    rec.val_mse = val_mse;
    rec.test_mse = mean_squared_error(expr, test);
    rec.operator_count = count_operators(expr);
    rec.expr = std::move(expr);
    return rec;
}

void finalize(RunResult& result) {
    result.completed = !result.equations.empty();
    result.best = -1;
    for (std::size_t i = 0; i < result.equations.size(); ++i) {
        if (result.best < 0 ||
            result.equations[i].test_mse <
                result.equations[static_cast<std::size_t>(result.best)].test_mse) {
            result.best = static_cast<int>(i);
        }
    }
}

Dataset permuted_rows(const Dataset& data, std::mt19937_64& rng) {
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return data.select_rows(order, data.role());
}

} // namespace

RunResult run_method(const MethodSpec& spec, EdsModel& model, const Expression* initial,
                     const DataSplits& splits, std::uint64_t base_seed) {
    if (spec.kind != MethodKind::Classic && initial == nullptr) {
        throw std::invalid_argument("non-Classic methods need the Classic output as initial equation");
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    RunResult result;
    result.method = std::string(method_name(spec.kind));
    const auto started = std::chrono::steady_clock::now();

    // Everything except the refinement method folds validation rows into
    // the training set.
    const Dataset merged = Dataset::concat(splits.train, splits.val, DatasetRole::Train);
    const FitTarget merged_target = FitTarget::from_column(merged.y());

    switch (spec.kind) {
    case MethodKind::Classic: {
        model.reseed(mix_seed(base_seed, "classic"));
        try {
            FitOutcome fit = model.fit(merged, merged_target);
            result.equations.push_back(make_record(std::move(fit.expr), merged, splits.test, nan));
        } catch (const Error&) {
        }
        break;
    }

    case MethodKind::Red: {
        RedConfig config = spec.red;
        config.record_trace = true;
        model.reseed(mix_seed(base_seed, "red"));
        const double initial_val = mean_squared_error(*initial, splits.val);
        RefineResult refined =
            red_refine(model, *initial, splits.train, splits.val, config, initial_val);

        result.red_iterations = static_cast<int>(refined.trace.iterations.size());
        result.red_initial_val_mse = refined.trace.initial_val_mse;
        result.red_final_val_mse = refined.trace.final_val_mse;

        int iteration = 0;
        for (const IterationRecord& it : refined.trace.iterations) {
            ++iteration;
            if (it.snapshot.has_value()) {
                IterationPoint point;
                point.iteration = iteration;
                point.train_mse = it.train_mse;
                point.test_mse = mean_squared_error(*it.snapshot, splits.test);
                point.operator_count = it.operator_count;
                result.iteration_curve.push_back(point);
            }
            if (it.accepted && it.snapshot.has_value()) {
                result.equations.push_back(
                    make_record(*it.snapshot, splits.train, splits.test, it.candidate_val_mse));
            }
        }
        // The refinement proposes its accepted improvements; without any it
        // stands by the (unchanged) final tree.
        if (result.equations.empty()) {
            result.equations.push_back(make_record(std::move(refined.tree), splits.train, splits.test,
                                                   refined.trace.final_val_mse));
        }
        break;
    }

    case MethodKind::Permute: {
        if (spec.permute_n <= 0) {
            throw std::invalid_argument("permute repetition count must be resolved before running");
        }
        for (int rep = 0; rep < spec.permute_n; ++rep) {
            std::mt19937_64 rng(mix_seed(base_seed, mix_seed(0x7065726d, static_cast<std::uint64_t>(rep))));
            const Dataset shuffled = permuted_rows(merged, rng);
            model.reseed(mix_seed(base_seed, static_cast<std::uint64_t>(rep)));
            try {
                FitOutcome fit = model.fit(shuffled, FitTarget::from_column(shuffled.y()));
                result.equations.push_back(
                    make_record(std::move(fit.expr), merged, splits.test, nan));
            } catch (const Error&) {
            }
        }
        break;
    }

    case MethodKind::HyperGrid: {
        for (std::size_t i = 0; i < spec.grid.size(); ++i) {
            try {
                GpConfig config = spec.grid[i];
                config.rng_seed = mix_seed(base_seed, mix_seed(0x67726964, i));
                BuiltinGp engine(config);
                FitOutcome fit = engine.fit(merged, merged_target);
                result.equations.push_back(
                    make_record(std::move(fit.expr), merged, splits.test, nan));
            } catch (const Error&) {
            }
        }
        break;
    }

    case MethodKind::Refit: {
        try {
            const RefitOutcome refit = refit_constants(*initial, merged, merged_target);
            result.equations.push_back(make_record(refit.expr, merged, splits.test, nan));
        } catch (const Error&) {
        }
        break;
    }

    case MethodKind::SeededGp: {
        // One seeded run per node of the initial tree (the Y root aside).
        const std::size_t node_count = initial->node_count();
        for (std::size_t node = 1; node < node_count; ++node) {
            try {
                const Expression seed = seed_for_node(*initial, static_cast<NodeId>(node),
                                                      merged.x_count(), base_seed);
                GpConfig config = spec.seeded_gp;
                config.rng_seed = mix_seed(base_seed, mix_seed(0x73656564, node));
                BuiltinGp engine(config);
                engine.set_seeds({seed});
                FitOutcome fit = engine.fit(merged, merged_target);
                result.equations.push_back(
                    make_record(std::move(fit.expr), merged, splits.test, nan));
            } catch (const Error&) {
            }
        }
        break;
    }
    }

    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    finalize(result);
    return result;
}

WinLoss count_wins(const RunResult& a, const RunResult& b) {
    if (a.equations.empty() || b.equations.empty()) {
        throw EmptyComparison("win ratio needs equations on both sides");
    }
    WinLoss wl;
    for (const EquationRecord& ea : a.equations) {
        for (const EquationRecord& eb : b.equations) {
            const double ma = ea.test_mse;
            const double mb = eb.test_mse;
            const bool both_infinite = std::isinf(ma) && std::isinf(mb) && (ma > 0) == (mb > 0);
            if (both_infinite || std::abs(ma - mb) <= 1e-12) {
                ++wl.draws;
            } else if (ma < mb) {
                ++wl.wins;
            } else {
                ++wl.losses;
            }
        }
    }
    return wl;
}

double win_ratio(const RunResult& a, const RunResult& b) { return count_wins(a, b).ratio(); }

} // namespace red
