#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "red/bench.hpp"
#include "red/errors.hpp"
#include "red/external_eds.hpp"
#include "red/refine.hpp"

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

json json_num(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

struct CommonOptions {
    std::string data_path;
    std::uint64_t seed = 0;
    double noise = 0.0;
    int rows = 0; // 0: use every row
    bool as_json = false;
    std::size_t gp_population = 1000;
    std::size_t gp_generations = 30;
};

std::unique_ptr<red::EdsModel> make_model(const CommonOptions& opts) {
    const char* external = std::getenv("RED_EDS_CMD");
    if (external != nullptr && *external != '\0') {
        return std::make_unique<red::ExternalEds>(red::ExternalEdsConfig{external, 120.0});
    }
    red::GpConfig config;
    config.population_size = opts.gp_population;
    config.generations = opts.gp_generations;
    config.rng_seed = opts.seed;
    return std::make_unique<red::BuiltinGp>(config);
}

red::Dataset prepare_dataset(const CommonOptions& opts) {
    red::Dataset data = red::Dataset::load_csv(opts.data_path);
    if (opts.rows > 0 && static_cast<std::size_t>(opts.rows) < data.rows()) {
        std::vector<std::size_t> order(data.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(red::mix_seed(opts.seed, "subsample"));
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(static_cast<std::size_t>(opts.rows));
        data = data.select_rows(order, data.role());
    }
    if (opts.noise > 0.0) {
        data = red::add_noise(data, opts.noise, red::mix_seed(opts.seed, "noise"));
    }
    return data;
}

red::DataSplits prepare_splits(const CommonOptions& opts) {
    return red::split_dataset(prepare_dataset(opts), {0.6, 0.2, 0.2},
                              red::mix_seed(opts.seed, "split"));
}

void add_common_flags(CLI::App* cmd, CommonOptions& opts, bool with_data) {
    if (with_data) {
        cmd->add_option("--data", opts.data_path, "CSV file with columns x0..x{n-2},y")
            ->required();
        cmd->add_option("--rows", opts.rows, "Subsample the table to this many rows");
        cmd->add_option("--noise", opts.noise, "Relative uniform noise applied to every cell");
    }
    cmd->add_option("--seed", opts.seed, "Seed for all randomness (default 0)");
    cmd->add_flag("--json", opts.as_json, "Emit one JSON record per result line");
    cmd->add_option("--gp-population", opts.gp_population, "Population size of the built-in engine");
    cmd->add_option("--gp-generations", opts.gp_generations, "Generations of the built-in engine");
}

int run_fit(const CommonOptions& opts) {
    const red::DataSplits splits = prepare_splits(opts);
    auto model = make_model(opts);
    const red::RunResult run =
        red::run_method(red::MethodSpec::classic(), *model, nullptr, splits, opts.seed);
    if (!run.completed) {
        std::cerr << "fit: the engine returned no equation\n";
        return kExitInternal;
    }
    const red::EquationRecord& best = run.best_equation();
    if (opts.as_json) {
        json record;
        record["equation"] = red::print_expression(best.expr);
        record["train_mse"] = json_num(best.train_mse);
        record["test_mse"] = json_num(best.test_mse);
        record["operators"] = best.operator_count;
        record["runtime_seconds"] = json_num(run.runtime_seconds);
        std::cout << record.dump() << "\n";
    } else {
        std::cout << "equation: " << red::print_expression(best.expr) << "\n"
                  << "train_mse: " << red::format_double(best.train_mse) << "\n"
                  << "test_mse: " << red::format_double(best.test_mse) << "\n"
                  << "operators: " << best.operator_count << "\n";
    }
    return 0;
}

int run_red(const CommonOptions& opts, const std::string& initial_text, int max_iter,
            double threshold) {
    const red::DataSplits splits = prepare_splits(opts);
    const red::Expression initial = red::parse_expression(initial_text);
    auto model = make_model(opts);

    red::RedConfig config;
    config.max_iterations = max_iter;
    config.error_threshold = threshold;
    config.record_trace = true;

    const double initial_val = red::mean_squared_error(initial, splits.val);
    const red::RefineResult result =
        red::red_refine(*model, initial, splits.train, splits.val, config, initial_val);

    const double train = red::mean_squared_error(result.tree, splits.train);
    const double test = red::mean_squared_error(result.tree, splits.test);

    if (opts.as_json) {
        for (std::size_t i = 0; i < result.trace.iterations.size(); ++i) {
            const auto& it = result.trace.iterations[i];
            json record;
            record["iteration"] = i + 1;
            record["node"] = it.node;
            record["candidate_val_mse"] = json_num(it.candidate_val_mse);
            record["accepted"] = it.accepted;
            record["train_mse"] = json_num(it.train_mse);
            record["operators"] = it.operator_count;
            std::cout << record.dump() << "\n";
        }
        json record;
        record["equation"] = red::print_expression(result.tree);
        record["initial_val_mse"] = json_num(result.trace.initial_val_mse);
        record["val_mse"] = json_num(result.trace.final_val_mse);
        record["train_mse"] = json_num(train);
        record["test_mse"] = json_num(test);
        record["iterations"] = result.trace.iterations.size();
        record["accepted"] = result.trace.accepted_count();
        std::cout << record.dump() << "\n";
    } else {
        for (std::size_t i = 0; i < result.trace.iterations.size(); ++i) {
            const auto& it = result.trace.iterations[i];
            std::cout << "iter " << (i + 1) << ": node=" << it.node
                      << " candidate_val=" << red::format_double(it.candidate_val_mse)
                      << (it.accepted ? " accepted" : " rejected")
                      << " train=" << red::format_double(it.train_mse)
                      << " operators=" << it.operator_count << "\n";
        }
        std::cout << "equation: " << red::print_expression(result.tree) << "\n"
                  << "val_mse: " << red::format_double(result.trace.final_val_mse) << "\n"
                  << "train_mse: " << red::format_double(train) << "\n"
                  << "test_mse: " << red::format_double(test) << "\n";
    }
    return 0;
}

int run_bench(const std::string& config_path, const std::string& out_dir, int jobs,
              std::uint64_t seed, bool seed_set, bool as_json) {
    red::ExperimentConfig config = red::load_experiment_config(config_path);
    if (jobs > 0) {
        config.jobs = jobs;
    }
    if (seed_set) {
        config.seeds = {seed};
    }
    const char* external = std::getenv("RED_EDS_CMD");
    if (config.external_command.empty() && external != nullptr && *external != '\0') {
        config.external_command = external;
    }

    const red::ExperimentReport report = red::run_experiment(config);
    red::write_report_files(report, out_dir);

    if (as_json) {
        for (const auto& summary : red::summarize_methods(report)) {
            json record;
            record["method"] = summary.method;
            record["attempted"] = summary.attempted;
            record["completed"] = summary.completed;
            if (summary.method == "classic") {
                record["gated"] = summary.gated;
            }
            record["mse_q2"] = json_num(summary.mse_q2);
            record["mse_q3"] = json_num(summary.mse_q3);
            record["operators_q2"] = json_num(summary.operators_q2);
            record["runtime_q2_seconds"] = json_num(summary.runtime_q2);
            record["p_vs_red"] = json_num(summary.p_vs_red);
            std::cout << record.dump() << "\n";
        }
    } else {
        red::write_report_csv(report, std::cout);
        std::cout << "report files written to " << out_dir << "\n";
    }
    return 0;
}

int run_residual(const std::string& data_path, const std::string& equation_text, int node,
                 bool as_json) {
    const red::Dataset data = red::Dataset::load_csv(data_path);
    const red::Expression tree = red::parse_expression(equation_text);
    const red::ResidualTarget target =
        red::compute_residual(tree, static_cast<red::NodeId>(node), data);

    if (as_json) {
        for (std::size_t r = 0; r < target.values.size(); ++r) {
            json record;
            record["row"] = r;
            record["y_res"] = json_num(target.values[r]);
            record["valid"] = static_cast<bool>(target.valid[r]);
            std::cout << record.dump() << "\n";
        }
    } else {
        std::cout << "y_res,valid\n";
        for (std::size_t r = 0; r < target.values.size(); ++r) {
            std::cout << red::format_double(target.values[r]) << ','
                      << (target.valid[r] ? 1 : 0) << "\n";
        }
    }
    return 0;
}

int run_inspect(const std::string& equation_text, bool as_json) {
    const red::Expression tree = red::parse_expression(equation_text);
    const red::ResidualList list = red::build_residual_list(tree);

    if (as_json) {
        json nodes = json::array();
        for (std::size_t i = 0; i < tree.node_count(); ++i) {
            const red::Node& n = tree.node(static_cast<red::NodeId>(i));
            json row;
            row["id"] = i;
            row["kind"] = std::string(red::node_op_name(n.op));
            if (n.op == red::NodeOp::Constant) {
                row["value"] = n.value;
            }
            if (n.op == red::NodeOp::Variable) {
                row["variable"] = n.variable;
            }
            row["parent"] = n.parent;
            json children = json::array();
            for (int c = 0; c < n.child_count(); ++c) {
                children.push_back(n.child[static_cast<std::size_t>(c)]);
            }
            row["children"] = children;
            nodes.push_back(row);
        }
        json record;
        record["equation"] = red::print_expression(tree);
        record["nodes"] = nodes;
        record["residual_list"] = list;
        std::cout << record.dump() << "\n";
        return 0;
    }

    std::cout << "equation: " << red::print_expression(tree) << "\n";
    std::cout << "id\tkind\tpayload\tparent\tchildren\n";
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        const red::Node& n = tree.node(static_cast<red::NodeId>(i));
        std::cout << i << '\t' << red::node_op_name(n.op) << '\t';
        if (n.op == red::NodeOp::Constant) {
            std::cout << red::format_double(n.value);
        } else if (n.op == red::NodeOp::Variable) {
            std::cout << 'x' << n.variable;
        } else {
            std::cout << '-';
        }
        std::cout << '\t' << n.parent << '\t';
        for (int c = 0; c < n.child_count(); ++c) {
            std::cout << (c > 0 ? " " : "") << n.child[static_cast<std::size_t>(c)];
        }
        if (n.child_count() == 0) {
            std::cout << '-';
        }
        std::cout << "\n";
    }
    std::cout << "residual_list:";
    for (red::NodeId id : list) {
        std::cout << ' ' << id;
    }
    std::cout << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);

    CLI::App app{"Equation refinement toolkit: residual-driven post-processing "
                 "for equation discovery systems"};
    app.require_subcommand(1);

    CommonOptions fit_opts;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Run the plain engine once on a CSV table");
    add_common_flags(fit_cmd, fit_opts, true);

    CommonOptions red_opts;
    std::string init_text;
    int max_iter = 10;
    double threshold = 0.001;
    CLI::App* red_cmd = app.add_subcommand("red", "Refine an initial equation on a CSV table");
    add_common_flags(red_cmd, red_opts, true);
    red_cmd->add_option("--init", init_text, "Initial equation to refine")->required();
    red_cmd->add_option("--max-iter", max_iter, "Iteration budget (default 10)");
    red_cmd->add_option("--threshold", threshold, "Stop once the validation MSE reaches this");

    std::string bench_config;
    std::string bench_out = "red-bench-out";
    int bench_jobs = 0;
    CommonOptions bench_opts;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Run a benchmark experiment from a config file");
    bench_cmd->add_option("--config", bench_config, "Experiment config (JSON)")->required();
    bench_cmd->add_option("--out", bench_out, "Output directory for report files");
    bench_cmd->add_option("--jobs", bench_jobs, "Worker threads for the experiment grid");
    bool bench_seed_set = false;
    bench_cmd->add_option("--seed", bench_opts.seed, "Replace the config's seed list")
        ->each([&](const std::string&) { bench_seed_set = true; });
    bench_cmd->add_flag("--json", bench_opts.as_json, "Emit the summary as JSON records");

    std::string residual_data;
    std::string residual_eq;
    int residual_node = -1;
    bool residual_json = false;
    CLI::App* residual_cmd =
        app.add_subcommand("residual", "Print the residual target for an equation node");
    residual_cmd->add_option("--data", residual_data, "CSV file")->required();
    residual_cmd->add_option("--eq", residual_eq, "Equation text")->required();
    residual_cmd->add_option("--node", residual_node, "Node id (see inspect)")->required();
    residual_cmd->add_flag("--json", residual_json, "Emit JSON records");

    std::string inspect_eq;
    bool inspect_json = false;
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print a tree's node table and residual list");
    inspect_cmd->add_option("--eq", inspect_eq, "Equation text")->required();
    inspect_cmd->add_flag("--json", inspect_json, "Emit a JSON record");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help
        }
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) {
            return run_fit(fit_opts);
        }
        if (red_cmd->parsed()) {
            return run_red(red_opts, init_text, max_iter, threshold);
        }
        if (bench_cmd->parsed()) {
            return run_bench(bench_config, bench_out, bench_jobs, bench_opts.seed, bench_seed_set,
                             bench_opts.as_json);
        }
        if (residual_cmd->parsed()) {
            return run_residual(residual_data, residual_eq, residual_node, residual_json);
        }
        if (inspect_cmd->parsed()) {
            return run_inspect(inspect_eq, inspect_json);
        }
    } catch (const red::SyntaxError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::VariableOutOfRange& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::NodeNotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::NotApplicable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::NotInvertible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::AllRowsInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::TooFewRows& e) {
        std::cerr << "error: TooFewRows: " << e.what() << "\n";
        return kExitData;
    } catch (const red::UnsatisfiableRanges& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const red::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
