#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "red/bench.hpp"
#include "red/errors.hpp"
#include "red/external_eds.hpp"

namespace red {

using json = nlohmann::json;

namespace {

double parse_real(const std::string& text, const std::string& context) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(context + ": malformed number '" + text + "'");
    }
    return v;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string field;
    for (char c : s) {
        if (c == sep) {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

} // namespace

BenchmarkEquation parse_corpus_line(const std::string& line, std::size_t line_no) {
    const std::string context = "corpus line " + std::to_string(line_no);
    const std::vector<std::string> fields = split_on(line, '\t');
    if (fields.size() != 3) {
        throw DataError(context + ": expected id<TAB>equation<TAB>ranges");
    }

    BenchmarkEquation eq;
    eq.id = fields[0];
    eq.equation_text = fields[1];
    eq.equation = parse_expression(fields[1]);

    const std::vector<std::string> range_specs = split_on(fields[2], ',');
    eq.ranges.assign(range_specs.size(), {0.0, 0.0});
    std::vector<bool> seen(range_specs.size(), false);
    for (const std::string& spec : range_specs) {
        const std::vector<std::string> parts = split_on(spec, ':');
        if (parts.size() != 3 || parts[0].size() < 2 || parts[0][0] != 'x') {
            throw DataError(context + ": range must look like x0:lo:hi");
        }
        std::size_t index = 0;
        auto [ptr, ec] = std::from_chars(parts[0].data() + 1, parts[0].data() + parts[0].size(), index);
        if (ec != std::errc{} || ptr != parts[0].data() + parts[0].size() || index >= eq.ranges.size()) {
            throw DataError(context + ": variable ranges must cover x0..x" +
                            std::to_string(eq.ranges.size() - 1) + " exactly");
        }
        const double lo = parse_real(parts[1], context);
        const double hi = parse_real(parts[2], context);
        if (!(lo < hi)) {
            throw DataError(context + ": empty range for " + parts[0]);
        }
        if (seen[index]) {
            throw DataError(context + ": duplicate range for " + parts[0]);
        }
        seen[index] = true;
        eq.ranges[index] = {lo, hi};
    }

    if (eq.variable_count() > 3) {
        throw DataError(context + ": at most three variables are supported");
    }
    if (eq.equation.max_variable() >= static_cast<std::int32_t>(eq.variable_count())) {
        throw DataError(context + ": equation uses x" + std::to_string(eq.equation.max_variable()) +
                        " without a range");
    }
    return eq;
}

std::vector<BenchmarkEquation> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open corpus '" + path + "'");
    }
    std::vector<BenchmarkEquation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        out.push_back(parse_corpus_line(line, line_no));
    }
    if (out.empty()) {
        throw DataError("corpus '" + path + "' holds no equations");
    }
    return out;
}

Dataset sample_dataset(const BenchmarkEquation& eq, std::size_t rows, std::uint64_t rng_seed) {
    if (rows == 0) {
        throw TooFewRows("cannot sample an empty dataset");
    }
    std::mt19937_64 rng(rng_seed);
    const std::size_t k = eq.variable_count();

    std::vector<std::vector<double>> xs(k);
    std::vector<double> ys;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 100 * rows;

    while (ys.size() < rows) {
        const std::size_t missing = rows - ys.size();
        if (attempts >= max_attempts) {
            throw UnsatisfiableRanges("equation '" + eq.id + "' stayed non-finite after " +
                                      std::to_string(max_attempts) + " draws");
        }
        const std::size_t batch = std::min(missing, max_attempts - attempts);
        attempts += batch;

        std::vector<std::vector<double>> raw(k, std::vector<double>(batch));
        for (std::size_t c = 0; c < k; ++c) {
            std::uniform_real_distribution<double> dist(eq.ranges[c].first, eq.ranges[c].second);
            for (std::size_t r = 0; r < batch; ++r) {
                raw[c][r] = dist(rng);
            }
        }
        std::vector<double> dummy_y(batch, 0.0);
        const Dataset candidate(raw, dummy_y);
        const std::vector<double> values = evaluate(eq.equation, candidate);
        for (std::size_t r = 0; r < batch && ys.size() < rows; ++r) {
            if (std::isfinite(values[r])) {
                for (std::size_t c = 0; c < k; ++c) {
                    xs[c].push_back(raw[c][r]);
                }
                ys.push_back(values[r]);
            }
        }
    }
    return Dataset(std::move(xs), std::move(ys));
}

Dataset add_noise(const Dataset& data, double rel_noise, std::uint64_t rng_seed) {
    if (rel_noise < 0.0) {
        throw std::invalid_argument("relative noise must be non-negative");
    }
    if (rel_noise == 0.0) {
        return data;
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> factor(1.0 - rel_noise, 1.0 + rel_noise);

    std::vector<std::vector<double>> xs(data.x_count());
    for (std::size_t c = 0; c < data.x_count(); ++c) {
        xs[c] = data.x(c);
        for (double& v : xs[c]) {
            v *= factor(rng);
        }
    }
    std::vector<double> ys = data.y();
    for (double& v : ys) {
        v *= factor(rng);
    }
    return Dataset(std::move(xs), std::move(ys), data.role());
}

DataSplits split_dataset(const Dataset& data, std::array<double, 3> fractions,
                         std::uint64_t rng_seed) {
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1");
    }
    const std::size_t m = data.rows();
    const auto part = [&](double f) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(m) * f + 1e-9));
    };
    std::size_t n_val = part(fractions[1]);
    std::size_t n_test = part(fractions[2]);
    std::size_t n_train = m - n_val - n_test; // floor remainder goes to train
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw TooFewRows("dataset of " + std::to_string(m) + " rows cannot fill all three partitions");
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(rng_seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
    const std::vector<std::size_t> val_idx(order.begin() + static_cast<long>(n_train),
                                           order.begin() + static_cast<long>(n_train + n_val));
    const std::vector<std::size_t> test_idx(order.begin() + static_cast<long>(n_train + n_val),
                                            order.end());
    return DataSplits{data.select_rows(train_idx, DatasetRole::Train),
                      data.select_rows(val_idx, DatasetRole::Validation),
                      data.select_rows(test_idx, DatasetRole::Test)};
}

void ExperimentConfig::validate() const {
    if (equations.empty()) {
        throw std::invalid_argument("an experiment needs at least one equation");
    }
    if (rows < 10) {
        throw std::invalid_argument("an experiment needs at least 10 rows");
    }
    if (seeds.empty()) {
        throw std::invalid_argument("an experiment needs at least one seed");
    }
    if (gate_mse < 0.0 || noise < 0.0) {
        throw std::invalid_argument("gate and noise must be non-negative");
    }
    const double sum = split[0] + split[1] + split[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1");
    }
    gp.validate();
    red.validate();
}

std::vector<MethodSpec> ExperimentConfig::resolved_methods() const {
    std::vector<MethodSpec> out;
    if (methods.empty()) {
        out.push_back(MethodSpec::classic());
        out.push_back(MethodSpec::red_method(red));
        out.push_back(MethodSpec::permute(0));
        out.push_back(MethodSpec::hyper_grid(gp));
        out.push_back(MethodSpec::refit());
        out.push_back(MethodSpec::seeded(gp));
        return out;
    }
    out = methods;
    bool has_classic = false;
    for (const MethodSpec& m : out) {
        has_classic = has_classic || m.kind == MethodKind::Classic;
    }
    if (!has_classic) {
        out.insert(out.begin(), MethodSpec::classic());
    }
    return out;
}

namespace {

GpConfig gp_config_from_json(const json& j, GpConfig base) {
    if (j.contains("population_size")) base.population_size = j["population_size"].get<std::size_t>();
    if (j.contains("generations")) base.generations = j["generations"].get<std::size_t>();
    if (j.contains("tournament_size")) base.tournament_size = j["tournament_size"].get<std::size_t>();
    if (j.contains("crossover_prob")) base.crossover_prob = j["crossover_prob"].get<double>();
    if (j.contains("mutation_prob")) base.mutation_prob = j["mutation_prob"].get<double>();
    if (j.contains("max_depth")) base.max_depth = j["max_depth"].get<int>();
    if (j.contains("parsimony_coefficient"))
        base.parsimony_coefficient = j["parsimony_coefficient"].get<double>();
    if (j.contains("rng_seed")) base.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("operators")) {
        std::vector<NodeOp> ops;
        for (const auto& name : j["operators"]) {
            const std::string s = name.get<std::string>();
            bool found = false;
            for (NodeOp op : {NodeOp::Plus, NodeOp::Minus, NodeOp::Product, NodeOp::Division,
                              NodeOp::Power, NodeOp::Logarithm, NodeOp::Exponential, NodeOp::Sine,
                              NodeOp::Cosine, NodeOp::SquareRoot}) {
                if (node_op_name(op) == s) {
                    ops.push_back(op);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw DataError("unknown operator '" + s + "' in config");
            }
        }
        base.operator_set = std::move(ops);
    }
    return base;
}

} // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config '" + path + "'");
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw DataError("config '" + path + "' is not a JSON object");
    }

    ExperimentConfig cfg;
    if (!j.contains("corpus") || !j["corpus"].is_string()) {
        throw DataError("config needs a 'corpus' manifest path");
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    const std::filesystem::path corpus = base / j["corpus"].get<std::string>();
    cfg.equations = load_corpus(corpus.string());

    if (j.contains("rows")) cfg.rows = j["rows"].get<std::size_t>();
    if (j.contains("gate_mse")) cfg.gate_mse = j["gate_mse"].get<double>();
    if (j.contains("noise")) cfg.noise = j["noise"].get<double>();
    if (j.contains("split")) {
        const auto& s = j["split"];
        if (!s.is_array() || s.size() != 3) {
            throw DataError("split must be a three-element array");
        }
        cfg.split = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    if (j.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : j["seeds"]) {
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    if (j.contains("gp")) cfg.gp = gp_config_from_json(j["gp"], cfg.gp);
    if (j.contains("red")) {
        const auto& r = j["red"];
        if (r.contains("max_iterations")) cfg.red.max_iterations = r["max_iterations"].get<int>();
        if (r.contains("threshold")) cfg.red.error_threshold = r["threshold"].get<double>();
    }
    if (j.contains("external_command")) cfg.external_command = j["external_command"].get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();

    if (j.contains("methods")) {
        for (const auto& m : j["methods"]) {
            const std::string name = m.get<std::string>();
            const auto kind = method_from_name(name);
            if (!kind.has_value()) {
                throw DataError("unknown method '" + name + "' in config");
            }
            switch (*kind) {
            case MethodKind::Classic: cfg.methods.push_back(MethodSpec::classic()); break;
            case MethodKind::Red: cfg.methods.push_back(MethodSpec::red_method(cfg.red)); break;
            case MethodKind::Permute: cfg.methods.push_back(MethodSpec::permute(0)); break;
            case MethodKind::HyperGrid: cfg.methods.push_back(MethodSpec::hyper_grid(cfg.gp)); break;
            case MethodKind::Refit: cfg.methods.push_back(MethodSpec::refit()); break;
            case MethodKind::SeededGp: cfg.methods.push_back(MethodSpec::seeded(cfg.gp)); break;
            }
        }
    }

    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        const std::string kind = s.contains("kind") ? s["kind"].get<std::string>() : "none";
        if (kind == "iterations") {
            cfg.sweep = SweepSpec::iterations();
        } else if (kind == "noise") {
            cfg.sweep = SweepSpec::noise();
        } else if (kind == "size") {
            cfg.sweep = SweepSpec::size();
        } else if (kind == "none") {
            cfg.sweep = SweepSpec::none();
        } else {
            throw DataError("unknown sweep kind '" + kind + "'");
        }
        if (s.contains("values")) {
            cfg.sweep.values.clear();
            for (const auto& v : s["values"]) {
                cfg.sweep.values.push_back(v.get<double>());
            }
        }
    }

    cfg.validate();
    return cfg;
}

const RunResult* CellResult::run(std::string_view method) const {
    for (const RunResult& r : runs) {
        if (r.method == method) {
            return &r;
        }
    }
    return nullptr;
}

namespace {

// Canonical per-cell method order; permute resolves its repetition count
// from the refinement run and therefore goes last.
int method_rank(MethodKind kind) {
    switch (kind) {
    case MethodKind::Classic: return 0;
    case MethodKind::Red: return 1;
    case MethodKind::HyperGrid: return 2;
    case MethodKind::Refit: return 3;
    case MethodKind::SeededGp: return 4;
    case MethodKind::Permute: return 5;
    }
    return 6;
}

struct CellTask {
    const BenchmarkEquation* equation = nullptr;
    std::uint64_t seed = 0;
    std::size_t rows = 0;
    double noise = 0.0;
    double sweep_value = 0.0;
    bool has_sweep_value = false;
    int red_iterations_override = 0; // >0 replaces the configured i_max
};

CellResult run_cell(const ExperimentConfig& cfg, const std::vector<MethodSpec>& methods,
                    const CellTask& task) {
    CellResult cell;
    cell.dataset_id = task.equation->id;
    cell.seed = task.seed;
    cell.sweep_value = task.sweep_value;
    cell.has_sweep_value = task.has_sweep_value;

    const std::uint64_t cell_seed =
        mix_seed(mix_seed(task.seed, task.equation->id),
                 task.has_sweep_value ? static_cast<std::uint64_t>(task.sweep_value * 1e6) : 0u);

    Dataset data = sample_dataset(*task.equation, task.rows, mix_seed(cell_seed, "sample"));
    if (task.noise > 0.0) {
        data = add_noise(data, task.noise, mix_seed(cell_seed, "noise"));
    }
    const DataSplits splits = split_dataset(data, cfg.split, mix_seed(cell_seed, "split"));

    std::unique_ptr<EdsModel> model;
    if (cfg.external_command.empty()) {
        model = std::make_unique<BuiltinGp>(cfg.gp);
    } else {
        model = std::make_unique<ExternalEds>(ExternalEdsConfig{cfg.external_command, 120.0});
    }

    // Classic always runs first.
    RunResult classic = run_method(MethodSpec::classic(), *model, nullptr, splits, cell_seed);
    classic.dataset_id = cell.dataset_id;
    classic.seed = task.seed;
    cell.classic_test_mse = classic.completed ? classic.best_equation().test_mse
                                              : std::numeric_limits<double>::infinity();
    cell.gated = !classic.completed || cell.classic_test_mse > cfg.gate_mse;

    const Expression* initial = classic.completed ? &classic.best_equation().expr : nullptr;
    cell.runs.push_back(std::move(classic));

    if (!cell.gated) {
        return cell;
    }

    std::vector<MethodSpec> rest;
    for (const MethodSpec& m : methods) {
        if (m.kind != MethodKind::Classic) {
            rest.push_back(m);
        }
    }
    std::stable_sort(rest.begin(), rest.end(), [](const MethodSpec& a, const MethodSpec& b) {
        return method_rank(a.kind) < method_rank(b.kind);
    });

    int red_performed_iterations = 0;
    for (MethodSpec spec : rest) {
        RunResult run;
        if (initial == nullptr) {
            // Classic failed outright: methods that need its output are
            // recorded as incomplete attempts.
            run.method = std::string(method_name(spec.kind));
            run.completed = false;
        } else {
            if (spec.kind == MethodKind::Red && task.red_iterations_override > 0) {
                spec.red.max_iterations = task.red_iterations_override;
            }
            if (spec.kind == MethodKind::Permute && spec.permute_n <= 0) {
                spec.permute_n = red_performed_iterations > 0 ? red_performed_iterations
                                                              : cfg.red.max_iterations;
            }
            try {
                run = run_method(spec, *model, initial, splits, cell_seed);
            } catch (const Error&) {
                run.method = std::string(method_name(spec.kind));
                run.completed = false;
            }
            if (spec.kind == MethodKind::Red) {
                red_performed_iterations = run.red_iterations;
            }
        }
        run.dataset_id = cell.dataset_id;
        run.seed = task.seed;
        cell.runs.push_back(std::move(run));
    }
    return cell;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<MethodSpec> methods = cfg.resolved_methods();

    ExperimentReport report;
    report.sweep_kind = cfg.sweep.kind;
    report.gate_mse = cfg.gate_mse;
    for (const MethodSpec& m : methods) {
        report.method_names.emplace_back(method_name(m.kind));
    }

    std::vector<CellTask> tasks;
    auto push_tasks = [&](double sweep_value, bool has_value, std::size_t rows, double noise,
                          int red_override) {
        for (const BenchmarkEquation& eq : cfg.equations) {
            for (std::uint64_t seed : cfg.seeds) {
                CellTask t;
                t.equation = &eq;
                t.seed = seed;
                t.rows = rows;
                t.noise = noise;
                t.sweep_value = sweep_value;
                t.has_sweep_value = has_value;
                t.red_iterations_override = red_override;
                tasks.push_back(t);
            }
        }
    };

    switch (cfg.sweep.kind) {
    case SweepSpec::Kind::None:
        push_tasks(0.0, false, cfg.rows, cfg.noise, 0);
        break;
    case SweepSpec::Kind::Iterations:
        push_tasks(100.0, true, cfg.rows, cfg.noise, 100);
        break;
    case SweepSpec::Kind::Noise:
        for (double v : cfg.sweep.values) {
            push_tasks(v, true, cfg.rows, v, 0);
        }
        break;
    case SweepSpec::Kind::Size:
        for (double v : cfg.sweep.values) {
            push_tasks(v, true, static_cast<std::size_t>(v), cfg.noise, 0);
        }
        break;
    }

    std::vector<CellResult> cells(tasks.size());
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            cells[i] = run_cell(cfg, methods, tasks[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) {
                    return;
                }
                cells[i] = run_cell(cfg, methods, tasks[i]);
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(jobs, static_cast<int>(tasks.size()));
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    report.cells = std::move(cells);
    return report;
}

} // namespace red
