#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "red/bench.hpp"
#include "red/errors.hpp"
#include "red/stats.hpp"

namespace red {

using json = nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// JSON value for a double; non-finite values become strings so the record
/// stays valid JSON without losing information.
json json_num(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

bool is_gated(const CellResult& cell) { return cell.gated; }

} // namespace

std::vector<MethodSummary> summarize_methods(const ExperimentReport& report) {
    std::vector<MethodSummary> out;
    const bool has_red =
        std::find(report.method_names.begin(), report.method_names.end(), "red") !=
        report.method_names.end();

    for (const std::string& method : report.method_names) {
        MethodSummary s;
        s.method = method;
        s.p_vs_red = kNan;

        std::vector<double> mses;
        std::vector<double> operators;
        std::vector<double> runtimes;
        std::vector<double> paired_self;
        std::vector<double> paired_red;

        for (const CellResult& cell : report.cells) {
            const RunResult* run = cell.run(method);
            const bool in_scope = (method == "classic") || is_gated(cell);
            if (!in_scope || run == nullptr) {
                continue;
            }
            ++s.attempted;
            if (method == "classic" && is_gated(cell)) {
                ++s.gated;
            }
            if (!run->completed) {
                continue;
            }
            ++s.completed;
            runtimes.push_back(run->runtime_seconds);
            if (is_gated(cell)) {
                mses.push_back(run->best_equation().test_mse);
                operators.push_back(static_cast<double>(run->best_equation().operator_count));
                if (has_red && method != "red") {
                    const RunResult* red_run = cell.run("red");
                    if (red_run != nullptr && red_run->completed) {
                        paired_self.push_back(run->best_equation().test_mse);
                        paired_red.push_back(red_run->best_equation().test_mse);
                    }
                }
            }
        }

        s.mse_q2 = mses.empty() ? kNan : quantile(mses, 0.5);
        s.mse_q3 = mses.empty() ? kNan : quantile(mses, 0.75);
        s.operators_q2 = operators.empty() ? kNan : quantile(operators, 0.5);
        s.runtime_q2 = runtimes.empty() ? kNan : quantile(runtimes, 0.5);
        if (!paired_self.empty()) {
            s.p_vs_red = wilcoxon_signed_rank(paired_self, paired_red).p_value;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::vector<double>> win_ratio_matrix(const ExperimentReport& report) {
    const std::size_t n = report.method_names.size();
    std::vector<std::vector<double>> matrix(n, std::vector<double>(n, kNan));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                matrix[i][j] = 1.0; // self-comparison placeholder
                continue;
            }
            WinLoss pooled;
            for (const CellResult& cell : report.cells) {
                if (!is_gated(cell)) {
                    continue;
                }
                const RunResult* a = cell.run(report.method_names[i]);
                const RunResult* b = cell.run(report.method_names[j]);
                if (a == nullptr || b == nullptr || !a->completed || !b->completed) {
                    continue;
                }
                const WinLoss wl = count_wins(*a, *b);
                pooled.wins += wl.wins;
                pooled.draws += wl.draws;
                pooled.losses += wl.losses;
            }
            if (pooled.total() > 0) {
                matrix[i][j] = pooled.ratio();
            }
        }
    }
    return matrix;
}

IterationCurve iteration_curve(const ExperimentReport& report, int iterations) {
    IterationCurve curve;
    const std::size_t n = static_cast<std::size_t>(std::max(1, iterations));
    std::vector<double> train_sum(n, 0.0);
    std::vector<double> test_sum(n, 0.0);
    std::vector<double> ops_sum(n, 0.0);

    for (const CellResult& cell : report.cells) {
        if (!is_gated(cell)) {
            continue;
        }
        const RunResult* run = cell.run("red");
        if (run == nullptr || !run->completed || run->iteration_curve.empty()) {
            continue;
        }

        // Forward-fill the recorded points to the full horizon.
        std::vector<double> train(n), test(n), ops(n);
        std::size_t point = 0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            while (point + 1 < run->iteration_curve.size() &&
                   run->iteration_curve[point + 1].iteration <= static_cast<int>(i) + 1) {
                ++point;
            }
            const IterationPoint& p = run->iteration_curve[point];
            train[i] = p.train_mse;
            test[i] = p.test_mse;
            ops[i] = static_cast<double>(p.operator_count);
            finite = finite && std::isfinite(train[i]) && std::isfinite(test[i]);
        }
        if (!finite) {
            continue; // a run with non-finite errors has no meaningful scale
        }

        const double train_max = *std::max_element(train.begin(), train.end());
        const double test_max = *std::max_element(test.begin(), test.end());
        for (std::size_t i = 0; i < n; ++i) {
            train_sum[i] += train_max > 0.0 ? train[i] / train_max : 0.0;
            test_sum[i] += test_max > 0.0 ? test[i] / test_max : 0.0;
            ops_sum[i] += ops[i];
        }
        ++curve.runs;
    }

    if (curve.runs > 0) {
        const double denom = static_cast<double>(curve.runs);
        curve.mean_norm_train.resize(n);
        curve.mean_norm_test.resize(n);
        curve.mean_operators.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            curve.mean_norm_train[i] = train_sum[i] / denom;
            curve.mean_norm_test[i] = test_sum[i] / denom;
            curve.mean_operators[i] = ops_sum[i] / denom;
        }
    }
    return curve;
}

std::vector<SweepRow> sweep_rows(const ExperimentReport& report) {
    std::map<double, std::map<std::string, std::vector<const RunResult*>>> grouped;
    for (const CellResult& cell : report.cells) {
        if (!cell.has_sweep_value || !is_gated(cell)) {
            continue;
        }
        for (const RunResult& run : cell.runs) {
            grouped[cell.sweep_value][run.method].push_back(&run);
        }
    }

    std::vector<SweepRow> rows;
    for (const auto& [value, methods] : grouped) {
        for (const std::string& method : report.method_names) {
            const auto it = methods.find(method);
            if (it == methods.end()) {
                continue;
            }
            SweepRow row;
            row.sweep_value = value;
            row.method = method;
            std::vector<double> train, test, ops;
            for (const RunResult* run : it->second) {
                if (!run->completed) {
                    continue;
                }
                ++row.completed;
                train.push_back(run->best_equation().train_mse);
                test.push_back(run->best_equation().test_mse);
                ops.push_back(static_cast<double>(run->best_equation().operator_count));
            }
            row.train_mse_q2 = train.empty() ? kNan : quantile(train, 0.5);
            row.test_mse_q2 = test.empty() ? kNan : quantile(test, 0.5);
            row.operators_q2 = ops.empty() ? kNan : quantile(ops, 0.5);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_raw_jsonl(const ExperimentReport& report, std::ostream& out) {
    for (const CellResult& cell : report.cells) {
        for (const RunResult& run : cell.runs) {
            json base;
            base["method"] = run.method;
            base["dataset"] = cell.dataset_id;
            base["seed"] = cell.seed;
            base["sweep_value"] = cell.has_sweep_value ? json(cell.sweep_value) : json(nullptr);
            base["gated"] = cell.gated;
            base["completed"] = run.completed;
            base["runtime_seconds"] = json_num(run.runtime_seconds);
            if (run.method == "red") {
                base["red_iterations"] = run.red_iterations;
                base["red_initial_val_mse"] = json_num(run.red_initial_val_mse);
                base["red_final_val_mse"] = json_num(run.red_final_val_mse);
            }
            if (run.equations.empty()) {
                json record = base;
                record["candidate"] = nullptr;
                out << record.dump() << '\n';
                continue;
            }
            for (std::size_t i = 0; i < run.equations.size(); ++i) {
                const EquationRecord& eq = run.equations[i];
                json record = base;
                record["candidate"] = i;
                record["best"] = static_cast<int>(i) == run.best;
                record["equation"] = print_expression(eq.expr);
                record["train_mse"] = json_num(eq.train_mse);
                record["val_mse"] = json_num(eq.val_mse);
                record["test_mse"] = json_num(eq.test_mse);
                record["operators"] = eq.operator_count;
                out << record.dump() << '\n';
            }
        }
    }
}

namespace {

std::string csv_num(double v) {
    if (std::isnan(v)) {
        return "";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return format_double(v);
}

} // namespace

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
    out << "method,attempted,completed,gated,mse_q2,mse_q3,operators_q2,runtime_q2_seconds,p_vs_red\n";
    for (const MethodSummary& s : summarize_methods(report)) {
        out << s.method << ',' << s.attempted << ',' << s.completed << ',';
        if (s.method == "classic") {
            out << s.gated;
        }
        out << ',' << csv_num(s.mse_q2) << ',' << csv_num(s.mse_q3) << ',' << csv_num(s.operators_q2)
            << ',' << csv_num(s.runtime_q2) << ',' << csv_num(s.p_vs_red) << '\n';
    }
}

void write_win_matrix_csv(const ExperimentReport& report, std::ostream& out) {
    const auto matrix = win_ratio_matrix(report);
    out << "method";
    for (const std::string& name : report.method_names) {
        out << ',' << name;
    }
    out << '\n';
    for (std::size_t i = 0; i < report.method_names.size(); ++i) {
        out << report.method_names[i];
        for (std::size_t j = 0; j < report.method_names.size(); ++j) {
            out << ',' << csv_num(matrix[i][j]);
        }
        out << '\n';
    }
}

void write_sweep_csv(const ExperimentReport& report, std::ostream& out) {
    if (report.sweep_kind == SweepSpec::Kind::Iterations) {
        const IterationCurve curve = iteration_curve(report, 100);
        out << "iteration,mean_norm_train_mse,mean_norm_test_mse,mean_operators\n";
        for (std::size_t i = 0; i < curve.mean_norm_test.size(); ++i) {
            out << (i + 1) << ',' << csv_num(curve.mean_norm_train[i]) << ','
                << csv_num(curve.mean_norm_test[i]) << ',' << csv_num(curve.mean_operators[i])
                << '\n';
        }
        return;
    }
    out << "sweep_value,method,completed,train_mse_q2,test_mse_q2,operators_q2\n";
    for (const SweepRow& row : sweep_rows(report)) {
        out << csv_num(row.sweep_value) << ',' << row.method << ',' << row.completed << ','
            << csv_num(row.train_mse_q2) << ',' << csv_num(row.test_mse_q2) << ','
            << csv_num(row.operators_q2) << '\n';
    }
}

void write_report_files(const ExperimentReport& report, const std::string& directory) {
    std::filesystem::create_directories(directory);
    const std::filesystem::path dir(directory);

    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) {
            throw DataError("cannot write '" + (dir / name).string() + "'");
        }
        return out;
    };

    {
        auto out = open("raw.jsonl");
        write_raw_jsonl(report, out);
    }
    {
        auto out = open("report.csv");
        write_report_csv(report, out);
    }
    {
        auto out = open("win_ratio.csv");
        write_win_matrix_csv(report, out);
    }
    if (report.sweep_kind != SweepSpec::Kind::None) {
        auto out = open("sweep.csv");
        write_sweep_csv(report, out);
    }
}

} // namespace red
