#ifndef RED_BENCH_HPP
#define RED_BENCH_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "red/dataset.hpp"
#include "red/expression.hpp"
#include "red/postproc.hpp"

namespace red {

/// Ground-truth generator for one benchmark dataset: an equation plus a
/// uniform sampling interval per variable (three variables at most).
struct BenchmarkEquation {
    std::string id;
    std::string equation_text;
    Expression equation;
    std::vector<std::pair<double, double>> ranges; // index i covers variable xi

    std::size_t variable_count() const noexcept { return ranges.size(); }
};

/// Parses one manifest line: `id<TAB>equation<TAB>x0:lo:hi[,x1:lo:hi...]`.
BenchmarkEquation parse_corpus_line(const std::string& line, std::size_t line_no = 0);

/// Loads a corpus manifest; empty lines and lines starting with '#' are
/// skipped.
std::vector<BenchmarkEquation> load_corpus(const std::string& path);

/// Samples `rows` records with x drawn uniformly from the equation's ranges
/// and y = equation(x). Rows with a non-finite y are redrawn; more than
/// 100 * rows attempts raise UnsatisfiableRanges. Deterministic per seed.
Dataset sample_dataset(const BenchmarkEquation& eq, std::size_t rows, std::uint64_t rng_seed);

/// Multiplies every cell (x and y alike) by an independent uniform draw
/// from [1 - rel_noise, 1 + rel_noise]. rel_noise 0 returns the input
/// unchanged.
Dataset add_noise(const Dataset& data, double rel_noise, std::uint64_t rng_seed);

/// Random disjoint partition covering all rows. Partition sizes are
/// floor-rounded with the remainder going to train. Throws TooFewRows when
/// a partition would be empty.
DataSplits split_dataset(const Dataset& data, std::array<double, 3> fractions,
                         std::uint64_t rng_seed);

struct SweepSpec {
    enum class Kind { None, Iterations, Noise, Size } kind = Kind::None;
    std::vector<double> values; // noise levels or dataset sizes

    static SweepSpec none() { return {}; }
    static SweepSpec iterations() { return {Kind::Iterations, {}}; }
    static SweepSpec noise() { return {Kind::Noise, {0.0, 0.1, 0.3, 0.5, 1.0}}; }
    static SweepSpec size() { return {Kind::Size, {10, 20, 50, 100, 200, 300, 500}}; }
};

struct ExperimentConfig {
    std::vector<BenchmarkEquation> equations;
    std::size_t rows = 300;
    std::array<double, 3> split{0.6, 0.2, 0.2};
    double gate_mse = 0.001;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<MethodSpec> methods; // empty selects all six methods
    double noise = 0.0;
    GpConfig gp;
    RedConfig red;
    std::string external_command; // when set, replaces the built-in engine
    SweepSpec sweep;
    int jobs = 1;

    void validate() const;
    std::vector<MethodSpec> resolved_methods() const;
};

/// Reads an experiment configuration from a JSON file. The corpus manifest
/// is referenced by path and loaded relative to the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);

/// Results of one grid cell: one dataset instance (equation x seed, plus
/// the sweep coordinate) with every method's run.
struct CellResult {
    std::string dataset_id;
    std::uint64_t seed = 0;
    double sweep_value = 0.0; // meaning depends on the sweep kind
    bool has_sweep_value = false;
    bool gated = false; // Classic missed the error gate; methods were run
    double classic_test_mse = 0.0;
    std::vector<RunResult> runs;

    const RunResult* run(std::string_view method) const;
};

struct ExperimentReport {
    SweepSpec::Kind sweep_kind = SweepSpec::Kind::None;
    double gate_mse = 0.001;
    std::vector<std::string> method_names;
    std::vector<CellResult> cells;
};

/// Runs the full protocol: per (equation, seed) sample, perturb, split, run
/// Classic, and when Classic's test MSE misses the gate run every other
/// configured method seeded with Classic's best equation. Cell failures are
/// recorded, never fatal. Cells may run on `jobs` threads; per-cell RNG
/// streams keep results independent of scheduling.
ExperimentReport run_experiment(const ExperimentConfig& config);

// ---- aggregation ----

struct MethodSummary {
    std::string method;
    std::size_t completed = 0; // cells with at least one equation
    std::size_t attempted = 0; // cells the method ran on
    std::size_t gated = 0;     // Classic only: cells with test MSE above the gate
    double mse_q2 = 0.0;
    double mse_q3 = 0.0;
    double operators_q2 = 0.0;
    double runtime_q2 = 0.0;
    double p_vs_red = 0.0; // Wilcoxon signed-rank, NaN when unavailable
};

/// Per-method summary over gated cells (Table-style rows).
std::vector<MethodSummary> summarize_methods(const ExperimentReport& report);

/// Pooled pairwise win-ratio matrix over gated cells; entry (i, j) is the
/// ratio of method i against method j.
std::vector<std::vector<double>> win_ratio_matrix(const ExperimentReport& report);

struct IterationCurve {
    std::vector<double> mean_norm_train; // index 0 = iteration 1
    std::vector<double> mean_norm_test;
    std::vector<double> mean_operators;
    std::size_t runs = 0; // refinement runs aggregated
};

/// Mean per-iteration curves over the gated refinement runs, forward-filled
/// to `iterations` and normalized per run so each error curve peaks at 1.
IterationCurve iteration_curve(const ExperimentReport& report, int iterations);

struct SweepRow {
    double sweep_value = 0.0;
    std::string method;
    std::size_t completed = 0;
    double train_mse_q2 = 0.0;
    double test_mse_q2 = 0.0;
    double operators_q2 = 0.0;
};

std::vector<SweepRow> sweep_rows(const ExperimentReport& report);

// ---- persistence ----

void write_raw_jsonl(const ExperimentReport& report, std::ostream& out);
void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_win_matrix_csv(const ExperimentReport& report, std::ostream& out);
void write_sweep_csv(const ExperimentReport& report, std::ostream& out);

/// Writes raw.jsonl, report.csv, win_ratio.csv and (for sweep runs)
/// sweep.csv into `directory`, creating it if needed.
void write_report_files(const ExperimentReport& report, const std::string& directory);

} // namespace red

#endif
