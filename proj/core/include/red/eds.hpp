#ifndef RED_EDS_HPP
#define RED_EDS_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "red/dataset.hpp"
#include "red/expression.hpp"
#include "red/residual.hpp"

namespace red {

/// Fitting target: per-row values plus a validity mask. Only valid rows
/// take part in fitting.
struct FitTarget {
    std::vector<double> values;
    std::vector<bool> valid;

    static FitTarget from_column(const std::vector<double>& y);
    static FitTarget from_residual(const ResidualTarget& residual);

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (bool b : valid) {
            n += b ? 1 : 0;
        }
        return n;
    }
};

struct FitOutcome {
    Expression expr;
    /// Set when the winner is a bare leaf; residual refinement of such an
    /// equation has nothing to decompose.
    bool no_operator_prediction = false;
    /// MSE of the returned expression on the valid fitting rows.
    double train_mse = 0.0;
};

/// An equation discovery capability: anything that maps a dataset and a
/// target column to a candidate equation. fit() either returns a valid
/// Expression or throws a typed error; it must not bring down the host.
class EdsModel {
public:
    virtual ~EdsModel() = default;
    virtual FitOutcome fit(const Dataset& data, const FitTarget& target) = 0;
    /// Re-keys the model's randomness. No-op for models without any.
    virtual void reseed(std::uint64_t seed) = 0;
    virtual std::string name() const = 0;
};

struct GpConfig {
    std::size_t population_size = 1000;
    std::size_t generations = 30;
    std::size_t tournament_size = 7;
    double crossover_prob = 0.7;
    double mutation_prob = 0.2;
    int max_depth = 8;
    double parsimony_coefficient = 0.001;
    std::vector<NodeOp> operator_set = default_operator_set();
    std::uint64_t rng_seed = 0;

    /// Search operators enabled by default: arithmetic plus the unary
    /// functions. Power is parseable and evaluable everywhere but excluded
    /// from search, where it mostly produces numeric blowups.
    static std::vector<NodeOp> default_operator_set();

    /// Throws std::invalid_argument when the invariants do not hold
    /// (crossover_prob + mutation_prob <= 1, population >= 2 * tournament).
    void validate() const;
};

/// Builds a start population: the first half is drawn uniformly with
/// replacement from `seeds` (truncated to max_depth), the rest is ramped
/// half-and-half random initialization.
std::vector<Expression> seed_population(const GpConfig& config, const std::vector<Expression>& seeds,
                                        std::size_t variable_count, std::mt19937_64& rng);

/// Cuts every branch deeper than max_depth, replacing overflow operators
/// with random leaves.
Expression truncate_to_depth(const Expression& expr, int max_depth, std::size_t variable_count,
                             std::mt19937_64& rng);

/// Tree genetic programming engine. Deterministic for a fixed seed.
class BuiltinGp : public EdsModel {
public:
    explicit BuiltinGp(GpConfig config);

    FitOutcome fit(const Dataset& data, const FitTarget& target) override;
    void reseed(std::uint64_t seed) override { config_.rng_seed = seed; }
    std::string name() const override { return "builtin-gp"; }

    const GpConfig& config() const noexcept { return config_; }
    void set_seeds(std::vector<Expression> seeds) { seeds_ = std::move(seeds); }

private:
    GpConfig config_;
    std::vector<Expression> seeds_;
};

struct RefitOutcome {
    Expression expr;
    bool no_constants = false;
    bool singular_update = false;
    double mse_before = 0.0;
    double mse_after = 0.0;
};

/// Refits all Constant nodes with damped least squares (finite-difference
/// Jacobian, Levenberg-Marquardt damping schedule). Never returns constants
/// with a worse MSE than the input; expressions without constants come back
/// unchanged with the no_constants flag set.
RefitOutcome refit_constants(const Expression& expr, const Dataset& data,
                             const FitTarget& target);

/// Derives an independent RNG stream from a base seed and salt values.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t base, std::string_view salt);

} // namespace red

#endif
