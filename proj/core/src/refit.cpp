#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "red/eds.hpp"

namespace red {

namespace {

constexpr double kLambdaInit = 1e-3;
constexpr double kLambdaGrow = 10.0;
constexpr double kLambdaShrink = 0.1;
constexpr double kLambdaMax = 1e12;
constexpr std::size_t kMaxIterations = 100;
constexpr double kRelativeImprovementStop = 1e-10;

double masked_mse(const std::vector<double>& prediction, const FitTarget& target,
                  const std::vector<std::size_t>& rows) {
    double sse = 0.0;
    for (std::size_t r : rows) {
        const double p = prediction[r];
        if (!std::isfinite(p)) {
            return std::numeric_limits<double>::infinity();
        }
        const double d = p - target.values[r];
        sse += d * d;
    }
    return sse / static_cast<double>(rows.size());
}

} // namespace

RefitOutcome refit_constants(const Expression& expr, const Dataset& data, const FitTarget& target) {
    if (target.values.size() != data.rows()) {
        throw std::invalid_argument("target length must match the dataset");
    }

    RefitOutcome out;
    out.expr = expr;

    const std::vector<NodeId> const_nodes = expr.constant_nodes();
    const std::size_t k = const_nodes.size();
    if (k == 0) {
        out.no_constants = true;
        const std::vector<double> pred = evaluate(expr, data);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < target.values.size(); ++r) {
            if (target.valid[r] && std::isfinite(pred[r])) rows.push_back(r);
        }
        out.mse_before = out.mse_after = rows.empty() ? std::numeric_limits<double>::infinity()
                                                      : masked_mse(pred, target, rows);
        return out;
    }

    // The fitting row set is fixed up front: rows with a valid target where
    // the initial parameter vector evaluates to something finite. Candidate
    // steps that break a row are rejected via an infinite MSE.
    std::vector<double> theta(k);
    for (std::size_t i = 0; i < k; ++i) {
        theta[i] = expr.node(const_nodes[i]).value;
    }

    const std::vector<double> initial_pred = evaluate(expr, data);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < target.values.size(); ++r) {
        if (target.valid[r] && std::isfinite(initial_pred[r])) {
            rows.push_back(r);
        }
    }
    if (rows.size() < k + 1) {
        out.singular_update = true;
        out.mse_before = out.mse_after = std::numeric_limits<double>::infinity();
        return out;
    }

    auto predict = [&](const std::vector<double>& params) {
        return evaluate(expr.with_constants(params), data);
    };

    double mse = masked_mse(initial_pred, target, rows);
    out.mse_before = mse;

    const std::size_t m = rows.size();
    double lambda = kLambdaInit;
    bool ever_stepped = false;
    bool ever_singular = false;

    for (std::size_t iter = 0; iter < kMaxIterations && lambda <= kLambdaMax; ++iter) {
        // Residuals and central-difference Jacobian at theta.
        const std::vector<double> pred = predict(theta);
        Eigen::VectorXd residual(m);
        for (std::size_t i = 0; i < m; ++i) {
            residual(static_cast<Eigen::Index>(i)) = pred[rows[i]] - target.values[rows[i]];
        }
        Eigen::MatrixXd jacobian(m, k);
        bool jac_ok = true;
        for (std::size_t j = 0; j < k && jac_ok; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
            std::vector<double> hi = theta;
            std::vector<double> lo = theta;
            hi[j] += h;
            lo[j] -= h;
            const std::vector<double> up = predict(hi);
            const std::vector<double> dn = predict(lo);
            for (std::size_t i = 0; i < m; ++i) {
                const double d = (up[rows[i]] - dn[rows[i]]) / (2.0 * h);
                if (!std::isfinite(d)) {
                    jac_ok = false;
                    break;
                }
                jacobian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
            }
        }
        if (!jac_ok) {
            ever_singular = true;
            break;
        }

        const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
        const Eigen::VectorXd g = jacobian.transpose() * residual;

        bool stepped = false;
        while (lambda <= kLambdaMax) {
            Eigen::MatrixXd damped = jtj;
            for (std::size_t j = 0; j < k; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                damped(jj, jj) += lambda * std::max(jtj(jj, jj), 1e-12);
            }
            const Eigen::VectorXd delta = damped.ldlt().solve(-g);
            if (!delta.allFinite()) {
                ever_singular = true;
                lambda *= kLambdaGrow;
                continue;
            }
            std::vector<double> trial = theta;
            for (std::size_t j = 0; j < k; ++j) {
                trial[j] += delta(static_cast<Eigen::Index>(j));
            }
            const double trial_mse = masked_mse(predict(trial), target, rows);
            if (trial_mse < mse) {
                const double improvement = (mse - trial_mse) / std::max(mse, 1e-300);
                theta = std::move(trial);
                mse = trial_mse;
                lambda *= kLambdaShrink;
                stepped = true;
                ever_stepped = true;
                if (improvement < kRelativeImprovementStop) {
                    lambda = kLambdaMax * kLambdaGrow; // converged
                }
                break;
            }
            lambda *= kLambdaGrow;
        }
        if (!stepped) {
            break;
        }
    }

    out.expr = expr;
    std::vector<double> final_values = theta;
    out.expr = expr.with_constants(final_values);
    out.mse_after = mse;
    out.singular_update = ever_singular && !ever_stepped;
    if (out.singular_update) {
        out.expr = expr; // fall back to the input constants
        out.mse_after = out.mse_before;
    }
    return out;
}

} // namespace red
