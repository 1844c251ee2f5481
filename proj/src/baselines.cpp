#include "kern/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

namespace kern {

namespace {
constexpr double kRidgeFallback = 1e-8;
}

std::vector<double> mean_forecast(std::span<const double> input, int horizon) {
    if (input.empty()) throw Error("data", "mean_forecast: empty input");
    const double m = std::accumulate(input.begin(), input.end(), 0.0) /
                     static_cast<double>(input.size());
    return std::vector<double>(static_cast<std::size_t>(horizon), m);
}

std::vector<double> last_forecast(std::span<const double> input, int horizon) {
    if (input.empty()) throw Error("data", "last_forecast: empty input");
    return std::vector<double>(static_cast<std::size_t>(horizon), input.back());
}

LeastSquaresResult least_squares(const std::vector<std::vector<double>>& rows,
                                 std::span<const double> targets, double ridge) {
    if (rows.size() != targets.size() || rows.empty())
        throw Error("data", "least_squares: design/target size mismatch");
    const std::size_t n = rows.size();
    const std::size_t k = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != k) throw Error("data", "least_squares: ragged design matrix");

    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y(static_cast<Eigen::Index>(i)) = targets[i];
        for (std::size_t j = 0; j < k; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }

    LeastSquaresResult out;
    Eigen::VectorXd w;
    bool solved = false;
    if (ridge == 0.0) {
        const auto qr = x.colPivHouseholderQr();
        if (qr.rank() == static_cast<Eigen::Index>(k)) {
            w = qr.solve(y);
            solved = true;
        }
    }
    if (!solved) {
        // ridge normal equations: (X'X + mu I) w = X'y
        const double mu = ridge == 0.0 ? kRidgeFallback : ridge;
        out.used_ridge = ridge == 0.0;
        Eigen::MatrixXd gram = x.transpose() * x;
        gram.diagonal().array() += mu;
        w = gram.ldlt().solve(x.transpose() * y);
    }
    out.weights.assign(w.data(), w.data() + w.size());
    return out;
}

ArFit ar_fit(std::span<const double> input, int order) {
    if (order < 1) throw Error("config", "ar_fit: order must be >= 1");
    const int n = static_cast<int>(input.size());
    if (n <= order)
        throw Error("data", "ar_fit: need more than " + std::to_string(order) + " points");

    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    for (int t = order; t < n; ++t) {
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(order) + 1);
        row.push_back(1.0);
        for (int lag = 1; lag <= order; ++lag)
            row.push_back(input[static_cast<std::size_t>(t - lag)]);
        rows.push_back(std::move(row));
        targets.push_back(input[static_cast<std::size_t>(t)]);
    }
    const auto sol = least_squares(rows, targets);

    ArFit fit;
    fit.order = order;
    fit.used_ridge = sol.used_ridge;
    fit.intercept = sol.weights[0];
    fit.coefficients.assign(sol.weights.begin() + 1, sol.weights.end());
    return fit;
}

std::vector<double> ar_forecast(const ArFit& fit, std::span<const double> input, int horizon) {
    if (static_cast<int>(input.size()) < fit.order)
        throw Error("data", "ar_forecast: input shorter than the model order");
    std::vector<double> history(input.begin(), input.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        double v = fit.intercept;
        for (int lag = 1; lag <= fit.order; ++lag)
            v += fit.coefficients[static_cast<std::size_t>(lag - 1)] *
                 history[history.size() - static_cast<std::size_t>(lag)];
        history.push_back(v);
        out.push_back(v);
    }
    return out;
}

VarFit var_fit(const std::vector<std::vector<double>>& inputs, int order) {
    if (order < 1) throw Error("config", "var_fit: order must be >= 1");
    const int dim = static_cast<int>(inputs.size());
    if (dim < 2) throw Error("data", "var_fit: need at least two series (use AR for one)");
    const std::size_t n = inputs.front().size();
    for (const auto& s : inputs)
        if (s.size() != n) throw Error("data", "var_fit: series lengths are not aligned");
    if (n <= static_cast<std::size_t>(order))
        throw Error("data", "var_fit: series shorter than the model order");

    std::vector<std::vector<double>> rows;
    for (std::size_t t = static_cast<std::size_t>(order); t < n; ++t) {
        std::vector<double> row;
        row.reserve(1 + static_cast<std::size_t>(dim * order));
        row.push_back(1.0);
        for (int lag = 1; lag <= order; ++lag)
            for (int s = 0; s < dim; ++s)
                row.push_back(inputs[static_cast<std::size_t>(s)][t - static_cast<std::size_t>(lag)]);
        rows.push_back(std::move(row));
    }

    VarFit fit;
    fit.order = order;
    fit.dim = dim;
    for (int eq = 0; eq < dim; ++eq) {
        std::vector<double> targets;
        targets.reserve(rows.size());
        for (std::size_t t = static_cast<std::size_t>(order); t < n; ++t)
            targets.push_back(inputs[static_cast<std::size_t>(eq)][t]);
        const auto sol = least_squares(rows, targets, kRidgeFallback);
        fit.intercepts.push_back(sol.weights[0]);
        fit.coefficients.emplace_back(sol.weights.begin() + 1, sol.weights.end());
    }
    return fit;
}

std::vector<std::vector<double>> var_forecast(const VarFit& fit,
                                              const std::vector<std::vector<double>>& inputs,
                                              int horizon) {
    if (static_cast<int>(inputs.size()) != fit.dim)
        throw Error("data", "var_forecast: series count does not match the fit");
    auto history = inputs;
    std::vector<std::vector<double>> out(static_cast<std::size_t>(fit.dim));
    for (int t = 0; t < horizon; ++t) {
        std::vector<double> next(static_cast<std::size_t>(fit.dim));
        for (int eq = 0; eq < fit.dim; ++eq) {
            double v = fit.intercepts[static_cast<std::size_t>(eq)];
            const auto& coef = fit.coefficients[static_cast<std::size_t>(eq)];
            std::size_t c = 0;
            for (int lag = 1; lag <= fit.order; ++lag)
                for (int s = 0; s < fit.dim; ++s) {
                    const auto& h = history[static_cast<std::size_t>(s)];
                    v += coef[c++] * h[h.size() - static_cast<std::size_t>(lag)];
                }
            next[static_cast<std::size_t>(eq)] = v;
        }
        for (int s = 0; s < fit.dim; ++s) {
            history[static_cast<std::size_t>(s)].push_back(next[static_cast<std::size_t>(s)]);
            out[static_cast<std::size_t>(s)].push_back(next[static_cast<std::size_t>(s)]);
        }
    }
    return out;
}

EsFit es_fit_with_alpha(std::span<const double> input, double alpha) {
    if (input.empty()) throw Error("data", "es_fit: empty input");
    double level = input[0];
    for (std::size_t t = 1; t < input.size(); ++t) level = alpha * input[t] + (1.0 - alpha) * level;
    return {alpha, level};
}

EsFit es_fit(std::span<const double> input) {
    if (input.empty()) throw Error("data", "es_fit: empty input");
    double best_alpha = 0.01;
    double best_mae = std::numeric_limits<double>::infinity();
    for (int step = 1; step <= 99; ++step) {
        const double alpha = static_cast<double>(step) / 100.0;
        double level = input[0];
        double abs_err = 0.0;
        for (std::size_t t = 1; t < input.size(); ++t) {
            abs_err += std::abs(level - input[t]); // one-step-ahead error
            level = alpha * input[t] + (1.0 - alpha) * level;
        }
        const double mae = input.size() > 1
                               ? abs_err / static_cast<double>(input.size() - 1)
                               : 0.0;
        if (mae < best_mae) {
            best_mae = mae;
            best_alpha = alpha;
        }
    }
    return es_fit_with_alpha(input, best_alpha);
}

std::vector<double> es_forecast(const EsFit& fit, int horizon) {
    return std::vector<double>(static_cast<std::size_t>(horizon), fit.level);
}

const char* to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::Linear: return "linear";
        case BasisKind::Cyclic: return "cyclic";
        case BasisKind::GeoStyle: return "geostyle";
    }
    return "?";
}

namespace {

std::vector<double> basis_row(BasisKind kind, long t, int period) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / period;
    switch (kind) {
        case BasisKind::Linear: return {1.0, static_cast<double>(t)};
        case BasisKind::Cyclic: return {1.0, std::sin(angle), std::cos(angle)};
        case BasisKind::GeoStyle:
            return {1.0, static_cast<double>(t), std::sin(angle), std::cos(angle)};
    }
    throw Error("internal", "basis_row: bad kind");
}

} // namespace

BasisFit basis_fit(std::span<const double> input, long t_start, BasisKind kind, int grid_period) {
    if (grid_period < 1) throw Error("config", "basis_fit: grid period must be positive");
    const std::size_t width = basis_row(kind, 0, grid_period).size();
    if (input.size() < width)
        throw Error("data", "basis_fit: need at least " + std::to_string(width) + " points");

    std::vector<std::vector<double>> rows;
    rows.reserve(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
        rows.push_back(basis_row(kind, t_start + static_cast<long>(i), grid_period));
    const auto sol = least_squares(rows, input);

    BasisFit fit;
    fit.kind = kind;
    fit.grid_period = grid_period;
    fit.weights = sol.weights;
    fit.used_ridge = sol.used_ridge;
    return fit;
}

std::vector<double> basis_forecast(const BasisFit& fit, long t_start, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const auto row = basis_row(fit.kind, t_start + i, fit.grid_period);
        double v = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) v += fit.weights[j] * row[j];
        out.push_back(v);
    }
    return out;
}

} // namespace kern
