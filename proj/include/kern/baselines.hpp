#pragma once

#include <span>
#include <string>
#include <vector>

#include "kern/error.hpp"

namespace kern {

std::vector<double> mean_forecast(std::span<const double> input, int horizon);
std::vector<double> last_forecast(std::span<const double> input, int horizon);

/// Autoregression with intercept, fit by least squares on one-step lags.
struct ArFit {
    int order = 0;
    double intercept = 0.0;
    std::vector<double> coefficients; // lag 1..p
    bool used_ridge = false;
};

ArFit ar_fit(std::span<const double> input, int order);
std::vector<double> ar_forecast(const ArFit& fit, std::span<const double> input, int horizon);

/// Vector autoregression over a set of aligned series (all elements of one
/// user group, in the harness). Per-equation least squares with a small
/// ridge term for stability.
struct VarFit {
    int order = 0;
    int dim = 0;
    // equation-major: for each target series, intercept then dim*order lag
    // coefficients ordered (lag 1: all series)(lag 2: all series)...
    std::vector<double> intercepts;
    std::vector<std::vector<double>> coefficients;
};

VarFit var_fit(const std::vector<std::vector<double>>& inputs, int order);
std::vector<std::vector<double>> var_forecast(const VarFit& fit,
                                              const std::vector<std::vector<double>>& inputs,
                                              int horizon);

/// Simple exponential smoothing; alpha picked from {0.01..0.99} by in-sample
/// one-step MAE, flat forecast at the final level.
struct EsFit {
    double alpha = 0.0;
    double level = 0.0;
};

EsFit es_fit(std::span<const double> input);
EsFit es_fit_with_alpha(std::span<const double> input, double alpha);
std::vector<double> es_forecast(const EsFit& fit, int horizon);

/// Least-squares curve fits on the absolute grid index: linear {1, t},
/// cyclic {1, sin, cos} at the annual period, geostyle {1, t, sin, cos}.
enum class BasisKind { Linear, Cyclic, GeoStyle };

const char* to_string(BasisKind kind);

struct BasisFit {
    BasisKind kind = BasisKind::Linear;
    int grid_period = 24;
    std::vector<double> weights;
    bool used_ridge = false;
};

BasisFit basis_fit(std::span<const double> input, long t_start, BasisKind kind, int grid_period);
std::vector<double> basis_forecast(const BasisFit& fit, long t_start, int count);

/// Shared least-squares core (column-pivoted QR; falls back to ridge normal
/// equations when the design is rank-deficient). `ridge` > 0 adds mu*I
/// unconditionally. Exposed for the VAR/AR/basis fits and their tests.
struct LeastSquaresResult {
    std::vector<double> weights;
    bool used_ridge = false;
};
LeastSquaresResult least_squares(const std::vector<std::vector<double>>& rows,
                                 std::span<const double> targets, double ridge = 0.0);

} // namespace kern
