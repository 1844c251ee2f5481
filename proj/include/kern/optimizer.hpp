#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kern/tape.hpp"

namespace kern {

struct OptimizerConfig {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

const char* to_string(OptimizerConfig::Kind kind);
OptimizerConfig::Kind optimizer_kind_from_string(const std::string& text);

/// First-order update over a fixed parameter list. A non-finite gradient
/// aborts the step before any parameter is touched and names the offender.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, std::vector<Parameter*> params);

    void step();
    void zero_grad();
    const std::vector<Parameter*>& params() const { return params_; }

private:
    OptimizerConfig config_;
    std::vector<Parameter*> params_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    long step_count_ = 0;
};

/// Worst relative disagreement between accumulated analytic gradients and
/// central differences, coordinate by coordinate over every parameter.
/// `loss_value` must be a pure function of the current parameter values;
/// `accumulate_grads` must run forward+backward exactly once.
double finite_diff_check(std::span<Parameter* const> params,
                         const std::function<double()>& loss_value,
                         const std::function<void()>& accumulate_grads,
                         double eps = 1e-5);

} // namespace kern
