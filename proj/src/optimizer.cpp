#include "kern/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace kern {

const char* to_string(OptimizerConfig::Kind kind) {
    return kind == OptimizerConfig::Kind::Sgd ? "sgd" : "adam";
}

OptimizerConfig::Kind optimizer_kind_from_string(const std::string& text) {
    if (text == "sgd") return OptimizerConfig::Kind::Sgd;
    if (text == "adam") return OptimizerConfig::Kind::Adam;
    throw Error("config", "unknown optimizer '" + text + "' (expected sgd or adam)");
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
    if (config_.kind == OptimizerConfig::Kind::Adam) {
        first_moment_.reserve(params_.size());
        second_moment_.reserve(params_.size());
        for (const Parameter* p : params_) {
            first_moment_.emplace_back(p->size(), 0.0);
            second_moment_.emplace_back(p->size(), 0.0);
        }
    }
}

void Optimizer::step() {
    for (const Parameter* p : params_)
        for (const double g : p->grad)
            if (!std::isfinite(g))
                throw Error("train", "non-finite gradient in parameter '" + p->name + "'");

    ++step_count_;
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerConfig::Kind::Sgd) {
        for (Parameter* p : params_)
            for (std::size_t i = 0; i < p->size(); ++i) p->value[i] -= lr * p->grad[i];
        return;
    }

    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter* p = params_[k];
        auto& m = first_moment_[k];
        auto& v = second_moment_[k];
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double g = p->grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / bias1;
            const double vhat = v[i] / bias2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }
}

void Optimizer::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

double finite_diff_check(std::span<Parameter* const> params,
                         const std::function<double()>& loss_value,
                         const std::function<void()>& accumulate_grads,
                         double eps) {
    for (Parameter* p : params) p->zero_grad();
    accumulate_grads();

    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double up = loss_value();
            p->value[i] = saved - eps;
            const double down = loss_value();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

} // namespace kern
