#include "glora/optim.hpp"

#include <cmath>
#include <numbers>

namespace glora {

const char* to_string(OptimKind kind) { return kind == OptimKind::sgd_momentum ? "sgd_momentum" : "adamw"; }

OptimKind optim_kind_from(const std::string& name) {
    if (name == "sgd_momentum" || name == "sgd") return OptimKind::sgd_momentum;
    if (name == "adamw") return OptimKind::adamw;
    throw ConfigError("unknown optimizer '" + name + "' (want sgd_momentum|adamw)");
}

void OptimSpec::validate() const {
    if (lr <= 0) throw ConfigError("optimizer lr must be positive");
    if (weight_decay < 0) throw ConfigError("optimizer weight_decay must be >= 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("optimizer momentum must be in [0,1)");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("optimizer betas must be in [0,1)");
    if (eps <= 0) throw ConfigError("optimizer eps must be positive");
}

void ScheduleSpec::validate() const {
    if (base_lr <= 0) throw ConfigError("schedule base_lr must be positive");
    if (warmup_steps < 0) throw ConfigError("schedule warmup_steps must be >= 0");
    if (total_steps <= 0) throw ConfigError("schedule total_steps must be positive");
    if (warmup_steps >= total_steps) throw ConfigError("schedule warmup_steps must be below total_steps");
    if (floor < 0 || floor > base_lr) throw ConfigError("schedule floor must be in [0, base_lr]");
}

double cosine_warmup_lr(int step, const ScheduleSpec& spec) {
    spec.validate();
    if (step < 0 || step > spec.total_steps) {
        throw ContractError("schedule step " + std::to_string(step) + " outside [0, " + std::to_string(spec.total_steps) + "]");
    }
    if (step < spec.warmup_steps) {
        return spec.base_lr * step / spec.warmup_steps;
    }
    const double progress = static_cast<double>(step - spec.warmup_steps) / (spec.total_steps - spec.warmup_steps);
    return spec.floor + (spec.base_lr - spec.floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Optimizer::Optimizer(OptimSpec spec, std::vector<ParamRef> params) : spec_(spec), params_(std::move(params)) {
    spec_.validate();
    slot1_.reserve(params_.size());
    for (const auto& p : params_) slot1_.emplace_back(p.tensor.numel(), 0.0);
    if (spec_.kind == OptimKind::adamw) {
        slot2_.reserve(params_.size());
        for (const auto& p : params_) slot2_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Optimizer::step(double lr) {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamRef& p = params_[i];
        if (p.tensor.numel() != slot1_[i].size()) {
            throw ContractError("optimizer state shape drifted for " + p.name);
        }
        const double eff_lr = lr * p.lr_scale;
        const double wd = p.decay_exempt ? 0.0 : spec_.weight_decay;
        double* w = p.tensor.ptr();
        const std::size_t n = p.tensor.numel();
        const bool has_grad = static_cast<bool>(p.tensor.grad);
        if (spec_.kind == OptimKind::sgd_momentum) {
            double* v = slot1_[i].data();
            for (std::size_t j = 0; j < n; ++j) {
                const double g = (has_grad ? (*p.tensor.grad)[j] : 0.0) + wd * w[j];
                v[j] = spec_.momentum * v[j] + g;
                w[j] -= eff_lr * v[j];
            }
        } else {
            double* m = slot1_[i].data();
            double* v = slot2_[i].data();
            const double bc1 = 1.0 - std::pow(spec_.beta1, t_);
            const double bc2 = 1.0 - std::pow(spec_.beta2, t_);
            for (std::size_t j = 0; j < n; ++j) {
                const double g = has_grad ? (*p.tensor.grad)[j] : 0.0;
                m[j] = spec_.beta1 * m[j] + (1.0 - spec_.beta1) * g;
                v[j] = spec_.beta2 * v[j] + (1.0 - spec_.beta2) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                w[j] -= eff_lr * (mhat / (std::sqrt(vhat) + spec_.eps) + wd * w[j]);
            }
        }
    }
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace glora
