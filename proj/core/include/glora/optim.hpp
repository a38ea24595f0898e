#pragma once

#include <string>
#include <vector>

#include "glora/tensor.hpp"

namespace glora {

enum class OptimKind { sgd_momentum, adamw };

const char* to_string(OptimKind kind);
OptimKind optim_kind_from(const std::string& name);

struct OptimSpec {
    OptimKind kind = OptimKind::sgd_momentum;
    double lr = 0.005;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9, beta2 = 0.999;  // adamw
    double weight_decay = 0.0;
    double eps = 1e-8;

    void validate() const;
};

struct ScheduleSpec {
    double base_lr = 0.005;
    int warmup_steps = 500;
    int total_steps = 2000;
    double floor = 0.0;

    void validate() const;
};

// Linear 0 -> base_lr over warmup, then cosine from base_lr down to floor at
// total_steps. Steps outside [0, total_steps] are a contract error.
double cosine_warmup_lr(int step, const ScheduleSpec& spec);

struct ParamRef {
    std::string name;
    Tensor tensor;
    double lr_scale = 1.0;
    bool decay_exempt = false;  // gate scores are never weight-decayed
};

// Momentum SGD (v = mu*v + g, p -= lr*v, decay folded into g) or decoupled
// AdamW. Frozen tensors are simply not registered. State is keyed by
// registration order, so the parameter list must stay fixed across steps.
class Optimizer {
public:
    Optimizer(OptimSpec spec, std::vector<ParamRef> params);

    void step(double lr);
    void zero_grad();
    const std::vector<ParamRef>& params() const { return params_; }
    int steps_taken() const { return t_; }

private:
    OptimSpec spec_;
    std::vector<ParamRef> params_;
    std::vector<std::vector<double>> slot1_;  // sgd velocity / adam first moment
    std::vector<std::vector<double>> slot2_;  // adam second moment
    int t_ = 0;
};

}  // namespace glora
