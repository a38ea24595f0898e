#pragma once

#include <random>
#include <vector>

#include "glora/sites.hpp"
#include "glora/tensor.hpp"

namespace glora {

// Hard 0/1 gate: 1 iff score >= tau. tau must be positive.
bool indicator(double score, double tau);

struct GateState {
    Tensor score;  // scalar; optimizer-visible iff trainable
    double tau = 0.1;
    bool trainable = true;

    bool active() const { return indicator(score.value(), tau); }
    void set_score(double v) { (*score.data)[0] = v; }
};

enum class AdapterKind { LoRA, DoRA };

const char* to_string(AdapterKind kind);
AdapterKind adapter_kind_from(const std::string& name);

// One low-rank block at a site: y = x*w0 + g*(alpha/rank)*(x*a)*b for LoRA,
// or the magnitude/direction reparameterization for DoRA. w0 stays outside
// the block and is never written or differentiated through it.
struct AdapterBlock {
    SiteId site;
    AdapterKind kind = AdapterKind::LoRA;
    int rank = 1;
    double alpha = 1.0;
    Tensor a;          // [m, rank]
    Tensor b;          // [rank, n]
    Tensor magnitude;  // [n], DoRA only
    GateState gate;

    // Straight-through controls. `ste` routes the relaxation gradient to the
    // score; `ste_clip` (>0) zeroes that gradient when |score - tau| exceeds
    // the window; `dark_grads` lets a,b of a gated-off LoRA block keep
    // receiving their would-be-active gradients (DoRA ignores it — the whole
    // reparameterization stays frozen while off).
    bool ste = true;
    double ste_clip = 0.0;
    bool dark_grads = false;

    double eff_scale() const { return alpha / rank; }

    static AdapterBlock make(SiteId site, AdapterKind kind, const Tensor& w0, int rank, double alpha, double tau,
                             double s_init, std::mt19937_64& rng);
};

// Forward through a gated block. Gate off returns the plain x*w0 product —
// bit-identical to the adapter-free path, with the adapter factors never
// evaluated into the output. The score still receives its straight-through
// gradient either way: d(loss)/d(score) equals the derivative of the
// relaxation y(m) = x*w0 + m*(y_on - x*w0) at m = gate, with the indicator's
// derivative taken as 1.
Tensor gated_lora_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk);
Tensor gated_dora_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk);
Tensor gated_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk);

enum class RegKind { l1, l2, hinge };

const char* to_string(RegKind kind);
RegKind reg_kind_from(const std::string& name);

struct RegularizerSpec {
    RegKind kind = RegKind::l1;
    double lambda = 0.0;
    double tau = 0.1;  // hinge only

    void validate() const;
};

// l1: lambda*sum|s|; l2: lambda*sum s^2; hinge: lambda*sum max(0, s - tau).
// Subgradients: lambda*sign(s) with sign(0)=0; 2*lambda*s; lambda*[s > tau].
Tensor regularizer_value(const std::vector<Tensor>& scores, const RegularizerSpec& spec);

// task_loss + regularizer_value(scores, spec); terms stay separately readable.
Tensor total_loss(const Tensor& task_loss, const std::vector<Tensor>& scores, const RegularizerSpec& spec);

struct ActiveStats {
    int count = 0;
    int total = 0;
    double percent = 0.0;  // 100*count/total
};

ActiveStats active_fraction(const std::vector<GateState>& gates);

struct GateSnapshot {
    SiteId site;
    double score = 0.0;
    bool active = false;
};

}  // namespace glora
