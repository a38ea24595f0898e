#include "glora/adapters.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "glora/ops.hpp"

namespace glora {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

constexpr double kDoraEps = 1e-8;

void check_block(const Tensor& x, const Tensor& w0, const AdapterBlock& blk) {
    if (w0.ndim() != 2) throw DimensionError("gated forward: w0 must be 2-D, got " + shape_str(w0.shape));
    const int m = w0.dim(0), n = w0.dim(1);
    if (x.last_dim() != m) {
        throw DimensionError("gated forward: input " + shape_str(x.shape) + " does not match w0 " + shape_str(w0.shape));
    }
    if (blk.a.ndim() != 2 || blk.a.dim(0) != m || blk.a.dim(1) != blk.rank || blk.b.ndim() != 2 ||
        blk.b.dim(0) != blk.rank || blk.b.dim(1) != n) {
        throw DimensionError("gated forward: factors " + shape_str(blk.a.shape) + ", " + shape_str(blk.b.shape) +
                             " do not fit w0 " + shape_str(w0.shape) + " at rank " + std::to_string(blk.rank));
    }
    if (blk.kind == AdapterKind::DoRA && (blk.magnitude.ndim() != 1 || blk.magnitude.dim(0) != n)) {
        throw DimensionError("gated forward: DoRA magnitude must be [" + std::to_string(n) + "]");
    }
}

// s*(x*a)*b, values only.
std::shared_ptr<std::vector<double>> lora_delta_raw(const Tensor& x, const AdapterBlock& blk) {
    const auto rows = static_cast<Eigen::Index>(x.rows_flat());
    const int m = x.last_dim();
    const int r = blk.rank;
    const int n = blk.b.dim(1);
    auto out = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * n);
    RowMat xa = MapConst(x.ptr(), rows, m) * MapConst(blk.a.ptr(), m, r);
    MapMat(out->data(), rows, n).noalias() = blk.eff_scale() * (xa * MapConst(blk.b.ptr(), r, n));
    return out;
}

// The reparameterized DoRA weight, values only.
RowMat dora_wprime_raw(const Tensor& w0, const AdapterBlock& blk) {
    const int m = w0.dim(0), n = w0.dim(1);
    RowMat wsum = MapConst(w0.ptr(), m, n);
    wsum.noalias() += blk.eff_scale() * (MapConst(blk.a.ptr(), m, blk.rank) * MapConst(blk.b.ptr(), blk.rank, n));
    for (int j = 0; j < n; ++j) {
        const double norm = wsum.col(j).norm();
        const double denom = norm < kDoraEps ? norm + kDoraEps : norm;
        wsum.col(j) *= blk.magnitude.at(static_cast<std::size_t>(j)) / denom;
    }
    return wsum;
}

// d(loss)/d(score) += <d(loss)/dy, delta>, the relaxation derivative with the
// indicator's slope taken as 1. Replayed before y's producer and after all of
// y's consumers, so y.grad is complete when this runs.
void record_ste(Tape* tape, const AdapterBlock& blk, const Tensor& y, std::shared_ptr<std::vector<double>> delta) {
    Tensor score = blk.gate.score;
    const double sval = score.value();
    const double tau = blk.gate.tau;
    const double clip = blk.ste_clip;
    tape->record([score, y, delta, sval, tau, clip]() mutable {
        if (!y.grad) return;
        if (clip > 0.0 && std::abs(sval - tau) > clip) return;
        double dot = 0.0;
        const std::size_t n = delta->size();
        for (std::size_t i = 0; i < n; ++i) dot += (*y.grad)[i] * (*delta)[i];
        score.ensure_grad();
        (*score.grad)[0] += dot;
    });
}

}  // namespace

bool indicator(double score, double tau) {
    if (tau <= 0.0) throw ConfigError("indicator: tau must be positive, got " + std::to_string(tau));
    return score >= tau;
}

const char* to_string(AdapterKind kind) { return kind == AdapterKind::LoRA ? "lora" : "dora"; }

AdapterKind adapter_kind_from(const std::string& name) {
    if (name == "lora") return AdapterKind::LoRA;
    if (name == "dora") return AdapterKind::DoRA;
    throw ConfigError("unknown adapter kind '" + name + "' (want lora|dora)");
}

AdapterBlock AdapterBlock::make(SiteId site, AdapterKind kind, const Tensor& w0, int rank, double alpha, double tau,
                                double s_init, std::mt19937_64& rng) {
    if (w0.ndim() != 2) throw DimensionError("adapter: w0 must be 2-D, got " + shape_str(w0.shape));
    const int m = w0.dim(0), n = w0.dim(1);
    if (rank < 1 || rank > std::min(m, n)) {
        throw ConfigError("adapter rank " + std::to_string(rank) + " outside [1, min(" + std::to_string(m) + "," +
                          std::to_string(n) + ")] at site " + to_string(site));
    }
    if (alpha <= 0.0) throw ConfigError("adapter alpha must be positive");
    if (tau <= 0.0) throw ConfigError("adapter tau must be positive");
    AdapterBlock blk;
    blk.site = site;
    blk.kind = kind;
    blk.rank = rank;
    blk.alpha = alpha;
    blk.a = Tensor::randn(Shape{m, rank}, rng, 0.02);
    blk.b = Tensor::zeros(Shape{rank, n});
    if (kind == AdapterKind::DoRA) {
        blk.magnitude = Tensor::zeros(Shape{n});
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const double v = w0.at(static_cast<std::size_t>(i) * n + j);
                s += v * v;
            }
            blk.magnitude.at(static_cast<std::size_t>(j)) = std::sqrt(s);
        }
    }
    blk.gate.score = Tensor::scalar(s_init);
    blk.gate.tau = tau;
    return blk;
}

Tensor gated_lora_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk) {
    check_block(x, w0, blk);
    Tape* tape = Tape::active();
    const bool want_ste = tape != nullptr && blk.ste && blk.gate.trainable;
    Tensor base = matmul(x, w0);
    if (blk.gate.active()) {
        Tensor delta = scale(matmul(matmul(x, blk.a), blk.b), blk.eff_scale());
        Tensor y = add(base, delta);
        if (want_ste) {
            y.requires_grad = true;
            record_ste(tape, blk, y, delta.data);
        }
        return y;
    }
    const bool want_dark = tape != nullptr && blk.dark_grads && (blk.a.requires_grad || blk.b.requires_grad);
    if (want_ste || want_dark) {
        base.requires_grad = true;  // downstream ops must deliver d(loss)/d(base) even with a frozen trunk
        if (want_ste) record_ste(tape, blk, base, lora_delta_raw(x, blk));
        if (want_dark) {
            // Off-gate surrogate: a,b receive the gradients they would get if
            // the gate were on; x and the output stay exactly gate-off.
            Tensor a = blk.a, b = blk.b, xin = x, y = base;
            const double s = blk.eff_scale();
            tape->record([a, b, xin, y, s]() mutable {
                if (!y.grad) return;
                const auto rows = static_cast<Eigen::Index>(xin.rows_flat());
                const int m = xin.last_dim(), r = a.dim(1), n = b.dim(1);
                MapConst X(xin.ptr(), rows, m), A(a.ptr(), m, r), B(b.ptr(), r, n), dY(y.grad->data(), rows, n);
                if (a.requires_grad) {
                    a.ensure_grad();
                    MapMat(a.grad->data(), m, r).noalias() += s * (X.transpose() * (dY * B.transpose()));
                }
                if (b.requires_grad) {
                    b.ensure_grad();
                    MapMat(b.grad->data(), r, n).noalias() += s * ((X * A).transpose() * dY);
                }
            });
        }
    }
    return base;
}

Tensor gated_dora_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk) {
    check_block(x, w0, blk);
    if (blk.kind != AdapterKind::DoRA) throw ContractError("gated_dora_forward: block is not DoRA");
    Tape* tape = Tape::active();
    const bool want_ste = tape != nullptr && blk.ste && blk.gate.trainable;
    const auto rows = static_cast<Eigen::Index>(x.rows_flat());
    const int m = w0.dim(0), n = w0.dim(1);
    if (blk.gate.active()) {
        Tensor wsum = add(w0, scale(matmul(blk.a, blk.b), blk.eff_scale()));
        Tensor wprime = mul(col_normalize(wsum, kDoraEps), blk.magnitude);
        Tensor y = matmul(x, wprime);
        if (want_ste) {
            auto delta = std::make_shared<std::vector<double>>(y.numel());
            MapMat d(delta->data(), rows, n);
            d = MapConst(y.ptr(), rows, n);
            d.noalias() -= MapConst(x.ptr(), rows, m) * MapConst(w0.ptr(), m, n);
            y.requires_grad = true;
            record_ste(tape, blk, y, std::move(delta));
        }
        return y;
    }
    Tensor y = matmul(x, w0);
    if (want_ste) {
        RowMat wprime = dora_wprime_raw(w0, blk);
        auto delta = std::make_shared<std::vector<double>>(y.numel());
        MapMat d(delta->data(), rows, n);
        d.noalias() = MapConst(x.ptr(), rows, m) * wprime;
        d -= MapConst(y.ptr(), rows, n);
        y.requires_grad = true;
        record_ste(tape, blk, y, std::move(delta));
    }
    return y;
}

Tensor gated_forward(const Tensor& x, const Tensor& w0, AdapterBlock& blk) {
    return blk.kind == AdapterKind::DoRA ? gated_dora_forward(x, w0, blk) : gated_lora_forward(x, w0, blk);
}

const char* to_string(RegKind kind) {
    switch (kind) {
        case RegKind::l1: return "l1";
        case RegKind::l2: return "l2";
        case RegKind::hinge: return "hinge";
    }
    throw ContractError("unknown regularizer kind");
}

RegKind reg_kind_from(const std::string& name) {
    if (name == "l1") return RegKind::l1;
    if (name == "l2") return RegKind::l2;
    if (name == "hinge") return RegKind::hinge;
    throw ConfigError("unknown regularizer kind '" + name + "' (want l1|l2|hinge)");
}

void RegularizerSpec::validate() const {
    if (lambda < 0.0) throw ConfigError("regularizer lambda must be >= 0");
    if (kind == RegKind::hinge && tau <= 0.0) throw ConfigError("hinge regularizer requires positive tau");
}

Tensor regularizer_value(const std::vector<Tensor>& scores, const RegularizerSpec& spec) {
    spec.validate();
    double v = 0.0;
    bool any_grad = false;
    for (const Tensor& s : scores) {
        const double si = s.value();
        switch (spec.kind) {
            case RegKind::l1: v += std::abs(si); break;
            case RegKind::l2: v += si * si; break;
            case RegKind::hinge: v += std::max(0.0, si - spec.tau); break;
        }
        any_grad = any_grad || s.requires_grad;
    }
    Tensor y = Tensor::scalar(spec.lambda * v);
    y.requires_grad = any_grad;
    if (y.requires_grad && Tape::active()) {
        auto captured = std::make_shared<std::vector<Tensor>>(scores);
        const RegularizerSpec sp = spec;
        Tape::active()->record([captured, y, sp]() mutable {
            if (!y.grad) return;
            const double g0 = (*y.grad)[0];
            for (Tensor& s : *captured) {
                if (!s.requires_grad) continue;
                const double si = s.value();
                double g = 0.0;
                switch (sp.kind) {
                    case RegKind::l1: g = si > 0.0 ? 1.0 : (si < 0.0 ? -1.0 : 0.0); break;
                    case RegKind::l2: g = 2.0 * si; break;
                    case RegKind::hinge: g = si > sp.tau ? 1.0 : 0.0; break;
                }
                s.ensure_grad();
                (*s.grad)[0] += g0 * sp.lambda * g;
            }
        });
    }
    return y;
}

Tensor total_loss(const Tensor& task_loss, const std::vector<Tensor>& scores, const RegularizerSpec& spec) {
    return add(task_loss, regularizer_value(scores, spec));
}

ActiveStats active_fraction(const std::vector<GateState>& gates) {
    if (gates.empty()) throw ContractError("active_fraction: empty gate list");
    ActiveStats st;
    st.total = static_cast<int>(gates.size());
    for (const GateState& g : gates) {
        if (g.active()) ++st.count;
    }
    st.percent = 100.0 * st.count / st.total;
    return st;
}

}  // namespace glora
