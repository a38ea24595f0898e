#include "glora/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "glora/eval.hpp"
#include "glora/ops.hpp"
#include "glora/optim.hpp"

namespace glora {

namespace {

// Distinct deterministic streams derived from the run seed.
constexpr std::uint64_t kAdapterStream = 0x61646170ULL;
constexpr std::uint64_t kBatchStream = 0x62617463ULL;

Tensor gather_images(const Dataset& ds, const std::vector<int>& idx) {
    const int c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    Tensor out(Shape{static_cast<int>(idx.size()), c, h, w});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = ds.images.ptr() + static_cast<std::size_t>(idx[i]) * stride;
        std::copy(src, src + stride, out.ptr() + i * stride);
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    return out;
}

std::vector<ParamRef> collect_trainable(TinyViT& model, double score_lr_scale) {
    std::vector<ParamRef> params;
    model.visit_params([&params](const std::string& name, Tensor& t) {
        if (t.requires_grad) params.push_back({name, t, 1.0, false});
    });
    for (auto& blk : model.adapters) {
        const std::string prefix = "adapters." + to_string(blk.site) + ".";
        if (blk.a.requires_grad) params.push_back({prefix + "a", blk.a, 1.0, false});
        if (blk.b.requires_grad) params.push_back({prefix + "b", blk.b, 1.0, false});
        if (blk.magnitude.defined() && blk.magnitude.requires_grad) {
            params.push_back({prefix + "mag", blk.magnitude, 1.0, false});
        }
    }
    for (auto& blk : model.adapters) {
        if (blk.gate.score.requires_grad) {
            // Gate scores: optional lr override, never weight-decayed.
            params.push_back({"adapters." + to_string(blk.site) + ".score", blk.gate.score, score_lr_scale, true});
        }
    }
    return params;
}

RunResult run_loop(const RunConfig& cfg, TinyViT& model, bool use_reg) {
    const Dataset train = load_dataset(cfg.data.train);
    const Dataset val = load_dataset(cfg.data.val);
    train.validate();
    val.validate();

    std::vector<ParamRef> params = collect_trainable(model, cfg.adapter.score_lr_scale);
    Optimizer opt(cfg.optim, std::move(params));
    std::mt19937_64 batch_rng(cfg.seed ^ kBatchStream);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(train.size()) - 1);

    RegularizerSpec reg = cfg.reg;
    if (!use_reg) reg.lambda = 0.0;
    const std::vector<Tensor> scores = model.scores();

    RunResult result;
    double best = -1.0;
    for (int step = 0; step < cfg.steps; ++step) {
        const double lr = cosine_warmup_lr(step, cfg.schedule);
        std::vector<int> idx(static_cast<std::size_t>(cfg.batch_size));
        for (auto& i : idx) i = pick(batch_rng);
        const Tensor images = gather_images(train, idx);
        const std::vector<int> labels = gather_labels(train, idx);

        MetricsRow row;
        row.step = step;
        row.lr = lr;
        {
            Tape tape;
            TinyViT::Output out = model.forward(images);
            Tensor task = cross_entropy(out.logits, labels);
            Tensor penalty = regularizer_value(scores, reg);
            Tensor total = add(task, penalty);
            row.task_loss = task.value();
            row.reg_loss = penalty.value();
            if (!std::isfinite(total.value())) {
                throw NumericError("step " + std::to_string(step) + ": loss is not finite (task " +
                                   std::to_string(row.task_loss) + ", penalty " + std::to_string(row.reg_loss) + ")");
            }
            backward(total);
            opt.step(lr);
            opt.zero_grad();
        }
        if (!model.adapters.empty()) {
            const ActiveStats st = active_fraction(model.gates());
            row.active_pct = st.percent;
            GateTrajectoryPoint pt;
            pt.step = step;
            pt.active.reserve(model.adapters.size());
            for (const auto& blk : model.adapters) pt.active.push_back(blk.gate.active() ? 1 : 0);
            result.gate_trajectory.push_back(std::move(pt));
        }
        if ((step + 1) % cfg.eval_every == 0 || step == cfg.steps - 1) {
            const double acc = evaluate_top1(model, val);
            row.val_acc = acc;
            result.final_val_acc = acc;
            if (acc > best) {
                best = acc;
                result.best_step = step;
                result.best_val_acc = acc;
                if (cfg.selection == Selection::best_val) {
                    result.best_model = std::make_shared<TinyViT>(model.clone());
                }
            }
        }
        result.timeline.push_back(std::move(row));
    }

    result.final_model = std::make_shared<TinyViT>(model.clone());
    if (cfg.selection == Selection::last || !result.best_model) {
        result.best_model = result.final_model;
        if (cfg.selection == Selection::last) {
            result.best_val_acc = result.final_val_acc;
            result.best_step = cfg.steps - 1;
        }
    }
    if (!model.adapters.empty()) {
        result.final_gates = model.gate_snapshot();
        const ActiveStats st = active_fraction(model.gates());
        result.final_active_count = st.count;
        result.final_active_pct = st.percent;
    }
    return result;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << "step,lr,task_loss,reg_loss,val_acc,active_pct\n";
    char buf[64];
    auto full = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const MetricsRow& r : rows) {
        os << r.step << ',' << full(r.lr) << ',' << full(r.task_loss) << ',' << full(r.reg_loss) << ',';
        if (r.val_acc) os << full(*r.val_acc);
        os << ',';
        std::snprintf(buf, sizeof(buf), "%.2f", r.active_pct);
        os << buf << '\n';
    }
    return os.str();
}

RunResult pretrain(const RunConfig& cfg) {
    cfg.validate();
    TinyViT model(cfg.model, cfg.seed);
    model.set_trainable_pretrain();
    return run_loop(cfg, model, /*use_reg=*/false);
}

RunResult finetune(const RunConfig& cfg, const TinyViT* init) {
    cfg.validate();
    TinyViT model = init ? init->clone() : TinyViT(cfg.model, cfg.seed);
    if (init && !(model.config() == cfg.model)) {
        throw ConfigError("finetune: init checkpoint model config does not match the run config");
    }
    if (model.adapters.empty()) {
        model.attach_adapters(cfg.adapter, cfg.seed ^ kAdapterStream);
    }
    model.set_trainable_finetune();
    return run_loop(cfg, model, /*use_reg=*/true);
}

RunResult random_selection_baseline(int n_active, std::uint64_t selection_seed, const RunConfig& cfg,
                                    const TinyViT* init) {
    cfg.validate();
    TinyViT model = init ? init->clone() : TinyViT(cfg.model, cfg.seed);
    if (!model.adapters.empty()) throw ContractError("random baseline expects an adapter-free init checkpoint");
    model.attach_adapters(cfg.adapter, cfg.seed ^ kAdapterStream);
    const int total = static_cast<int>(model.adapters.size());
    if (n_active < 0 || n_active > total) {
        throw ContractError("random baseline: n_active " + std::to_string(n_active) + " outside [0, " +
                            std::to_string(total) + "]");
    }
    std::vector<int> order(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(selection_seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> on(static_cast<std::size_t>(total), false);
    for (int i = 0; i < n_active; ++i) on[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

    const double on_score = std::max(cfg.adapter.s_init, cfg.adapter.tau);
    for (int i = 0; i < total; ++i) {
        AdapterBlock& blk = model.adapters[static_cast<std::size_t>(i)];
        blk.gate.set_score(on[static_cast<std::size_t>(i)] ? on_score : 0.0);
        blk.gate.trainable = false;
        blk.dark_grads = false;
    }
    model.set_trainable_finetune();
    for (auto& blk : model.adapters) {
        if (!blk.gate.active()) {
            blk.a.requires_grad = false;
            blk.b.requires_grad = false;
            if (blk.magnitude.defined()) blk.magnitude.requires_grad = false;
        }
    }
    return run_loop(cfg, model, /*use_reg=*/false);
}

double evaluate_top1(TinyViT& model, const Dataset& ds, int batch_size) {
    const int n = static_cast<int>(ds.size());
    std::size_t correct = 0;
    for (int start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (int i = start; i < std::min(start + batch_size, n); ++i) idx.push_back(i);
        const Tensor images = gather_images(ds, idx);
        const std::vector<int> labels = gather_labels(ds, idx);
        TinyViT::Output out = model.forward(images);
        correct += static_cast<std::size_t>(std::lround(top1_accuracy(out.logits, labels) * labels.size()));
    }
    return n == 0 ? 0.0 : static_cast<double>(correct) / n;
}

Tensor embed_dataset(TinyViT& model, const Dataset& ds, int batch_size) {
    const int n = static_cast<int>(ds.size());
    const int d = model.config().dim;
    Tensor out(Shape{n, d});
    for (int start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (int i = start; i < std::min(start + batch_size, n); ++i) idx.push_back(i);
        const Tensor images = gather_images(ds, idx);
        TinyViT::Output res = model.forward(images);
        std::copy(res.embedding.ptr(), res.embedding.ptr() + res.embedding.numel(),
                  out.ptr() + static_cast<std::size_t>(start) * d);
    }
    return out;
}

}  // namespace glora
