#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "glora/data.hpp"
#include "glora/model.hpp"
#include "glora/run_config.hpp"

namespace glora {

struct MetricsRow {
    int step = 0;
    double lr = 0.0;
    double task_loss = 0.0;
    double reg_loss = 0.0;
    std::optional<double> val_acc;  // present on eval steps only
    double active_pct = 0.0;
};

// CSV with columns step,lr,task_loss,reg_loss,val_acc,active_pct; full-
// precision floats so identical runs serialize bit-identically.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct GateTrajectoryPoint {
    int step = 0;
    std::vector<std::uint8_t> active;  // site order
};

struct RunResult {
    std::vector<MetricsRow> timeline;
    std::vector<GateTrajectoryPoint> gate_trajectory;
    std::vector<GateSnapshot> final_gates;
    std::shared_ptr<TinyViT> final_model;
    std::shared_ptr<TinyViT> best_model;  // selection winner (== final under Selection::last)
    double best_val_acc = 0.0;
    int best_step = -1;
    double final_val_acc = 0.0;
    int final_active_count = 0;
    double final_active_pct = 0.0;
};

// Full-model supervised training on cfg.data (no adapters); produces the
// frozen trunk for fine-tuning.
RunResult pretrain(const RunConfig& cfg);

// Adapter fine-tuning: trunk frozen, head + adapter factors + gate scores
// trainable, loss = cross-entropy + gate penalty. `init` supplies the
// pretrained model; nullptr starts from fresh weights.
RunResult finetune(const RunConfig& cfg, const TinyViT* init);

// Fine-tune with n_active uniformly sampled gates fixed on and every other
// gate fixed off; scores are not trainable and no gate penalty applies.
RunResult random_selection_baseline(int n_active, std::uint64_t selection_seed, const RunConfig& cfg,
                                    const TinyViT* init);

// Mean top-1 over the dataset, evaluated without gradient tracking.
double evaluate_top1(TinyViT& model, const Dataset& ds, int batch_size = 64);
// Pre-head embeddings for every sample, [N, dim].
Tensor embed_dataset(TinyViT& model, const Dataset& ds, int batch_size = 64);

}  // namespace glora
