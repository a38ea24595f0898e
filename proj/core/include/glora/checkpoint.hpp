#pragma once

#include <string>
#include <vector>

#include "glora/model.hpp"
#include "glora/run_config.hpp"

namespace glora {

// Manifest entry mirrored per adapter block.
struct AdapterRecord {
    SiteId site;
    AdapterKind kind = AdapterKind::LoRA;
    int rank = 1;
    double alpha = 1.0;
    double score = 0.0;
    double tau = 0.1;
    bool active = false;
};

// A checkpoint is a directory holding weights.bin (little-endian float32,
// concatenated in manifest order) and manifest.json (tensor tables, adapter
// records, and the embedded run config for self-describing reload).
void checkpoint_save(const std::string& dir, const TinyViT& model, const RunConfig& config);

struct LoadedModel {
    TinyViT model;
    RunConfig config;
};

LoadedModel checkpoint_load(const std::string& dir);

// Manifest-only accessors (no weight blob read).
std::vector<AdapterRecord> checkpoint_adapter_records(const std::string& dir);
ModelConfig checkpoint_model_config(const std::string& dir);

}  // namespace glora
