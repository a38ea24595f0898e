#pragma once

#include <string>

#include "glora/model.hpp"

namespace glora {

// Folds every active adapter into its trunk weight and removes all adapter
// blocks. LoRA: w0 += (alpha/r)*a*b. DoRA: w0 is replaced by the full
// reparameterized weight. Inactive blocks are dropped without touching w0.
// A model without adapters is left unchanged, so merging twice is a no-op.
void merge_adapters(TinyViT& model);

// Removes inactive adapter blocks; active blocks and all weights are kept,
// so the forward pass is unchanged bit for bit.
void prune_inactive(TinyViT& model);

// Checkpoint-level wrappers: load, transform, save to out_dir.
void merge_checkpoint(const std::string& in_dir, const std::string& out_dir);
void prune_checkpoint(const std::string& in_dir, const std::string& out_dir);

}  // namespace glora
