#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/sites.hpp"
#include "glora/tensor.hpp"

namespace glora {

struct ModelConfig {
    int image_size = 16;
    int patch_size = 4;
    int channels = 1;
    int dim = 64;
    int heads = 4;
    int layers = 4;
    int mlp_ratio = 4;
    int num_classes = 8;

    void validate() const;
    int tokens() const { return (image_size / patch_size) * (image_size / patch_size); }
    int patch_dim() const { return patch_size * patch_size * channels; }
    int hidden_dim() const { return mlp_ratio * dim; }
    // Weight shape [m, n] at a site, by kind.
    std::pair<int, int> site_shape(SiteKind kind) const;

    bool operator==(const ModelConfig&) const = default;
};

// Settings for the adapters attached at every site.
struct AdapterSpec {
    AdapterKind kind = AdapterKind::LoRA;
    int rank = 8;
    double alpha = 8.0;  // effective scale alpha/rank
    double tau = 0.1;
    double s_init = 0.5;
    double score_lr_scale = 1.0;  // scores share the main lr by default
    bool ste = true;
    double ste_clip = 0.0;
    bool dark_grads = false;

    void validate() const;
};

struct LinearParam {
    Tensor w;
    Tensor b;
};

struct BlockParams {
    Tensor ln1_g, ln1_b;
    LinearParam q, k, v, o;
    Tensor ln2_g, ln2_b;
    LinearParam m1, m2;
};

// Pre-norm ViT classifier with a class token; six adapter sites per layer
// (q, k, v, attention output mlp_1, feedforward mlp_2 and mlp_3).
class TinyViT {
public:
    TinyViT(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    Tensor patch_w, patch_b, cls, pos;
    std::vector<BlockParams> blocks;
    Tensor final_g, final_b;
    LinearParam head;
    std::vector<AdapterBlock> adapters;  // empty, or one per site in site order

    struct Output {
        Tensor logits;     // [b, num_classes]
        Tensor embedding;  // [b, d] class token after the final norm, for K-NN
    };
    // Records onto the active tape if one is installed; images [b,c,H,W].
    Output forward(const Tensor& images);

    // Raw patch extraction (no gradient tracking): [b,c,H,W] -> [b,T,patch_dim].
    Tensor patchify(const Tensor& images) const;

    void attach_adapters(const AdapterSpec& spec, std::uint64_t seed);
    AdapterBlock* adapter_at(SiteId site);
    const Tensor& site_weight(SiteId site) const;

    // Stable iteration over base parameters (trunk + head), manifest order.
    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    // Trunk = every base tensor except the classification head.
    static bool is_trunk(const std::string& name);
    static bool is_head(const std::string& name);

    std::vector<GateSnapshot> gate_snapshot() const;
    std::vector<Tensor> scores() const;
    std::vector<GateState> gates() const;

    // All base params trainable, used by pretraining (adapters must be absent).
    void set_trainable_pretrain();
    // Trunk frozen; head, adapter factors and scores trainable.
    void set_trainable_finetune();

    // Deep copy: fresh storage for every tensor, adapters included.
    TinyViT clone() const;

private:
    ModelConfig cfg_;
    Tensor attention(Tensor x, int layer);
    Tensor mlp(Tensor x, int layer);
    Tensor linear_site(const Tensor& x, LinearParam& lin, SiteId site);
};

}  // namespace glora
