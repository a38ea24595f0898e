#include "glora/model.hpp"

#include <cmath>

#include "glora/ops.hpp"

namespace glora {

void ModelConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || channels <= 0 || dim <= 0 || heads <= 0 || layers <= 0 ||
        mlp_ratio <= 0 || num_classes <= 0) {
        throw ConfigError("model config: all extents must be positive");
    }
    if (image_size % patch_size != 0) {
        throw ConfigError("model config: image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                          std::to_string(patch_size));
    }
    if (dim % heads != 0) {
        throw ConfigError("model config: dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
    }
}

std::pair<int, int> ModelConfig::site_shape(SiteKind kind) const {
    switch (kind) {
        case SiteKind::q:
        case SiteKind::k:
        case SiteKind::v:
        case SiteKind::mlp_1: return {dim, dim};
        case SiteKind::mlp_2: return {dim, hidden_dim()};
        case SiteKind::mlp_3: return {hidden_dim(), dim};
    }
    throw ContractError("unknown site kind");
}

void AdapterSpec::validate() const {
    if (rank < 1) throw ConfigError("adapter rank must be >= 1");
    if (alpha <= 0) throw ConfigError("adapter alpha must be positive");
    if (tau <= 0) throw ConfigError("adapter tau must be positive");
    if (score_lr_scale < 0) throw ConfigError("adapter score_lr_scale must be >= 0");
    if (ste_clip < 0) throw ConfigError("adapter ste_clip must be >= 0");
}

TinyViT::TinyViT(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int d = cfg_.dim;
    auto lin = [&rng](int m, int n) {
        return LinearParam{Tensor::randn(Shape{m, n}, rng, 0.02), Tensor::zeros(Shape{n})};
    };
    patch_w = Tensor::randn(Shape{cfg_.patch_dim(), d}, rng, 0.02);
    patch_b = Tensor::zeros(Shape{d});
    cls = Tensor::randn(Shape{d}, rng, 0.02);
    pos = Tensor::randn(Shape{cfg_.tokens() + 1, d}, rng, 0.02);
    blocks.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& blk : blocks) {
        blk.ln1_g = Tensor::full(Shape{d}, 1.0);
        blk.ln1_b = Tensor::zeros(Shape{d});
        blk.q = lin(d, d);
        blk.k = lin(d, d);
        blk.v = lin(d, d);
        blk.o = lin(d, d);
        blk.ln2_g = Tensor::full(Shape{d}, 1.0);
        blk.ln2_b = Tensor::zeros(Shape{d});
        blk.m1 = lin(d, cfg_.hidden_dim());
        blk.m2 = lin(cfg_.hidden_dim(), d);
    }
    final_g = Tensor::full(Shape{d}, 1.0);
    final_b = Tensor::zeros(Shape{d});
    head = lin(d, cfg_.num_classes);
}

Tensor TinyViT::patchify(const Tensor& images) const {
    if (images.ndim() != 4 || images.dim(1) != cfg_.channels || images.dim(2) != cfg_.image_size ||
        images.dim(3) != cfg_.image_size) {
        throw DimensionError("patchify: want [b," + std::to_string(cfg_.channels) + "," +
                             std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) + "], got " +
                             shape_str(images.shape));
    }
    const int b = images.dim(0);
    const int ps = cfg_.patch_size;
    const int grid = cfg_.image_size / ps;
    const int t = grid * grid;
    const int pd = cfg_.patch_dim();
    Tensor out(Shape{b, t, pd});
    const int S = cfg_.image_size;
    for (int i = 0; i < b; ++i) {
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                double* dst = out.ptr() + ((static_cast<std::size_t>(i) * t + gy * grid + gx)) * pd;
                // patch pixels flattened row-major, channel last
                for (int py = 0; py < ps; ++py) {
                    for (int px = 0; px < ps; ++px) {
                        for (int c = 0; c < cfg_.channels; ++c) {
                            const std::size_t src = ((static_cast<std::size_t>(i) * cfg_.channels + c) * S +
                                                     (gy * ps + py)) *
                                                        S +
                                                    (gx * ps + px);
                            *dst++ = images.at(src);
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor TinyViT::linear_site(const Tensor& x, LinearParam& lin, SiteId site) {
    AdapterBlock* ad = adapter_at(site);
    Tensor y = ad ? gated_forward(x, lin.w, *ad) : matmul(x, lin.w);
    return add(y, lin.b);
}

Tensor TinyViT::attention(Tensor x, int layer) {
    BlockParams& blk = blocks[static_cast<std::size_t>(layer)];
    const int b = x.dim(0), t = x.dim(1), d = cfg_.dim;
    const int h = cfg_.heads, e = d / h;
    Tensor hin = layer_norm(x, blk.ln1_g, blk.ln1_b);
    Tensor q = permute_0213(reshape(linear_site(hin, blk.q, {layer, SiteKind::q}), Shape{b, t, h, e}));
    Tensor k = permute_0213(reshape(linear_site(hin, blk.k, {layer, SiteKind::k}), Shape{b, t, h, e}));
    Tensor v = permute_0213(reshape(linear_site(hin, blk.v, {layer, SiteKind::v}), Shape{b, t, h, e}));
    Tensor att = softmax_lastdim(scale(bmm(q, k, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(e))));
    Tensor ctx = reshape(permute_0213(bmm(att, v)), Shape{b, t, d});
    Tensor out = linear_site(ctx, blk.o, {layer, SiteKind::mlp_1});
    return add(out, x);
}

Tensor TinyViT::mlp(Tensor x, int layer) {
    BlockParams& blk = blocks[static_cast<std::size_t>(layer)];
    Tensor h = layer_norm(x, blk.ln2_g, blk.ln2_b);
    h = gelu(linear_site(h, blk.m1, {layer, SiteKind::mlp_2}));
    h = linear_site(h, blk.m2, {layer, SiteKind::mlp_3});
    return add(h, x);
}

TinyViT::Output TinyViT::forward(const Tensor& images) {
    Tensor x = add(matmul(patchify(images), patch_w), patch_b);
    x = prepend_token(cls, x);
    x = add(x, pos);
    for (int l = 0; l < cfg_.layers; ++l) {
        x = attention(std::move(x), l);
        x = mlp(std::move(x), l);
    }
    x = layer_norm(x, final_g, final_b);
    Tensor emb = take_token(x, 0);
    Tensor logits = add(matmul(emb, head.w), head.b);
    return {logits, emb};
}

void TinyViT::attach_adapters(const AdapterSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (!adapters.empty()) throw ContractError("attach_adapters: adapters already attached");
    std::mt19937_64 rng(seed);
    for (SiteId site : enumerate_sites(cfg_.layers)) {
        AdapterBlock blk =
            AdapterBlock::make(site, spec.kind, site_weight(site), spec.rank, spec.alpha, spec.tau, spec.s_init, rng);
        blk.ste = spec.ste;
        blk.ste_clip = spec.ste_clip;
        blk.dark_grads = spec.dark_grads;
        adapters.push_back(std::move(blk));
    }
}

AdapterBlock* TinyViT::adapter_at(SiteId site) {
    for (auto& blk : adapters) {
        if (blk.site == site) return &blk;
    }
    return nullptr;
}

const Tensor& TinyViT::site_weight(SiteId site) const {
    const BlockParams& blk = blocks.at(static_cast<std::size_t>(site.layer));
    switch (site.kind) {
        case SiteKind::q: return blk.q.w;
        case SiteKind::k: return blk.k.w;
        case SiteKind::v: return blk.v.w;
        case SiteKind::mlp_1: return blk.o.w;
        case SiteKind::mlp_2: return blk.m1.w;
        case SiteKind::mlp_3: return blk.m2.w;
    }
    throw ContractError("unknown site kind");
}

void TinyViT::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("patch.w", patch_w);
    fn("patch.b", patch_b);
    fn("cls", cls);
    fn("pos", pos);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        BlockParams& blk = blocks[l];
        fn(p + "ln1.g", blk.ln1_g);
        fn(p + "ln1.b", blk.ln1_b);
        fn(p + "attn.wq", blk.q.w);
        fn(p + "attn.bq", blk.q.b);
        fn(p + "attn.wk", blk.k.w);
        fn(p + "attn.bk", blk.k.b);
        fn(p + "attn.wv", blk.v.w);
        fn(p + "attn.bv", blk.v.b);
        fn(p + "attn.wo", blk.o.w);
        fn(p + "attn.bo", blk.o.b);
        fn(p + "ln2.g", blk.ln2_g);
        fn(p + "ln2.b", blk.ln2_b);
        fn(p + "mlp.w1", blk.m1.w);
        fn(p + "mlp.b1", blk.m1.b);
        fn(p + "mlp.w2", blk.m2.w);
        fn(p + "mlp.b2", blk.m2.b);
    }
    fn("final_ln.g", final_g);
    fn("final_ln.b", final_b);
    fn("head.w", head.w);
    fn("head.b", head.b);
}

void TinyViT::visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<TinyViT*>(this)->visit_params(
        [&fn](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
}

bool TinyViT::is_head(const std::string& name) { return name.rfind("head.", 0) == 0; }
bool TinyViT::is_trunk(const std::string& name) { return !is_head(name); }

std::vector<GateSnapshot> TinyViT::gate_snapshot() const {
    std::vector<GateSnapshot> out;
    out.reserve(adapters.size());
    for (const auto& blk : adapters) {
        out.push_back({blk.site, blk.gate.score.value(), blk.gate.active()});
    }
    return out;
}

std::vector<Tensor> TinyViT::scores() const {
    std::vector<Tensor> out;
    out.reserve(adapters.size());
    for (const auto& blk : adapters) out.push_back(blk.gate.score);
    return out;
}

std::vector<GateState> TinyViT::gates() const {
    std::vector<GateState> out;
    out.reserve(adapters.size());
    for (const auto& blk : adapters) out.push_back(blk.gate);
    return out;
}

void TinyViT::set_trainable_pretrain() {
    if (!adapters.empty()) throw ContractError("pretraining runs without adapters");
    visit_params([](const std::string&, Tensor& t) { t.requires_grad = true; });
}

void TinyViT::set_trainable_finetune() {
    visit_params([](const std::string& name, Tensor& t) { t.requires_grad = is_head(name); });
    for (auto& blk : adapters) {
        blk.a.requires_grad = true;
        blk.b.requires_grad = true;
        if (blk.magnitude.defined()) blk.magnitude.requires_grad = true;
        blk.gate.score.requires_grad = blk.gate.trainable;
    }
}

TinyViT TinyViT::clone() const {
    TinyViT out(cfg_, 0);
    auto copy = [](Tensor& dst, const Tensor& src) {
        const bool rq = src.requires_grad;
        dst = src.clone();
        dst.requires_grad = rq;
    };
    const_cast<TinyViT*>(this)->visit_params([&out, &copy](const std::string& name, Tensor& t) {
        out.visit_params([&name, &t, &copy](const std::string& n2, Tensor& dst) {
            if (n2 == name) copy(dst, t);
        });
    });
    out.adapters.clear();
    for (const auto& blk : adapters) {
        AdapterBlock c = blk;
        copy(c.a, blk.a);
        copy(c.b, blk.b);
        if (blk.magnitude.defined()) copy(c.magnitude, blk.magnitude);
        copy(c.gate.score, blk.gate.score);
        out.adapters.push_back(std::move(c));
    }
    return out;
}

}  // namespace glora
