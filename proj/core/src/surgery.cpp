#include "glora/surgery.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "glora/checkpoint.hpp"

namespace glora {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr double kDoraEps = 1e-8;

std::string site_param_name(const SiteId& site) {
    const std::string b = "blocks." + std::to_string(site.layer) + ".";
    switch (site.kind) {
        case SiteKind::q: return b + "attn.wq";
        case SiteKind::k: return b + "attn.wk";
        case SiteKind::v: return b + "attn.wv";
        case SiteKind::mlp_1: return b + "attn.wo";
        case SiteKind::mlp_2: return b + "mlp.w1";
        case SiteKind::mlp_3: return b + "mlp.w2";
    }
    throw ContractError("unreachable site kind");
}

Tensor find_param(TinyViT& model, const std::string& want) {
    Tensor found;
    model.visit_params([&](const std::string& name, Tensor& t) {
        if (name == want) found = t;
    });
    if (!found.defined()) throw ContractError("no parameter named '" + want + "'");
    return found;
}

void fold_block(Tensor& w0, const AdapterBlock& blk) {
    const int m = w0.dim(0), n = w0.dim(1);
    Eigen::Map<Mat> w(w0.ptr(), m, n);
    Eigen::Map<const Mat> a(blk.a.ptr(), m, blk.rank);
    Eigen::Map<const Mat> b(blk.b.ptr(), blk.rank, n);
    if (blk.kind == AdapterKind::LoRA) {
        w += blk.eff_scale() * (a * b);
        return;
    }
    // Reparameterized fold; arithmetic mirrors the unmerged forward path.
    Mat wsum = w + blk.eff_scale() * (a * b);
    for (int j = 0; j < n; ++j) {
        double nj = 0;
        for (int i = 0; i < m; ++i) nj += wsum(i, j) * wsum(i, j);
        nj = std::sqrt(nj);
        const double denom = nj < kDoraEps ? nj + kDoraEps : nj;
        const double mj = blk.magnitude.ptr()[j];
        for (int i = 0; i < m; ++i) w(i, j) = wsum(i, j) / denom * mj;
    }
}

}  // namespace

void merge_adapters(TinyViT& model) {
    for (const AdapterBlock& blk : model.adapters) {
        if (!blk.gate.active()) continue;
        Tensor w0 = find_param(model, site_param_name(blk.site));
        fold_block(w0, blk);
    }
    model.adapters.clear();
}

void prune_inactive(TinyViT& model) {
    model.adapters.erase(std::remove_if(model.adapters.begin(), model.adapters.end(),
                                        [](const AdapterBlock& blk) { return !blk.gate.active(); }),
                         model.adapters.end());
}

void merge_checkpoint(const std::string& in_dir, const std::string& out_dir) {
    LoadedModel loaded = checkpoint_load(in_dir);
    merge_adapters(loaded.model);
    checkpoint_save(out_dir, loaded.model, loaded.config);
}

void prune_checkpoint(const std::string& in_dir, const std::string& out_dir) {
    LoadedModel loaded = checkpoint_load(in_dir);
    prune_inactive(loaded.model);
    checkpoint_save(out_dir, loaded.model, loaded.config);
}

}  // namespace glora
