#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/model.hpp"

namespace glora {

// Analytic FLOP counts; a multiply-add is 2 FLOPs throughout. `tokens` is the
// number of token positions flowing through each linear layer.
enum class FlopsMode { unmerged, merged };

const char* to_string(FlopsMode m);
FlopsMode flops_mode_from(const std::string& name);

struct SiteFlops {
    SiteId site;
    bool active = false;
    std::int64_t flops = 0;  // extra cost this site adds in unmerged mode
};

struct RankPoint {
    int rank = 0;
    std::int64_t total = 0;
};

struct FlopsReport {
    std::int64_t base_flops = 0;
    std::vector<SiteFlops> per_site;
    std::int64_t adapter_total = 0;  // sum over active sites
    std::int64_t adapter_full = 0;   // sum if every site were active
    std::int64_t total = 0;          // base + adapter_total (unmerged); base otherwise
    int active_count = 0;
    int site_count = 0;
    FlopsMode mode = FlopsMode::unmerged;
    std::int64_t tokens = 0;
    double full_over_gated = 1.0;  // adapter cost ratio; inf when gated cost is zero
    std::vector<RankPoint> rank_curve;

    std::string str() const;
};

// Unmerged low-rank extra cost: x*a then (xa)*b = 2*r*(m+n)*tokens.
// Any non-positive argument yields 0.
std::int64_t adapter_flops(int m, int n, int r, std::int64_t tokens);

// Extra cost of evaluating an unmerged reparameterized weight with column
// normalization and magnitude rescale: 2*m*n*tokens matmul FLOPs plus
// 3*m*n for per-column norm + scale, per active site.
std::int64_t dora_extra_flops(int m, int n, std::int64_t tokens);

// Base transformer cost, matmul MACs only, linear in tokens. Closed form:
//   embed+head: 2*patch_dim*d + 2*d*classes   per token
//   per layer:  4*(2*d*d)                      q,k,v,o projections
//               2*(2*d*S)                      score and mix matmuls, S = seq
//               2*(2*d*hidden)                 the two mlp linears
// Patch embedding and head are charged to every token position uniformly.
std::int64_t base_model_flops(const ModelConfig& cfg, std::int64_t tokens);

FlopsReport model_flops_report(const ModelConfig& cfg, const std::vector<GateSnapshot>& gates, AdapterKind kind,
                               int rank, FlopsMode mode, std::int64_t tokens);

// Totals at each rank with the same gates/mode (constant-cost sweeps).
std::vector<RankPoint> flops_rank_sweep(const ModelConfig& cfg, const std::vector<GateSnapshot>& gates,
                                        AdapterKind kind, FlopsMode mode, std::int64_t tokens,
                                        const std::vector<int>& ranks);

}  // namespace glora
