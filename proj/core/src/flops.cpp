#include "glora/flops.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace glora {

const char* to_string(FlopsMode m) { return m == FlopsMode::unmerged ? "unmerged" : "merged"; }

FlopsMode flops_mode_from(const std::string& name) {
    if (name == "unmerged") return FlopsMode::unmerged;
    if (name == "merged") return FlopsMode::merged;
    throw ConfigError("unknown flops mode '" + name + "' (want unmerged|merged)");
}

std::int64_t adapter_flops(int m, int n, int r, std::int64_t tokens) {
    if (m <= 0 || n <= 0 || r <= 0 || tokens <= 0) return 0;
    return 2LL * r * (static_cast<std::int64_t>(m) + n) * tokens;
}

std::int64_t dora_extra_flops(int m, int n, std::int64_t tokens) {
    if (m <= 0 || n <= 0 || tokens <= 0) return 0;
    const std::int64_t mn = static_cast<std::int64_t>(m) * n;
    return 2LL * mn * tokens + 3LL * mn;
}

std::int64_t base_model_flops(const ModelConfig& cfg, std::int64_t tokens) {
    if (tokens <= 0) return 0;
    const std::int64_t d = cfg.dim;
    const std::int64_t seq = cfg.tokens() + 1;
    const std::int64_t per_token = 2LL * cfg.patch_dim() * d + 2LL * d * cfg.num_classes +
                                   cfg.layers * (4LL * 2 * d * d + 2LL * 2 * d * seq + 2LL * 2 * d * cfg.hidden_dim());
    return per_token * tokens;
}

FlopsReport model_flops_report(const ModelConfig& cfg, const std::vector<GateSnapshot>& gates, AdapterKind kind,
                               int rank, FlopsMode mode, std::int64_t tokens) {
    cfg.validate();
    FlopsReport rep;
    rep.mode = mode;
    rep.tokens = tokens;
    rep.base_flops = base_model_flops(cfg, tokens);
    rep.site_count = static_cast<int>(gates.size());
    for (const GateSnapshot& g : gates) {
        const auto [m, n] = cfg.site_shape(g.site.kind);
        std::int64_t extra = 0;
        if (mode == FlopsMode::unmerged) {
            extra = adapter_flops(m, n, rank, tokens);
            if (kind == AdapterKind::DoRA) extra += dora_extra_flops(m, n, tokens);
        }
        rep.per_site.push_back({g.site, g.active, extra});
        rep.adapter_full += extra;
        if (g.active) {
            rep.adapter_total += extra;
            ++rep.active_count;
        }
    }
    rep.total = rep.base_flops + rep.adapter_total;
    if (rep.adapter_total > 0) {
        rep.full_over_gated = static_cast<double>(rep.adapter_full) / static_cast<double>(rep.adapter_total);
    } else {
        rep.full_over_gated =
            rep.adapter_full > 0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    return rep;
}

std::vector<RankPoint> flops_rank_sweep(const ModelConfig& cfg, const std::vector<GateSnapshot>& gates,
                                        AdapterKind kind, FlopsMode mode, std::int64_t tokens,
                                        const std::vector<int>& ranks) {
    std::vector<RankPoint> curve;
    curve.reserve(ranks.size());
    for (int r : ranks) {
        const FlopsReport rep = model_flops_report(cfg, gates, kind, r, mode, tokens);
        curve.push_back({r, rep.total});
    }
    return curve;
}

std::string FlopsReport::str() const {
    std::ostringstream os;
    os << "mode=" << to_string(mode) << " tokens=" << tokens << "\n";
    os << "base_flops=" << base_flops << "\n";
    os << "active=" << active_count << "/" << site_count << "\n";
    for (const SiteFlops& s : per_site) {
        os << "  " << to_string(s.site) << " " << (s.active ? "on " : "off") << " " << s.flops << "\n";
    }
    os << "adapter_active=" << adapter_total << " adapter_full=" << adapter_full << "\n";
    os << "full_over_gated=" << full_over_gated << "\n";
    os << "total=" << total << "\n";
    for (const RankPoint& p : rank_curve) os << "rank " << p.rank << " total " << p.total << "\n";
    return os.str();
}

}  // namespace glora
