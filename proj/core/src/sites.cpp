#include "glora/sites.hpp"

#include "glora/tensor.hpp"

namespace glora {

const char* to_string(SiteKind kind) {
    switch (kind) {
        case SiteKind::q: return "q";
        case SiteKind::k: return "k";
        case SiteKind::v: return "v";
        case SiteKind::mlp_1: return "mlp_1";
        case SiteKind::mlp_2: return "mlp_2";
        case SiteKind::mlp_3: return "mlp_3";
    }
    throw ContractError("unknown site kind");
}

SiteKind site_kind_from(const std::string& name) {
    if (name == "q") return SiteKind::q;
    if (name == "k") return SiteKind::k;
    if (name == "v") return SiteKind::v;
    if (name == "mlp_1") return SiteKind::mlp_1;
    if (name == "mlp_2") return SiteKind::mlp_2;
    if (name == "mlp_3") return SiteKind::mlp_3;
    throw ConfigError("unknown site kind '" + name + "'");
}

std::string to_string(const SiteId& site) {
    return std::to_string(site.layer) + "." + to_string(site.kind);
}

std::vector<SiteId> enumerate_sites(int layers) {
    if (layers < 0) throw ContractError("enumerate_sites: negative layer count");
    static constexpr SiteKind kOrder[kSiteKindsPerLayer] = {SiteKind::q,     SiteKind::k,     SiteKind::v,
                                                            SiteKind::mlp_1, SiteKind::mlp_2, SiteKind::mlp_3};
    std::vector<SiteId> out;
    out.reserve(static_cast<std::size_t>(layers) * kSiteKindsPerLayer);
    for (int l = 0; l < layers; ++l) {
        for (SiteKind k : kOrder) out.push_back({l, k});
    }
    return out;
}

}  // namespace glora
