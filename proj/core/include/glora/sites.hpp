#pragma once

#include <string>
#include <vector>

namespace glora {

// Six insertion points per transformer layer: the attention projections, the
// attention output projection (mlp_1), and the two feedforward linears
// (mlp_2, mlp_3).
enum class SiteKind { q, k, v, mlp_1, mlp_2, mlp_3 };

inline constexpr int kSiteKindsPerLayer = 6;

const char* to_string(SiteKind kind);
SiteKind site_kind_from(const std::string& name);

struct SiteId {
    int layer = 0;
    SiteKind kind = SiteKind::q;

    bool operator==(const SiteId&) const = default;
    bool operator<(const SiteId& o) const {
        return layer != o.layer ? layer < o.layer : static_cast<int>(kind) < static_cast<int>(o.kind);
    }
};

std::string to_string(const SiteId& site);

// Layer-major, kind order (q, k, v, mlp_1, mlp_2, mlp_3); length 6*layers.
std::vector<SiteId> enumerate_sites(int layers);

}  // namespace glora
