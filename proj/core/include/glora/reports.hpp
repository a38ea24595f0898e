#pragma once

#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/sites.hpp"

namespace glora {

// Per-(site kind, layer) fraction of runs whose final gate is active.
struct ActivationReport {
    int layers = 0;
    int runs = 0;
    std::vector<double> grid;  // kSiteKindsPerLayer rows x layers cols, row-major

    double at(SiteKind kind, int layer) const;
    double& at(SiteKind kind, int layer);
    std::string csv() const;  // kind,layer_0,... matrix
    std::string svg() const;  // self-contained shaded-rectangle heatmap
};

// Each entry is one run's final gate snapshot; all runs must cover the same
// sites in the same order.
ActivationReport activation_report(const std::vector<std::vector<GateSnapshot>>& run_snapshots);

}  // namespace glora
