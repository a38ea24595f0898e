#include "glora/reports.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace glora {

double ActivationReport::at(SiteKind kind, int layer) const {
    return grid[static_cast<std::size_t>(static_cast<int>(kind)) * layers + layer];
}

double& ActivationReport::at(SiteKind kind, int layer) {
    return grid[static_cast<std::size_t>(static_cast<int>(kind)) * layers + layer];
}

ActivationReport activation_report(const std::vector<std::vector<GateSnapshot>>& run_snapshots) {
    if (run_snapshots.empty()) throw ContractError("activation_report needs at least one run");
    const std::vector<GateSnapshot>& first = run_snapshots.front();
    if (first.empty()) throw ContractError("activation_report: empty gate snapshot");
    ActivationReport rep;
    rep.runs = static_cast<int>(run_snapshots.size());
    for (const GateSnapshot& g : first) rep.layers = std::max(rep.layers, g.site.layer + 1);
    rep.grid.assign(static_cast<std::size_t>(kSiteKindsPerLayer) * rep.layers, 0.0);
    for (const auto& snap : run_snapshots) {
        if (snap.size() != first.size()) throw ContractError("activation_report: runs cover different site sets");
        for (std::size_t i = 0; i < snap.size(); ++i) {
            if (!(snap[i].site == first[i].site)) {
                throw ContractError("activation_report: runs cover different site sets");
            }
            if (snap[i].active) rep.at(snap[i].site.kind, snap[i].site.layer) += 1.0;
        }
    }
    for (double& cell : rep.grid) cell /= rep.runs;
    return rep;
}

std::string ActivationReport::csv() const {
    std::ostringstream os;
    os << "kind";
    for (int l = 0; l < layers; ++l) os << ",layer_" << l;
    os << "\n";
    char buf[32];
    for (int k = 0; k < kSiteKindsPerLayer; ++k) {
        os << to_string(static_cast<SiteKind>(k));
        for (int l = 0; l < layers; ++l) {
            std::snprintf(buf, sizeof(buf), "%.6f", at(static_cast<SiteKind>(k), l));
            os << ',' << buf;
        }
        os << "\n";
    }
    return os.str();
}

std::string ActivationReport::svg() const {
    const int cell = 48, pad_l = 64, pad_t = 40;
    const int w = pad_l + layers * cell + 16;
    const int h = pad_t + kSiteKindsPerLayer * cell + 16;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << pad_l << "\" y=\"16\" font-family=\"monospace\" font-size=\"12\">activated fraction over "
       << runs << " run(s)</text>\n";
    for (int l = 0; l < layers; ++l) {
        os << "<text x=\"" << pad_l + l * cell + cell / 2 << "\" y=\"" << pad_t - 6
           << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">L" << l << "</text>\n";
    }
    for (int k = 0; k < kSiteKindsPerLayer; ++k) {
        os << "<text x=\"" << pad_l - 8 << "\" y=\"" << pad_t + k * cell + cell / 2 + 4
           << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">"
           << to_string(static_cast<SiteKind>(k)) << "</text>\n";
        for (int l = 0; l < layers; ++l) {
            const double v = at(static_cast<SiteKind>(k), l);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            char color[16];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", shade, shade, 255);
            os << "<rect x=\"" << pad_l + l * cell << "\" y=\"" << pad_t + k * cell << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"" << color << "\" stroke=\"#333\"/>\n";
            char label[16];
            std::snprintf(label, sizeof(label), "%.2f", v);
            os << "<text x=\"" << pad_l + l * cell + cell / 2 << "\" y=\"" << pad_t + k * cell + cell / 2 + 4
               << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\" fill=\""
               << (v > 0.5 ? "white" : "#333") << "\">" << label << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace glora
