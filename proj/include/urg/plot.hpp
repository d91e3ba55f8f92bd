#pragma once

// Deterministic SVG renderings of stage reports: heat maps of node fields,
// J-versus-ln r curves, and dyadic trees drawn one generation per row.

#include <json.hpp>

#include <string>
#include <vector>

namespace urg::app {

inline const std::vector<std::string>& plot_kinds() {
    static const std::vector<std::string> k{"field", "curve", "tree"};
    return k;
}

/// Heat map of a CSV with x, y columns and a value column (Dbeta, else u, else the last).
std::string plot_field(const std::string& csv);
/// Polyline of (ln r, J) with labelled axes.
std::string plot_curve(const std::vector<double>& r, const std::vector<double>& J);
/// One box per cube; row = generation, horizontal extent = centre x +- l(Q)/2.
std::string plot_tree(const nlohmann::json& tree);

/// Dispatches on kind; a missing report or unknown kind raises ConfigError.
std::string plot_file(const std::string& report, const std::string& kind);

} // namespace urg::app
