#pragma once

#include <string>
#include <vector>

#include "psg/metrics.hpp"

namespace psg {

/// Standalone SVG line chart of recall (x) against precision (y), both axes
/// spanning [0,1].
std::string render_pr_svg(const std::vector<PrPoint>& curve,
                          const std::string& title = "PR curve");

}  // namespace psg
