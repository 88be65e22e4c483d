#pragma once

#include <string>

#include "orchard/counting.h"

namespace orchard {

// Standalone SVG documents.

// Estimated and ground-truth count side by side for every tree.
std::string CountBarChartSvg(const CountReport& report);

// Estimate against ground truth per tree, with the fitted line and y = x.
std::string CountScatterSvg(const CountReport& report);

}  // namespace orchard
