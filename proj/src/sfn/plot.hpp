#pragma once

// Static SVG line plots of ground-truth against predicted density.

#include <string>
#include <vector>

namespace sfn {

struct DensityPlot {
  std::string title;
  std::vector<double> ground_truth;  // one value per downsampled frame
  std::vector<double> predicted;
  std::vector<std::size_t> view_starts;  // drawn as dashed separators
  double gt_count = 0.0;
  double pred_count = 0.0;
};

std::string render_density_svg(const DensityPlot& plot);

}  // namespace sfn
