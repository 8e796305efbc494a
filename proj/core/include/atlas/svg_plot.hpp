// SPDX-License-Identifier: Apache-2.0

#ifndef ATLAS_SVG_PLOT_HPP
#define ATLAS_SVG_PLOT_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace atlas {

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

/// Minimal standalone SVG line chart. Every series must have one value per x.
void write_line_plot_svg(std::ostream& out, const std::string& title, const std::string& x_label,
                         const std::vector<double>& x, const std::vector<PlotSeries>& series);

}  // namespace atlas

#endif  // ATLAS_SVG_PLOT_HPP
