#pragma once

#include <filesystem>
#include <vector>

namespace relab {

/// Renders CSVs as SVG line charts into out_dir and returns the files
/// written. Aggregate dynamics CSVs give one chart per (probe, metric) with
/// the interval drawn as a band; metrics CSVs give loss.svg and lr.svg.
/// Several inputs are overlaid as separate series with a legend. NaN points
/// are drawn as hollow markers and left out of lines and bands.
std::vector<std::filesystem::path> plot_csvs(const std::vector<std::filesystem::path>& inputs,
                                             const std::filesystem::path& out_dir);

}  // namespace relab
