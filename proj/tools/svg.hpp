#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace lempc::cli {

struct SvgPolygon {
  std::string label;
  std::string color;
  std::vector<Eigen::Vector2d> vertices;
};

struct SvgPath {
  std::string label;
  std::string color;
  std::vector<Eigen::Vector2d> points;
};

/// Static plot of filled regions and trajectories in the x1-x2 plane.
/// `lo` and `hi` are the plotted data window.
void write_svg(const std::filesystem::path& path, const Eigen::Vector2d& lo,
               const Eigen::Vector2d& hi, const std::vector<SvgPolygon>& regions,
               const std::vector<SvgPath>& paths, const std::string& title);

}  // namespace lempc::cli
