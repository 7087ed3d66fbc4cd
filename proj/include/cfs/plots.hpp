#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfs/interaction.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::plots {

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the last bin is closed, so the counts
/// sum to values.size().
Histogram histogram(std::span<const double> values, std::size_t bins);

std::string histogram_svg(const Histogram& h, const std::string& title, const std::string& xlabel);

struct Line {
  std::string label;
  std::vector<double> x, y;
};

/// Series against time on a shared axis, each drawn in its own colour.
std::string profile_svg(std::span<const Line> lines, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel);

/// Gap profile of one pair with the selected samples marked: interactive
/// circles, non-interactive triangles, random stars.
std::string samples_svg(const TrajectoryPair& pair, const interaction::IntensitySeries& series,
                        const interaction::SampleSplit& split, const std::string& title);

struct SimPlot {
  std::string title;
  std::vector<double> t;
  std::vector<double> leader_x, human_x;
  std::vector<std::vector<double>> runs_x;  // simulated follower positions per run
  std::vector<double> intensity, w_int;     // one run, aligned with t (may be shorter)
};

/// Two panels: positions relative to an observer moving at the leader's mean
/// speed; intensity (left axis) and w_int (right axis).
std::string sim_svg(const SimPlot& plot);

}  // namespace cfs::plots
