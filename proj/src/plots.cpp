#include "cfs/plots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfs/error.hpp"
#include "cfs/svg.hpp"

namespace cfs::plots {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

struct Frame {
  double left, top, width, height;
  svg::Scale x, y;
};

std::pair<double, double> range_of(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi == lo) return {lo - 0.5, hi + 0.5};
  const double pad = 0.04 * (hi - lo);
  return {lo - pad, hi + pad};
}

Frame frame(double left, double top, double width, double height, std::pair<double, double> xr, std::pair<double, double> yr) {
  return {left, top, width, height, {xr.first, xr.second, left, left + width}, {yr.first, yr.second, top + height, top}};
}

void axes(svg::Canvas& c, const Frame& f, const std::string& xlabel, const std::string& ylabel, bool x_ticks = true) {
  c.rect(f.left, f.top, f.width, f.height, "none", "#333333");
  if (x_ticks) {
    for (double t : svg::nice_ticks(f.x.d0, f.x.d1)) {
      const double px = f.x(t);
      c.line(px, f.top + f.height, px, f.top + f.height + 4, "#333333");
      c.text(px, f.top + f.height + 16, svg::format_tick(t), 10, "middle");
    }
  }
  for (double t : svg::nice_ticks(f.y.d0, f.y.d1)) {
    const double py = f.y(t);
    c.line(f.left - 4, py, f.left, py, "#333333");
    c.line(f.left, py, f.left + f.width, py, "#e0e0e0", 0.5);
    c.text(f.left - 6, py + 3, svg::format_tick(t), 10, "end");
  }
  if (!xlabel.empty()) c.text(f.left + f.width / 2, f.top + f.height + 32, xlabel, 11, "middle");
  if (!ylabel.empty()) c.text(f.left - 40, f.top + f.height / 2, ylabel, 11, "middle", -90);
}

std::vector<std::pair<double, double>> points(const Frame& f, std::span<const double> x, std::span<const double> y) {
  std::vector<std::pair<double, double>> p;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (std::isfinite(y[i])) p.emplace_back(f.x(x[i]), f.y(y[i]));
  return p;
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw ArgumentError("histogram: no values");
  if (bins == 0) throw ArgumentError("histogram: bins must be >= 1");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx > *mn ? *mx : *mn + 1.0;
  Histogram h;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

std::string histogram_svg(const Histogram& h, const std::string& title, const std::string& xlabel) {
  svg::Canvas c(640, 400);
  const double peak = static_cast<double>(*std::max_element(h.counts.begin(), h.counts.end()));
  const Frame f = frame(70, 40, 540, 300, {h.edges.front(), h.edges.back()}, {0.0, peak * 1.05 + 1e-9});
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double x0 = f.x(h.edges[i]), x1 = f.x(h.edges[i + 1]);
    const double y = f.y(static_cast<double>(h.counts[i]));
    c.rect(x0, y, std::max(0.0, x1 - x0 - 0.5), f.top + f.height - y, "#1f77b4");
  }
  axes(c, f, xlabel, "count");
  c.text(f.left + f.width / 2, 24, title, 14, "middle");
  return c.str();
}

std::string profile_svg(std::span<const Line> lines, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel) {
  if (lines.empty()) throw ArgumentError("profile_svg: nothing to draw");
  std::vector<double> xs, ys;
  for (const auto& l : lines) {
    xs.insert(xs.end(), l.x.begin(), l.x.end());
    ys.insert(ys.end(), l.y.begin(), l.y.end());
  }
  svg::Canvas c(720, 360);
  const Frame f = frame(70, 40, 520, 260, range_of(xs), range_of(ys));
  axes(c, f, xlabel, ylabel);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string col = kPalette[i % std::size(kPalette)];
    c.polyline(points(f, lines[i].x, lines[i].y), col, 1.5);
    c.line(600, 50 + 18.0 * static_cast<double>(i), 620, 50 + 18.0 * static_cast<double>(i), col, 2);
    c.text(625, 54 + 18.0 * static_cast<double>(i), lines[i].label, 11);
  }
  c.text(f.left + f.width / 2, 24, title, 14, "middle");
  return c.str();
}

std::string samples_svg(const TrajectoryPair& pair, const interaction::IntensitySeries& series,
                        const interaction::SampleSplit& split, const std::string& title) {
  std::vector<double> t, dx;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    t.push_back(pair.follower[i].t);
    dx.push_back(pair.dx(i));
  }
  svg::Canvas c(720, 360);
  const Frame f = frame(70, 40, 520, 260, range_of(t), range_of(dx));
  axes(c, f, "t [s]", "gap [m]");
  c.polyline(points(f, t, dx), "#555555", 1.2);
  const auto mark = [&](const std::vector<std::size_t>& pos, int shape, const char* col) {
    for (std::size_t k : pos) {
      const std::size_t i = series.index.at(k);
      const double px = f.x(pair.follower[i].t), py = f.y(pair.dx(i));
      if (shape == 0) c.circle(px, py, 4, col);
      else if (shape == 1) c.triangle(px, py, 5, col);
      else c.star(px, py, 5, col);
    }
  };
  mark(split.random, 2, "#2ca02c");
  mark(split.non_interactive, 1, "#1f77b4");
  mark(split.interactive, 0, "#d62728");
  c.circle(610, 54, 4, "#d62728");
  c.text(620, 58, "interactive", 11);
  c.triangle(610, 72, 5, "#1f77b4");
  c.text(620, 76, "non-interactive", 11);
  c.star(610, 90, 5, "#2ca02c");
  c.text(620, 94, "random", 11);
  c.text(f.left + f.width / 2, 24, title, 14, "middle");
  return c.str();
}

std::string sim_svg(const SimPlot& p) {
  if (p.t.empty()) throw ArgumentError("sim_svg: empty trajectory");
  const std::size_t n = p.t.size();
  // Observer moving at the leader's mean speed from the leader's start.
  const double span = p.t.back() - p.t.front();
  const double speed = span > 0.0 ? (p.leader_x.back() - p.leader_x.front()) / span : 0.0;
  const auto rel = [&](const std::vector<double>& x) {
    std::vector<double> r;
    for (std::size_t i = 0; i < std::min(n, x.size()); ++i) r.push_back(x[i] - (p.leader_x.front() + speed * (p.t[i] - p.t.front())));
    return r;
  };
  const auto lead = rel(p.leader_x), human = rel(p.human_x);
  std::vector<std::vector<double>> runs;
  std::vector<double> all = lead;
  all.insert(all.end(), human.begin(), human.end());
  for (const auto& r : p.runs_x) {
    runs.push_back(rel(r));
    all.insert(all.end(), runs.back().begin(), runs.back().end());
  }

  svg::Canvas c(720, 560);
  const auto tr = range_of(p.t);
  const Frame top = frame(70, 40, 560, 250, tr, range_of(all));
  axes(c, top, "", "relative position [m]");
  for (const auto& r : runs) c.polyline(points(top, p.t, r), "#2ca02c", 1.0, 0.5);
  c.polyline(points(top, p.t, human), "#1f77b4", 1.8);
  c.polyline(points(top, p.t, lead), "#d62728", 1.8);
  c.line(640, 50, 660, 50, "#d62728", 2);
  c.text(664, 54, "leader", 10);
  c.line(640, 66, 660, 66, "#1f77b4", 2);
  c.text(664, 70, "human", 10);
  c.line(640, 82, 660, 82, "#2ca02c", 2);
  c.text(664, 86, "simulated", 10);

  const Frame bot = frame(70, 320, 560, 180, tr, range_of(p.intensity));
  axes(c, bot, "t [s]", "intensity");
  c.polyline(points(bot, p.t, p.intensity), "#9467bd", 1.5);
  const svg::Scale wy{0.0, 1.0, bot.top + bot.height, bot.top};
  for (double v : {0.0, 0.5, 1.0}) {
    c.line(bot.left + bot.width, wy(v), bot.left + bot.width + 4, wy(v), "#333333");
    c.text(bot.left + bot.width + 6, wy(v) + 3, svg::format_tick(v), 10);
  }
  c.text(bot.left + bot.width + 40, bot.top + bot.height / 2, "w_int", 11, "middle", 90);
  std::vector<std::pair<double, double>> wp;
  for (std::size_t i = 0; i < std::min(n, p.w_int.size()); ++i) wp.emplace_back(bot.x(p.t[i]), wy(p.w_int[i]));
  c.polyline(wp, "#ff7f0e", 1.2);
  c.text(top.left + top.width / 2, 24, p.title, 14, "middle");
  return c.str();
}

}  // namespace cfs::plots
