#pragma once

#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace cfs::svg {

/// Minimal SVG writer. Coordinates are printed with fixed precision so the
/// same drawing calls always produce the same bytes.
class Canvas {
 public:
  Canvas(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& dash = "");
  void polyline(std::span<const std::pair<double, double>> pts, const std::string& stroke, double width = 1.0,
                double opacity = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke = "none");
  void triangle(double cx, double cy, double r, const std::string& fill);
  void star(double cx, double cy, double r, const std::string& fill);
  /// anchor: start | middle | end. rotate in degrees about (x, y).
  void text(double x, double y, const std::string& s, double size = 12.0, const std::string& anchor = "start",
            double rotate = 0.0);

  std::string str() const;

 private:
  double width_, height_;
  std::ostringstream body_;
};

/// Linear map from a data interval onto a pixel interval.
struct Scale {
  double d0, d1, p0, p1;
  double operator()(double v) const { return d1 == d0 ? 0.5 * (p0 + p1) : p0 + (v - d0) * (p1 - p0) / (d1 - d0); }
};

/// Up to about n round tick values covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int n = 5);

std::string format_tick(double v);

std::string escape(const std::string& s);

}  // namespace cfs::svg
