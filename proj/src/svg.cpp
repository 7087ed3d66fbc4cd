#include "cfs/svg.hpp"

#include <cmath>
#include <cstdio>

namespace cfs::svg {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace

Canvas::Canvas(double width, double height) : width_(width), height_(height) {}

void Canvas::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
  body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
}

void Canvas::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width,
                  const std::string& dash) {
  body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"";
  if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
  body_ << "/>\n";
}

void Canvas::polyline(std::span<const std::pair<double, double>> pts, const std::string& stroke, double width,
                      double opacity) {
  if (pts.empty()) return;
  body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"";
  if (opacity < 1.0) body_ << " stroke-opacity=\"" << num(opacity) << "\"";
  body_ << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) body_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
  body_ << "\"/>\n";
}

void Canvas::circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke) {
  body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r) << "\" fill=\"" << fill
        << "\" stroke=\"" << stroke << "\"/>\n";
}

void Canvas::triangle(double cx, double cy, double r, const std::string& fill) {
  body_ << "<polygon fill=\"" << fill << "\" points=\"" << num(cx) << ',' << num(cy - r) << ' ' << num(cx - 0.866 * r)
        << ',' << num(cy + 0.5 * r) << ' ' << num(cx + 0.866 * r) << ',' << num(cy + 0.5 * r) << "\"/>\n";
}

void Canvas::star(double cx, double cy, double r, const std::string& fill) {
  body_ << "<polygon fill=\"" << fill << "\" points=\"";
  for (int i = 0; i < 10; ++i) {
    const double ang = -M_PI / 2 + i * M_PI / 5;
    const double rr = i % 2 == 0 ? r : 0.45 * r;
    body_ << (i ? " " : "") << num(cx + rr * std::cos(ang)) << ',' << num(cy + rr * std::sin(ang));
  }
  body_ << "\"/>\n";
}

void Canvas::text(double x, double y, const std::string& s, double size, const std::string& anchor, double rotate) {
  body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size) << "\" text-anchor=\"" << anchor
        << "\"";
  if (rotate != 0.0) body_ << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
  body_ << ">" << escape(s) << "</text>\n";
}

std::string Canvas::str() const {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
     << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << body_.str() << "</svg>\n";
  return os.str();
}

std::vector<double> nice_ticks(double lo, double hi, int n) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) return {lo};
  const double raw = (hi - lo) / std::max(1, n);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

std::string format_tick(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace cfs::svg
