#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

namespace cfs::switching {

enum class Mode { Hard, Soft };

struct SwitchConfig {
  Mode mode = Mode::Soft;
  double i0 = 0.0;
  double beta = 0.0;

  void validate() const;  // beta > 0, i0 >= 0 (i0 may be +inf)
};

/// JSON form {"mode": "soft", "i0": <number | "auto:q0.85">, "beta": <number>}.
/// An "auto:qX" threshold stays unresolved (auto_quantile set) until
/// resolve() is given the pooled intensities. A missing beta defaults to
/// 0.1 x i0.
struct SwitchSpec {
  Mode mode = Mode::Soft;
  std::optional<double> i0;
  std::optional<double> auto_quantile = 0.85;
  std::optional<double> beta;
  double beta_fraction = 0.1;

  static SwitchSpec parse_json(const std::string& text);
  static SwitchSpec from_json_file(const std::filesystem::path& path);
  std::string to_json() const;

  SwitchConfig resolve(std::span<const double> pooled_intensities) const;
};

/// Weight on the interactive policy; the complement goes to the other one.
struct PolicyBlend {
  double w_int = 0.0;
  double w_non() const noexcept { return 1.0 - w_int; }
};

/// w_int = 1 iff I > I0.
PolicyBlend hard_switch(double intensity, const SwitchConfig& cfg);

/// w_int = sigmoid((I - I0) / beta).
PolicyBlend soft_switch(double intensity, const SwitchConfig& cfg);

/// Dispatches on cfg.mode.
PolicyBlend blend(double intensity, const SwitchConfig& cfg);

double blended_accel(const PolicyBlend& blend, double a_int, double a_non);

/// Nearest-rank q-quantile of the pooled intensities.
double calibrate_threshold(std::span<const double> values, double q = 0.85);

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

}  // namespace cfs::switching
