#include "cfs/switching.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cfs/error.hpp"
#include "cfs/stats.hpp"

namespace cfs::switching {

using nlohmann::json;

void SwitchConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("switch: beta must be finite and > 0");
  if (!(i0 >= 0.0)) throw ConfigError("switch: i0 must be >= 0");
}

SwitchSpec SwitchSpec::parse_json(const std::string& text) {
  SwitchSpec s;
  try {
    const json j = json::parse(text);
    if (j.contains("mode")) s.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("i0")) {
      const auto& v = j.at("i0");
      if (v.is_number()) {
        s.i0 = v.get<double>();
        s.auto_quantile.reset();
      } else if (v.is_string()) {
        const auto str = v.get<std::string>();
        if (str == "inf") {
          s.i0 = std::numeric_limits<double>::infinity();
          s.auto_quantile.reset();
        } else if (str.rfind("auto:q", 0) == 0) {
          try {
            s.auto_quantile = std::stod(str.substr(6));
          } catch (const std::exception&) {
            throw ConfigError("switch: bad quantile in '" + str + "'");
          }
          if (!(*s.auto_quantile > 0.0 && *s.auto_quantile <= 1.0)) throw ConfigError("switch: quantile must lie in (0, 1]");
        } else {
          throw ConfigError("switch: i0 must be a number or \"auto:q<quantile>\"");
        }
      } else {
        throw ConfigError("switch: i0 must be a number or \"auto:q<quantile>\"");
      }
    }
    if (j.contains("beta")) s.beta = j.at("beta").get<double>();
    if (j.contains("beta_fraction")) s.beta_fraction = j.at("beta_fraction").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("switch config: ") + e.what());
  }
  if (s.beta && !(*s.beta > 0.0)) throw ConfigError("switch: beta must be > 0");
  if (!(s.beta_fraction > 0.0)) throw ConfigError("switch: beta_fraction must be > 0");
  return s;
}

SwitchSpec SwitchSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open switch config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

std::string SwitchSpec::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  if (i0) {
    if (std::isinf(*i0)) j["i0"] = "inf";
    else j["i0"] = *i0;
  } else if (auto_quantile) {
    std::ostringstream q;
    q << "auto:q" << *auto_quantile;
    j["i0"] = q.str();
  }
  if (beta) j["beta"] = *beta;
  j["beta_fraction"] = beta_fraction;
  return j.dump();
}

SwitchConfig SwitchSpec::resolve(std::span<const double> pooled) const {
  SwitchConfig c;
  c.mode = mode;
  if (i0) c.i0 = *i0;
  else if (auto_quantile) {
    if (pooled.empty()) throw ConfigError("switch: automatic threshold needs corpus intensities");
    c.i0 = calibrate_threshold(pooled, *auto_quantile);
  } else {
    throw ConfigError("switch: no threshold given");
  }
  if (beta) c.beta = *beta;
  else {
    c.beta = beta_fraction * c.i0;
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) {
      // Zero or infinite threshold leaves no scale; any positive beta gives the same decisions there.
      c.beta = 1e-3;
    }
  }
  c.validate();
  return c;
}

PolicyBlend hard_switch(double intensity, const SwitchConfig& cfg) { return {intensity > cfg.i0 ? 1.0 : 0.0}; }

PolicyBlend soft_switch(double intensity, const SwitchConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw ArgumentError("soft_switch: beta must be > 0");
  const double z = (intensity - cfg.i0) / cfg.beta;
  // Evaluated on the non-overflowing side.
  if (z >= 0.0) return {1.0 / (1.0 + std::exp(-z))};
  const double e = std::exp(z);
  return {e / (1.0 + e)};
}

PolicyBlend blend(double intensity, const SwitchConfig& cfg) {
  return cfg.mode == Mode::Hard ? hard_switch(intensity, cfg) : soft_switch(intensity, cfg);
}

double blended_accel(const PolicyBlend& b, double a_int, double a_non) {
  if (b.w_int == 1.0) return a_int;
  if (b.w_int == 0.0) return a_non;
  return b.w_int * a_int + (1.0 - b.w_int) * a_non;
}

double calibrate_threshold(std::span<const double> values, double q) {
  if (values.empty()) throw ArgumentError("calibrate_threshold: no intensities");
  if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("calibrate_threshold: q must lie in (0, 1]");
  return stats::quantile_nearest_rank(values, q);
}

std::string to_string(Mode m) { return m == Mode::Hard ? "hard" : "soft"; }

Mode parse_mode(const std::string& s) {
  if (s == "hard") return Mode::Hard;
  if (s == "soft") return Mode::Soft;
  throw ConfigError("switch: unknown mode '" + s + "'");
}

}  // namespace cfs::switching
