#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"
#include "internal.hpp"

namespace cfs::cli {
namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

const json* find_key(const json& section, const std::string& name) {
  if (!section.is_object()) return nullptr;
  if (auto it = section.find(name); it != section.end()) return &*it;
  std::string alt = name;
  for (char& c : alt)
    if (c == '-') c = '_';
  if (auto it = section.find(alt); it != section.end()) return &*it;
  return nullptr;
}

}  // namespace

void apply_config(CLI::App& app, const json& section) {
  if (!section.is_object()) throw ConfigError("config section for '" + app.get_name() + "' must be an object");
  for (CLI::Option* opt : app.get_options()) {
    if (opt->count() > 0) continue;
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "version") continue;
    const json* v = find_key(section, name);
    if (!v) continue;
    try {
      if (v->is_array()) {
        for (const auto& e : *v) opt->add_result(scalar_text(e));
      } else {
        opt->add_result(scalar_text(*v));
      }
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config value for '" + name + "': " + e.what());
    }
  }
}

json effective_options(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "version") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_intensity_csv(const fs::path& path, const interaction::IntensitySeries& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t,intensity\n";
  for (std::size_t i = 0; i < s.size(); ++i) out << format_double(s.t[i]) << ',' << format_double(s.values[i]) << '\n';
}

interaction::IntensitySeries read_intensity_csv(const fs::path& path, const TrajectoryPair& pair) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open intensity file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,intensity") throw ParseError(path.string() + ": expected header t,intensity", 1);
  interaction::IntensitySeries s;
  s.pair_id = pair.pair_id;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    double t = 0.0, v = 0.0;
    try {
      if (comma == std::string::npos) throw std::invalid_argument(line);
      t = std::stod(line.substr(0, comma));
      v = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad row", lineno);
    }
    const double pos = (t - pair.follower.front().t) / pair.dt;
    const auto idx = static_cast<long long>(std::llround(pos));
    if (std::abs(pos - static_cast<double>(idx)) > 1e-6 || idx < 0 || static_cast<std::size_t>(idx) >= pair.size())
      throw ParseError(path.string() + ": time " + format_double(t) + " is not a sample of pair " + pair.pair_id, lineno);
    s.index.push_back(static_cast<std::size_t>(idx));
    s.t.push_back(t);
    s.values.push_back(v);
  }
  if (s.values.empty()) throw EmptyCorpusError(path.string() + " holds no intensity rows");
  return s;
}

std::vector<interaction::IntensitySeries> read_intensity_dir(const fs::path& dir, const std::vector<TrajectoryPair>& pairs,
                                                             std::vector<double>* pooled) {
  std::vector<interaction::IntensitySeries> out;
  for (const auto& p : pairs) {
    const fs::path f = dir / (p.pair_id + ".csv");
    if (!fs::exists(f)) throw ConfigError("missing intensity file " + f.string());
    out.push_back(read_intensity_csv(f, p));
    if (pooled) pooled->insert(pooled->end(), out.back().values.begin(), out.back().values.end());
  }
  return out;
}

std::uint64_t pair_seed(std::uint64_t seed, const std::string& pair_id) { return mix_seed(seed, hash_string(pair_id)); }

}  // namespace cfs::cli
