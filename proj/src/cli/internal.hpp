#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfs/interaction.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string config;
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  bool verbose = false;
};

/// State shared by the subcommand handlers of one invocation.
struct Context {
  GlobalOptions global;
  std::ostream& out;
  std::ostream& err;
  std::vector<fs::path> inputs;   // files read, recorded in the manifest
  std::vector<fs::path> outputs;  // files written

  void log(const std::string& msg) const;
  fs::path out_path(const std::string& name) const;  // under --out-dir
  void note_input(const fs::path& p) { inputs.push_back(p); }
  void note_output(const fs::path& p) { outputs.push_back(p); }
  void write_text(const fs::path& p, const std::string& text);
};

using Handler = std::function<void(Context&)>;

struct Command {
  CLI::App* app = nullptr;
  Handler run;
};

// Each registers one subcommand on `app` and returns its handler.
Command add_ingest(CLI::App& app);
Command add_synth(CLI::App& app);
Command add_fit(CLI::App& app);
Command add_quantify(CLI::App& app);
Command add_sample(CLI::App& app);
Command add_calibrate(CLI::App& app);
Command add_simulate(CLI::App& app);
Command add_evaluate(CLI::App& app);
Command add_plot(CLI::App& app);

/// Fills options of `app` that were not given on the command line from the
/// matching keys of `section` (dashes or underscores).
void apply_config(CLI::App& app, const json& section);

/// Option name -> effective value (given or default) for `app`.
json effective_options(const CLI::App& app);

json read_json_file(const fs::path& path);

/// Intensity CSV: header "t,intensity".
void write_intensity_csv(const fs::path& path, const interaction::IntensitySeries& s);

/// Reads an intensity CSV written for `pair`, recovering sample indices
/// from the timestamps.
interaction::IntensitySeries read_intensity_csv(const fs::path& path, const TrajectoryPair& pair);

/// <dir>/<pair_id>.csv for each pair, pooled values appended to `pooled`.
std::vector<interaction::IntensitySeries> read_intensity_dir(const fs::path& dir, const std::vector<TrajectoryPair>& pairs,
                                                             std::vector<double>* pooled = nullptr);

/// Per-pair seed used by quantify so single-pair and corpus runs agree.
std::uint64_t pair_seed(std::uint64_t seed, const std::string& pair_id);

std::string format_double(double v);

}  // namespace cfs::cli
