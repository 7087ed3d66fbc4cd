#include "cfs/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"
#include "internal.hpp"

#ifndef CFS_VERSION
#define CFS_VERSION "0.0.0"
#endif

namespace cfs::cli {
namespace {

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(ss.str())));
  return buf;
}

json file_list(const std::vector<fs::path>& files) {
  json arr = json::array();
  for (const auto& f : files) {
    if (fs::is_directory(f)) {
      arr.push_back({{"path", f.string()}, {"kind", "directory"}});
      continue;
    }
    arr.push_back({{"path", f.string()}, {"fnv1a64", file_digest(f)}});
  }
  return arr;
}

int replay(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Re-run a recorded invocation", "cfswitch replay"};
  std::string manifest, out_dir;
  app.add_option("--manifest", manifest, "manifest.json written by an earlier run")->required();
  app.add_option("--out-dir", out_dir, "write outputs here instead of the recorded directory");
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  json m;
  try {
    m = read_json_file(manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
  if (!out_dir.empty()) {
    // Everything goes under the new directory: explicit --out paths are
    // dropped so outputs take their default names there.
    const std::string abs = fs::absolute(out_dir).string();
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--out-dir" || argv[i] == "--out") {
        ++i;
        continue;
      }
      if (argv[i].rfind("--out=", 0) == 0 || argv[i].rfind("--out-dir=", 0) == 0) continue;
      kept.push_back(argv[i]);
    }
    argv = std::move(kept);
    argv.insert(argv.begin(), {"--out-dir", abs});
  }
  const fs::path here = fs::current_path();
  const fs::path recorded = m.value("cwd", here.string());
  std::error_code ec;
  fs::current_path(recorded, ec);
  if (ec) {
    err << "error: cannot enter recorded working directory " << recorded << '\n';
    return kExitData;
  }
  const int code = run(argv, out, err);
  fs::current_path(here);
  return code;
}

}  // namespace

void Context::log(const std::string& msg) const {
  if (global.verbose) err << msg << '\n';
}

fs::path Context::out_path(const std::string& name) const { return fs::path(global.out_dir) / name; }

void Context::write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
  note_output(p);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!args.empty() && args.front() == "replay") return replay({args.begin() + 1, args.end()}, out, err);

  CLI::App app{"Interaction-aware car-following: intensity quantification and policy switching", "cfswitch"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", CFS_VERSION);
  app.footer("Also: cfswitch replay --manifest <manifest.json> [--out-dir DIR]");

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config; per-subcommand sections, flags take precedence");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_flag("--verbose", g.verbose, "progress messages on stderr");

  std::vector<Command> commands = {add_ingest(app),    add_synth(app),     add_fit(app),
                                   add_quantify(app),  add_sample(app),    add_calibrate(app),
                                   add_simulate(app),  add_evaluate(app),  add_plot(app)};

  json config;
  const Command* chosen = nullptr;
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    for (const auto& c : commands)
      if (c.app->parsed()) chosen = &c;
    if (!g.config.empty()) {
      config = read_json_file(g.config);
      apply_config(app, config);
      if (chosen && config.contains(chosen->app->get_name())) apply_config(*chosen->app, config.at(chosen->app->get_name()));
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  if (!chosen) {
    err << app.help();
    return kExitUsage;
  }

  Context ctx{g, out, err, {}, {}};
  if (!g.config.empty()) ctx.note_input(g.config);
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  std::string message;
  try {
    fs::create_directories(g.out_dir);
    chosen->run(ctx);
  } catch (const CLI::ParseError& e) {
    code = kExitUsage;
    message = e.what();
  } catch (const NumericError& e) {
    code = kExitNumeric;
    message = e.what();
  } catch (const CollisionError& e) {
    code = kExitNumeric;
    message = e.what();
  } catch (const Error& e) {
    code = kExitData;
    message = e.what();
  } catch (const fs::filesystem_error& e) {
    code = kExitData;
    message = e.what();
  } catch (const json::exception& e) {
    code = kExitData;
    message = e.what();
  }
  if (code != kExitOk) err << "error: " << message << '\n';
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json manifest;
  manifest["tool"] = "cfswitch";
  manifest["version"] = CFS_VERSION;
  manifest["subcommand"] = chosen->app->get_name();
  manifest["argv"] = args;
  manifest["cwd"] = fs::current_path().string();
  manifest["seed"] = ctx.global.seed;
  manifest["exit_code"] = code;
  if (!message.empty()) manifest["error"] = message;
  manifest["inputs"] = file_list(ctx.inputs);
  manifest["outputs"] = file_list(ctx.outputs);
  manifest["effective_config"] = {{"global", effective_options(app)}, {chosen->app->get_name(), effective_options(*chosen->app)}};
  if (!config.is_null()) manifest["config_file"] = config;
  manifest["wall_time_s"] = wall;
  try {
    fs::create_directories(ctx.global.out_dir);
    std::ofstream mf(fs::path(ctx.global.out_dir) / "manifest.json", std::ios::binary);
    mf << manifest.dump(2) << '\n';
  } catch (const std::exception& e) {
    err << "warning: manifest not written: " << e.what() << '\n';
  }
  return code;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace cfs::cli
