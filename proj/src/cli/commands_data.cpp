#include <fstream>
#include <map>
#include <sstream>

#include "cfs/error.hpp"
#include "cfs/ingest.hpp"
#include "cfs/plots.hpp"
#include "internal.hpp"

namespace cfs::cli {
namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name, const fs::path& path) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError(path.string() + ": missing column '" + name + "'");
  }
  std::vector<double> values(std::size_t col) const {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.at(col));
    return v;
  }
};

Table read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw EmptyCorpusError(path.string() + " is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": bad number '" + cell + "'", lineno);
      }
    }
    if (row.size() != t.header.size()) throw ParseError(path.string() + ": wrong field count", lineno);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<fs::path> expand_csv_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> d;
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".csv") d.push_back(e.path());
      std::sort(d.begin(), d.end());
      files.insert(files.end(), d.begin(), d.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

json index_list(const std::vector<std::size_t>& pos, const interaction::IntensitySeries& s) {
  json a = json::array();
  for (std::size_t k : pos) a.push_back(s.index.at(k));
  return a;
}

}  // namespace

Command add_ingest(CLI::App& app) {
  struct Opts {
    std::vector<std::string> tracks;
    std::string schema;
    double min_duration = 15.0;
    double max_gap = 120.0;
    std::size_t factor = 5;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("ingest", "Extract car-following pairs from per-frame track CSVs");
  sub->add_option("--tracks", o->tracks, "track CSV files")->required()->check(CLI::ExistingFile);
  sub->add_option("--schema", o->schema, "JSON column mapping")->check(CLI::ExistingFile);
  sub->add_option("--min-duration", o->min_duration, "minimum pair duration [s]")->check(CLI::PositiveNumber);
  sub->add_option("--max-gap", o->max_gap, "maximum gap [m]")->check(CLI::PositiveNumber);
  sub->add_option("--factor", o->factor, "decimation factor")->check(CLI::PositiveNumber);
  return {sub, [o](Context& ctx) {
            ingest::ColumnSchema schema;
            if (!o->schema.empty()) {
              schema = ingest::ColumnSchema::from_json_file(o->schema);
              ctx.note_input(o->schema);
            }
            std::vector<TrajectoryPair> all;
            for (const auto& file : o->tracks) {
              ctx.note_input(file);
              const auto tracks = ingest::parse_tracks(file, schema);
              auto pairs = ingest::extract_pairs(tracks, 1.0 / schema.frame_rate, {o->min_duration, o->max_gap});
              for (auto& p : pairs) {
                p = ingest::downsample(p, o->factor);
                if (o->tracks.size() > 1) p.pair_id = fs::path(file).stem().string() + "_" + p.pair_id;
                all.push_back(std::move(p));
              }
              ctx.log(file + ": " + std::to_string(tracks.size()) + " tracks, " + std::to_string(pairs.size()) + " pairs");
            }
            const auto m = ingest::write_corpus(ctx.global.out_dir, all, "recorded");
            for (const auto& e : m.pairs) ctx.note_output(ctx.out_path(e.file));
            ctx.note_output(ctx.out_path("corpus.json"));
            ctx.out << all.size() << " pairs written to " << ctx.global.out_dir << '\n';
          }};
}

Command add_synth(CLI::App& app) {
  auto c = std::make_shared<ingest::SynthConfig>();
  CLI::App* sub = app.add_subcommand("synth", "Generate a synthetic corpus from a ground-truth IDM follower");
  sub->add_option("--pairs", c->n_pairs, "number of pairs")->check(CLI::PositiveNumber);
  sub->add_option("--event-rate", c->event_rate, "leader braking events per second")->check(CLI::NonNegativeNumber);
  sub->add_option("--duration", c->duration, "pair duration [s]")->check(CLI::PositiveNumber);
  sub->add_option("--alert-gain", c->alert_gain, "strength of the follower's alert regime (0 disables)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--reaction-time", c->reaction_time, "follower reaction time [s]")->check(CLI::NonNegativeNumber);
  sub->add_option("--accel-noise", c->accel_noise, "follower acceleration noise std [m/s^2]")->check(CLI::NonNegativeNumber);
  sub->add_option("--factor", c->factor, "decimation from 25 Hz")->check(CLI::PositiveNumber);
  auto out = std::make_shared<std::string>();
  sub->add_option("--out", *out, "output directory (same as --out-dir)");
  return {sub, [c, out](Context& ctx) {
            if (!out->empty()) ctx.global.out_dir = *out;
            ingest::SynthConfig cfg = *c;
            cfg.seed = ctx.global.seed;
            const auto corpus = ingest::synth_corpus(cfg);
            const auto m = ingest::write_corpus(ctx.global.out_dir, corpus.pairs, "synthetic");
            for (const auto& e : m.pairs) ctx.note_output(ctx.out_path(e.file));
            ctx.note_output(ctx.out_path("corpus.json"));
            json truth = json::array();
            for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
              const auto& t = corpus.truth[i];
              const auto params = [](const idm::IdmParams& p) {
                return json{{"v0", p.v0}, {"T", p.T}, {"s0", p.s0}, {"a_max", p.a_max}, {"b", p.b}};
              };
              truth.push_back({{"pair_id", corpus.pairs[i].pair_id},
                               {"calm", params(t.calm)},
                               {"alert", params(t.alert)},
                               {"brake_onsets", t.brake_onsets}});
            }
            ctx.write_text(ctx.out_path("truth.json"), truth.dump(1) + "\n");
            ctx.out << corpus.pairs.size() << " synthetic pairs written to " << ctx.global.out_dir << '\n';
          }};
}

Command add_sample(CLI::App& app) {
  struct Opts {
    std::string data, intensity_dir;
    double frac_int = 0.03, frac_non = 0.03, frac_rand = 0.06;
    bool no_plots = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("sample", "Split each pair's timesteps by intensity");
  sub->add_option("--data", o->data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--intensity-dir", o->intensity_dir, "directory of <pair_id>.csv intensity files")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--frac-int", o->frac_int, "interactive fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--frac-non", o->frac_non, "non-interactive fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--frac-rand", o->frac_rand, "random fraction")->check(CLI::Range(0.0, 1.0));
  sub->add_flag("--no-plots", o->no_plots, "skip the per-pair SVGs");
  return {sub, [o](Context& ctx) {
            const auto pairs = ingest::read_corpus(o->data);
            ctx.note_input(o->data);
            ctx.note_input(o->intensity_dir);
            const auto series = read_intensity_dir(o->intensity_dir, pairs);
            json out = json::object();
            for (std::size_t p = 0; p < pairs.size(); ++p) {
              const auto split = interaction::split_by_intensity(series[p].values, o->frac_int, o->frac_non, o->frac_rand,
                                                                 pair_seed(ctx.global.seed, pairs[p].pair_id));
              out[pairs[p].pair_id] = {{"interactive", index_list(split.interactive, series[p])},
                                       {"non_interactive", index_list(split.non_interactive, series[p])},
                                       {"random", index_list(split.random, series[p])}};
              if (!o->no_plots)
                ctx.write_text(ctx.out_path("samples_" + pairs[p].pair_id + ".svg"),
                               plots::samples_svg(pairs[p], series[p], split, "samples: " + pairs[p].pair_id));
            }
            json doc = {{"fractions", {{"interactive", o->frac_int}, {"non_interactive", o->frac_non}, {"random", o->frac_rand}}},
                        {"pairs", out}};
            ctx.write_text(ctx.out_path("splits.json"), doc.dump(1) + "\n");
            ctx.out << "splits for " << pairs.size() << " pairs written\n";
          }};
}

Command add_plot(CLI::App& app) {
  struct Opts {
    std::string kind;
    std::vector<std::string> inputs;
    std::string pair;
    std::size_t bins = 40;
    std::string title;
    std::string out;
    double frac_int = 0.03, frac_non = 0.03, frac_rand = 0.06;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("plot", "Render SVG figures from CSV outputs");
  sub->add_option("--kind", o->kind, "histogram | profile | samples | sim")
      ->required()
      ->check(CLI::IsMember({"histogram", "profile", "samples", "sim"}));
  sub->add_option("--input", o->inputs, "CSV files or directories")->required();
  sub->add_option("--pair", o->pair, "pair CSV (samples, sim)");
  sub->add_option("--bins", o->bins, "histogram bins")->check(CLI::PositiveNumber);
  sub->add_option("--title", o->title, "figure title");
  sub->add_option("--out", o->out, "SVG path (default <out-dir>/<kind>.svg)");
  sub->add_option("--frac-int", o->frac_int, "interactive fraction (samples)");
  sub->add_option("--frac-non", o->frac_non, "non-interactive fraction (samples)");
  sub->add_option("--frac-rand", o->frac_rand, "random fraction (samples)");
  return {sub, [o](Context& ctx) {
            const auto files = expand_csv_inputs(o->inputs);
            for (const auto& f : files) ctx.note_input(f);
            if (files.empty()) throw EmptyCorpusError("plot: no input CSV files");
            const fs::path out = o->out.empty() ? ctx.out_path(o->kind + ".svg") : fs::path(o->out);
            std::string svg;
            if (o->kind == "histogram") {
              std::vector<double> pooled;
              for (const auto& f : files) {
                const Table t = read_numeric_csv(f);
                const auto v = t.values(t.column("intensity", f));
                pooled.insert(pooled.end(), v.begin(), v.end());
              }
              if (pooled.empty()) throw EmptyCorpusError("plot: input holds no intensity rows");
              const auto h = plots::histogram(pooled, o->bins);
              svg = plots::histogram_svg(h, o->title.empty() ? "interaction intensity" : o->title, "intensity");
              ctx.out << "histogram of " << pooled.size() << " timesteps\n";
            } else if (o->kind == "profile") {
              std::vector<plots::Line> lines;
              for (const auto& f : files) {
                const Table t = read_numeric_csv(f);
                if (t.rows.empty()) throw EmptyCorpusError(f.string() + " holds no rows");
                lines.push_back({f.stem().string(), t.values(t.column("t", f)), t.values(t.column("intensity", f))});
              }
              svg = plots::profile_svg(lines, o->title.empty() ? "interaction intensity" : o->title, "t [s]", "intensity");
            } else if (o->kind == "samples") {
              if (o->pair.empty()) throw ConfigError("plot samples needs --pair");
              const auto pair = ingest::read_pair_csv(o->pair);
              ctx.note_input(o->pair);
              const auto series = read_intensity_csv(files.front(), pair);
              const auto split = interaction::split_by_intensity(series.values, o->frac_int, o->frac_non, o->frac_rand,
                                                                 pair_seed(ctx.global.seed, pair.pair_id));
              svg = plots::samples_svg(pair, series, split, o->title.empty() ? "samples: " + pair.pair_id : o->title);
            } else {
              if (o->pair.empty()) throw ConfigError("plot sim needs --pair");
              const auto pair = ingest::read_pair_csv(o->pair);
              ctx.note_input(o->pair);
              const Table t = read_numeric_csv(files.front());
              if (t.rows.empty()) throw EmptyCorpusError(files.front().string() + " holds no rows");
              const std::size_t c_run = t.column("run", files.front()), c_x = t.column("x_foll", files.front());
              const std::size_t c_i = t.column("intensity", files.front()), c_w = t.column("w_int", files.front());
              plots::SimPlot sp;
              sp.title = o->title.empty() ? "simulation: " + pair.pair_id : o->title;
              for (std::size_t i = 0; i < pair.size(); ++i) {
                sp.t.push_back(pair.follower[i].t);
                sp.leader_x.push_back(pair.leader[i].x);
                sp.human_x.push_back(pair.follower[i].x);
              }
              std::map<long, std::vector<double>> runs;
              for (const auto& r : t.rows) {
                const auto run = static_cast<long>(r[c_run]);
                runs[run].push_back(r[c_x]);
                if (run == 0) {
                  sp.intensity.push_back(r[c_i]);
                  sp.w_int.push_back(r[c_w]);
                }
              }
              for (auto& [k, v] : runs) sp.runs_x.push_back(std::move(v));
              svg = plots::sim_svg(sp);
            }
            ctx.write_text(out, svg);
            ctx.out << "wrote " << out.string() << '\n';
          }};
}

}  // namespace cfs::cli
