#include "cfs/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cfs/error.hpp"
#include "cfs/rng.hpp"

namespace cfs {

void validate(const TrajectoryPair& pair) {
  if (pair.leader.size() != pair.follower.size()) throw ArgumentError(pair.pair_id + ": leader/follower lengths differ");
  if (!(pair.dt > 0.0)) throw ArgumentError(pair.pair_id + ": dt must be > 0");
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const auto& l = pair.leader[i];
    const auto& f = pair.follower[i];
    if (l.t != f.t) throw ArgumentError(pair.pair_id + ": timestamps not aligned at sample " + std::to_string(i));
    if (i > 0) {
      const double step = f.t - pair.follower[i - 1].t;
      if (!(step > 0.0) || std::abs(step - pair.dt) > 1e-6 * std::max(1.0, pair.dt))
        throw ArgumentError(pair.pair_id + ": non-constant time step at sample " + std::to_string(i));
    }
    if (l.v < 0.0 || f.v < 0.0) throw ArgumentError(pair.pair_id + ": negative speed at sample " + std::to_string(i));
    if (!(pair.dx(i) > 0.0)) throw ArgumentError(pair.pair_id + ": non-positive gap at sample " + std::to_string(i));
  }
}

}  // namespace cfs

namespace cfs::ingest {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double parse_double(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  // from_chars for double is available in libstdc++ >= 11.
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("cannot parse '" + std::string(s) + "' in column " + std::string(column), line);
  return v;
}

long parse_long(std::string_view s, std::size_t line, std::string_view column) {
  const double v = parse_double(s, line, column);
  if (v != std::floor(v)) throw ParseError("expected an integer in column " + std::string(column), line);
  return static_cast<long>(v);
}

struct Row {
  long frame;
  double x, v, a, length;
  long lane, preceding;
};

}  // namespace

ColumnSchema ColumnSchema::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  ColumnSchema s;
  auto get = [&](const char* key, std::string& field) {
    if (j.contains(key)) field = j.at(key).get<std::string>();
  };
  get("id", s.id);
  get("frame", s.frame);
  get("x", s.x);
  get("speed", s.speed);
  get("accel", s.accel);
  get("lane", s.lane);
  get("preceding", s.preceding);
  get("length", s.length);
  if (j.contains("frame_rate")) s.frame_rate = j.at("frame_rate").get<double>();
  if (!(s.frame_rate > 0.0)) throw ConfigError("schema frame_rate must be > 0");
  return s;
}

std::vector<RawTrack> parse_tracks(const fs::path& csv_path, const ColumnSchema& schema) {
  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open " + csv_path.string());
  std::string header_line;
  if (!std::getline(in, header_line) || trim(header_line).empty()) throw EmptyCorpusError(csv_path.string() + " is empty");

  const auto header = split_csv(header_line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "' in " + csv_path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = column(schema.id), c_frame = column(schema.frame), c_x = column(schema.x),
                    c_v = column(schema.speed), c_a = column(schema.accel), c_lane = column(schema.lane),
                    c_prec = column(schema.preceding), c_len = column(schema.length);

  std::map<long, std::vector<Row>> by_vehicle;
  std::set<long> rejected;
  std::string line;
  std::size_t line_no = 1;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()), line_no);
    ++data_rows;
    if (fields[c_id].empty()) throw ParseError("missing vehicle id", line_no);
    const long id = parse_long(fields[c_id], line_no, schema.id);
    const std::size_t mandatory[] = {c_frame, c_x, c_v, c_a, c_lane, c_prec, c_len};
    if (std::any_of(std::begin(mandatory), std::end(mandatory), [&](std::size_t c) { return fields[c].empty(); })) {
      rejected.insert(id);
      continue;
    }
    by_vehicle[id].push_back(Row{parse_long(fields[c_frame], line_no, schema.frame), parse_double(fields[c_x], line_no, schema.x),
                                 parse_double(fields[c_v], line_no, schema.speed), parse_double(fields[c_a], line_no, schema.accel),
                                 parse_double(fields[c_len], line_no, schema.length), parse_long(fields[c_lane], line_no, schema.lane),
                                 parse_long(fields[c_prec], line_no, schema.preceding)});
  }
  if (data_rows == 0) throw EmptyCorpusError(csv_path.string() + " has no data rows");

  std::vector<RawTrack> tracks;
  for (auto& [id, rows] : by_vehicle) {
    if (rejected.count(id)) continue;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    double mean_v = 0.0;
    for (const auto& r : rows) mean_v += r.v;
    // Vehicles moving toward -x are mirrored so x grows along travel; the
    // front bumper is then x + length (rightward) or -x (leftward).
    const bool leftward = mean_v < 0.0;
    RawTrack current;
    std::size_t segment = 0;
    auto flush = [&] {
      if (!current.frames.empty()) tracks.push_back(std::move(current));
      current = RawTrack{};
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      if (i > 0 && r.frame == rows[i - 1].frame) throw ParseError("duplicate frame " + std::to_string(r.frame) + " for vehicle " + std::to_string(id));
      if (i > 0 && r.frame != rows[i - 1].frame + 1) {
        flush();
        ++segment;
      }
      if (current.frames.empty()) {
        current.vehicle_id = id;
        current.segment = segment;
        current.length = r.length;
      }
      current.frames.push_back(r.frame);
      current.x.push_back(leftward ? -r.x : r.x + r.length);
      current.v.push_back(leftward ? -r.v : r.v);
      current.a.push_back(leftward ? -r.a : r.a);
      current.lane.push_back(r.lane);
      current.preceding.push_back(r.preceding);
    }
    flush();
  }
  return tracks;
}

std::vector<TrajectoryPair> extract_pairs(const std::vector<RawTrack>& tracks, double dt, const ExtractOptions& options) {
  if (!(dt > 0.0)) throw ArgumentError("extract_pairs: dt must be > 0");
  // (vehicle, frame) -> (track index, offset)
  std::map<long, std::vector<std::size_t>> tracks_of;
  for (std::size_t i = 0; i < tracks.size(); ++i) tracks_of[tracks[i].vehicle_id].push_back(i);
  auto locate = [&](long vehicle, long frame) -> std::pair<const RawTrack*, std::size_t> {
    const auto it = tracks_of.find(vehicle);
    if (it == tracks_of.end()) return {nullptr, 0};
    for (std::size_t idx : it->second) {
      const RawTrack& t = tracks[idx];
      if (frame >= t.frames.front() && frame <= t.frames.back()) return {&t, static_cast<std::size_t>(frame - t.frames.front())};
    }
    return {nullptr, 0};
  };

  std::vector<TrajectoryPair> pairs;
  for (const RawTrack& foll : tracks) {
    std::size_t i = 0;
    while (i < foll.size()) {
      const long leader_id = foll.preceding[i];
      auto valid_at = [&](std::size_t k, const RawTrack* lead_track) {
        if (foll.preceding[k] != leader_id || foll.lane[k] != foll.lane[i]) return false;
        const auto [lt, off] = locate(leader_id, foll.frames[k]);
        if (!lt || lt != lead_track) return false;
        if (lt->lane[off] != foll.lane[k]) return false;
        const double gap = lt->x[off] - lt->length - foll.x[k];
        return gap > 0.0 && gap <= options.max_gap && foll.v[k] >= 0.0 && lt->v[off] >= 0.0;
      };
      if (leader_id <= 0) {
        ++i;
        continue;
      }
      const RawTrack* lead_track = locate(leader_id, foll.frames[i]).first;
      if (!lead_track || !valid_at(i, lead_track)) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (j < foll.size() && valid_at(j, lead_track)) ++j;
      const std::size_t n = j - i;
      if (static_cast<double>(n - 1) * dt >= options.min_duration - 1e-9) {
        TrajectoryPair p;
        p.pair_id = "f" + std::to_string(foll.vehicle_id) + "_l" + std::to_string(leader_id) + "_s" + std::to_string(foll.frames[i]);
        p.dt = dt;
        p.leader_length = lead_track->length;
        const std::size_t off0 = static_cast<std::size_t>(foll.frames[i] - lead_track->frames.front());
        for (std::size_t k = 0; k < n; ++k) {
          const double t = static_cast<double>(k) * dt;
          p.follower.push_back({t, foll.x[i + k], foll.v[i + k], foll.a[i + k]});
          p.leader.push_back({t, lead_track->x[off0 + k], lead_track->v[off0 + k], lead_track->a[off0 + k]});
        }
        pairs.push_back(std::move(p));
      }
      i = j;
    }
  }
  return pairs;
}

TrajectoryPair downsample(const TrajectoryPair& pair, std::size_t factor) {
  if (factor == 0) throw ArgumentError("downsample: factor must be a positive integer");
  TrajectoryPair out;
  out.pair_id = pair.pair_id;
  out.dt = pair.dt * static_cast<double>(factor);
  out.leader_length = pair.leader_length;
  for (std::size_t i = 0; i < pair.size(); i += factor) {
    out.leader.push_back(pair.leader[i]);
    out.follower.push_back(pair.follower[i]);
  }
  return out;
}

namespace {

idm::IdmParams jitter(const idm::IdmParams& base, double amount, Rng& rng) {
  std::uniform_real_distribution<double> u(1.0 - amount, 1.0 + amount);
  idm::IdmParams p = base;
  p.v0 *= u(rng);
  p.T *= u(rng);
  p.s0 *= u(rng);
  p.a_max *= u(rng);
  p.b *= u(rng);
  return p;
}

idm::IdmParams alert_params(const idm::IdmParams& calm, const SynthConfig& c) {
  auto lerp = [&](double factor) { return 1.0 + c.alert_gain * (factor - 1.0); };
  idm::IdmParams p = calm;
  p.T *= lerp(c.alert_time_headway);
  p.s0 *= lerp(c.alert_jam_gap);
  p.a_max *= lerp(c.alert_max_accel);
  p.b *= lerp(c.alert_comfort_decel);
  return p;
}

enum class LeaderPhase { cruise, brake, recover };

std::pair<TrajectoryPair, SynthTruth> synth_pair(const SynthConfig& c, std::size_t index) {
  Rng rng = make_rng(c.seed, index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SynthTruth truth;
  truth.calm = jitter(c.follower, c.param_jitter, rng);
  truth.alert = alert_params(truth.calm, c);

  const double cruise = uniform(c.cruise_speed_min, c.cruise_speed_max);
  const double leader_length = uniform(c.leader_length_min, c.leader_length_max);

  // Poisson arrivals of braking events over [0, duration).
  if (c.event_rate > 0.0) {
    std::exponential_distribution<double> gap(c.event_rate);
    for (double t = gap(rng); t < c.duration; t += gap(rng)) truth.brake_onsets.push_back(t);
  }
  struct Event {
    double decel, length, recover;
  };
  std::vector<Event> events;
  for (std::size_t k = 0; k < truth.brake_onsets.size(); ++k)
    events.push_back({uniform(c.brake_decel_min, c.brake_decel_max), uniform(c.brake_time_min, c.brake_time_max),
                      uniform(c.recover_accel_min, c.recover_accel_max)});

  const auto n = static_cast<std::size_t>(std::llround(c.duration / c.base_dt)) + 1;
  TrajectoryPair pair;
  pair.pair_id = "pair_" + std::to_string(index);
  pair.dt = c.base_dt;
  pair.leader_length = leader_length;
  pair.leader.reserve(n);
  pair.follower.reserve(n);

  idm::FollowerState lead{0.0, cruise};
  const double gap0 = idm::equilibrium_gap(truth.calm, cruise);
  idm::FollowerState foll{-gap0 - leader_length, cruise};
  lead.x = 0.0;

  LeaderPhase phase = LeaderPhase::cruise;
  std::size_t next_event = 0;
  double phase_end = 0.0;
  double lead_accel_cmd = 0.0;
  double recover_accel = 0.0;
  double alert_until = -1.0;
  double noise = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double decay = std::exp(-c.base_dt / c.noise_time);
  const double kick = c.accel_noise * std::sqrt(1.0 - decay * decay);
  if (c.accel_noise > 0.0) noise = c.accel_noise * normal(rng);

  struct Percept {
    double gap, v_foll, v_lead, a_lead;
  };
  const auto delay = static_cast<std::size_t>(std::llround(c.reaction_time / c.base_dt));
  std::vector<Percept> seen;
  seen.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * c.base_dt;
    while (next_event < events.size() && truth.brake_onsets[next_event] <= t + 1e-12) {
      phase = LeaderPhase::brake;
      phase_end = t + events[next_event].length;
      lead_accel_cmd = -events[next_event].decel;
      recover_accel = events[next_event].recover;
      ++next_event;
    }
    if (phase == LeaderPhase::brake && t >= phase_end) phase = LeaderPhase::recover;
    if (phase == LeaderPhase::recover && lead.v >= cruise) phase = LeaderPhase::cruise;

    double a_lead = 0.0;
    if (phase == LeaderPhase::brake) a_lead = lead.v > c.min_leader_speed ? lead_accel_cmd : 0.0;
    if (phase == LeaderPhase::recover) a_lead = std::min(recover_accel, (cruise - lead.v) / c.base_dt);

    const double gap = lead.x - leader_length - foll.x;
    if (!(gap > 0.0)) throw NumericError("synthetic follower collided in " + pair.pair_id);
    seen.push_back({gap, foll.v, lead.v, a_lead});
    // before the first reaction time has passed the follower acts on the initial state
    const Percept& q = seen[i >= delay ? i - delay : 0];

    if (q.a_lead < -c.alert_trigger) alert_until = t + c.alert_hold;
    const bool alert = c.alert_gain > 0.0 && t <= alert_until;
    const idm::IdmParams& p = alert ? truth.alert : truth.calm;
    truth.alert_by_sample.push_back(alert ? 1.0 : 0.0);

    const double a_foll = idm::clamp_accel(idm::idm_accel(p, q.v_foll, q.v_foll - q.v_lead, q.gap) + noise);

    pair.leader.push_back({t, lead.x, lead.v, a_lead});
    pair.follower.push_back({t, foll.x, foll.v, a_foll});

    lead = idm::integrate(lead, a_lead, c.base_dt);
    foll = idm::integrate(foll, a_foll, c.base_dt);
    if (c.accel_noise > 0.0) noise = decay * noise + kick * normal(rng);
  }

  // Shift so the follower starts at x = 0.
  const double x0 = pair.follower.front().x;
  for (auto& s : pair.leader) s.x -= x0;
  for (auto& s : pair.follower) s.x -= x0;

  if (c.factor > 1) {
    pair = downsample(pair, c.factor);
    std::vector<double> alert_ds;
    for (std::size_t i = 0; i < truth.alert_by_sample.size(); i += c.factor) alert_ds.push_back(truth.alert_by_sample[i]);
    truth.alert_by_sample = std::move(alert_ds);
  }
  // Decimated timestamps are multiples of base_dt; rebuild them on the new grid.
  for (std::size_t i = 0; i < pair.size(); ++i) {
    pair.leader[i].t = pair.follower[i].t = static_cast<double>(i) * pair.dt;
  }
  return {std::move(pair), std::move(truth)};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& config) {
  if (!(config.base_dt > 0.0) || !(config.duration > 0.0)) throw ArgumentError("synth: duration and base_dt must be > 0");
  if (config.factor == 0) throw ArgumentError("synth: factor must be a positive integer");
  if (config.event_rate < 0.0) throw ArgumentError("synth: event_rate must be >= 0");
  if (!(config.reaction_time >= 0.0)) throw ArgumentError("synth: reaction_time must be >= 0");
  SynthCorpus corpus;
  for (std::size_t i = 0; i < config.n_pairs; ++i) {
    auto [pair, truth] = synth_pair(config, i);
    corpus.pairs.push_back(std::move(pair));
    corpus.truth.push_back(std::move(truth));
  }
  return corpus;
}

void write_pair_csv(const TrajectoryPair& pair, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << kPairCsvHeader << '\n';
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const auto& l = pair.leader[i];
    const auto& f = pair.follower[i];
    out << format_double(f.t) << ',' << format_double(l.x) << ',' << format_double(l.v) << ',' << format_double(l.a) << ','
        << format_double(f.x) << ',' << format_double(f.v) << ',' << format_double(f.a) << ',' << format_double(pair.dx(i)) << ','
        << format_double(pair.dv(i)) << '\n';
  }
}

TrajectoryPair read_pair_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw EmptyCorpusError(path.string() + " is empty");
  if (trim(line) != kPairCsvHeader) throw SchemaError(path.string() + ": expected header '" + kPairCsvHeader + "'");
  TrajectoryPair pair;
  pair.pair_id = path.stem().string();
  std::size_t line_no = 1;
  std::vector<double> dxs;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) throw ParseError("expected 9 fields", line_no);
    double v[9];
    for (int k = 0; k < 9; ++k) v[k] = parse_double(f[k], line_no, "pair");
    pair.leader.push_back({v[0], v[1], v[2], v[3]});
    pair.follower.push_back({v[0], v[4], v[5], v[6]});
    dxs.push_back(v[7]);
  }
  if (pair.size() == 0) throw EmptyCorpusError(path.string() + " has no samples");
  pair.leader_length = pair.leader[0].x - pair.follower[0].x - dxs[0];
  pair.dt = pair.size() > 1 ? pair.follower[1].t - pair.follower[0].t : 0.0;
  if (pair.size() > 1) {
    // Use the mean spacing; individual differences carry rounding noise.
    pair.dt = (pair.follower.back().t - pair.follower.front().t) / static_cast<double>(pair.size() - 1);
  }
  for (std::size_t i = 0; i < pair.size(); ++i) {
    if (std::abs(pair.dx(i) - dxs[i]) > 1e-6 * std::max(1.0, std::abs(dxs[i])))
      throw ParseError("dx column inconsistent with positions", i + 2);
  }
  return pair;
}

CorpusManifest write_corpus(const fs::path& dir, const std::vector<TrajectoryPair>& pairs, const std::string& source) {
  fs::create_directories(dir);
  CorpusManifest m;
  m.source = source;
  m.dt = pairs.empty() ? 0.0 : pairs.front().dt;
  std::set<std::string> ids;
  json entries = json::array();
  for (const auto& p : pairs) {
    if (!ids.insert(p.pair_id).second) throw ArgumentError("duplicate pair_id " + p.pair_id);
    const std::string file = p.pair_id + ".csv";
    write_pair_csv(p, dir / file);
    m.pairs.push_back({p.pair_id, p.size(), file});
    entries.push_back({{"pair_id", p.pair_id}, {"length", p.size()}, {"file", file}});
  }
  json j{{"source", source}, {"dt", m.dt}, {"pairs", entries}};
  std::ofstream out(dir / "corpus.json", std::ios::binary);
  out << j.dump(2) << '\n';
  return m;
}

std::vector<TrajectoryPair> read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("corpus directory " + dir.string() + " does not exist");
  std::vector<TrajectoryPair> pairs;
  const fs::path manifest = dir / "corpus.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ParseError(manifest.string() + ": " + e.what());
    }
    for (const auto& e : j.at("pairs")) {
      TrajectoryPair p = read_pair_csv(dir / e.at("file").get<std::string>());
      p.pair_id = e.at("pair_id").get<std::string>();
      pairs.push_back(std::move(p));
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) pairs.push_back(read_pair_csv(f));
  }
  if (pairs.empty()) throw EmptyCorpusError("no pairs in " + dir.string());
  return pairs;
}

}  // namespace cfs::ingest
