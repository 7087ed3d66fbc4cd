#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfs/idm.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::ingest {

/// Column names of a per-frame track CSV. Defaults follow the HighD
/// tracks files; `width` there is the bounding-box extent along x, i.e.
/// the vehicle length.
struct ColumnSchema {
  std::string id = "id";
  std::string frame = "frame";
  std::string x = "x";
  std::string speed = "xVelocity";
  std::string accel = "xAcceleration";
  std::string lane = "laneId";
  std::string preceding = "precedingId";
  std::string length = "width";
  double frame_rate = 25.0;  // Hz

  static ColumnSchema from_json_file(const std::filesystem::path& path);
};

/// One vehicle over a contiguous run of frames, re-based so that x is the
/// front bumper and increases along the direction of travel.
struct RawTrack {
  long vehicle_id = 0;
  std::size_t segment = 0;  // >0 when the vehicle's frames had gaps
  double length = 0.0;
  std::vector<long> frames;
  std::vector<double> x, v, a;
  std::vector<long> lane, preceding;

  std::size_t size() const noexcept { return frames.size(); }
};

/// Parses a track CSV into one RawTrack per vehicle and contiguous frame run.
/// Rows with an empty mandatory field drop that vehicle entirely; a row with
/// the wrong field count or an unparsable number is a ParseError.
std::vector<RawTrack> parse_tracks(const std::filesystem::path& csv_path, const ColumnSchema& schema = {});

struct ExtractOptions {
  double min_duration = 15.0;  // s
  double max_gap = 120.0;      // m
};

/// Car-following episodes with one unchanged leader in the follower's lane,
/// 0 < dx <= max_gap throughout and span >= min_duration.
std::vector<TrajectoryPair> extract_pairs(const std::vector<RawTrack>& tracks, double dt,
                                          const ExtractOptions& options = {});

/// Keeps samples 0, factor, 2*factor, ...; dt is scaled by factor.
TrajectoryPair downsample(const TrajectoryPair& pair, std::size_t factor);

struct SynthConfig {
  std::size_t n_pairs = 10;
  std::uint64_t seed = 42;
  double event_rate = 0.05;  // braking events per second
  double duration = 60.0;    // s
  double base_dt = 0.04;     // generation step (25 Hz)
  std::size_t factor = 5;    // decimation to the output rate

  double cruise_speed_min = 18.0, cruise_speed_max = 30.0;
  double brake_decel_min = 1.5, brake_decel_max = 4.5;
  double brake_time_min = 1.5, brake_time_max = 4.0;
  double recover_accel_min = 0.6, recover_accel_max = 1.5;
  double min_leader_speed = 3.0;
  double leader_length_min = 4.2, leader_length_max = 5.0;

  idm::IdmParams follower{38.0, 1.2, 2.0, 1.2, 1.8};
  double param_jitter = 0.1;  // uniform +-10 % per pair and parameter

  // The follower switches to a cautious parameter set while the leader is
  // braking harder than alert_trigger, and for alert_hold seconds after.
  double alert_gain = 1.0;  // 0 disables the alert regime
  double alert_trigger = 1.0;
  double alert_hold = 3.0;
  double alert_time_headway = 1.8, alert_jam_gap = 1.5, alert_max_accel = 0.8, alert_comfort_decel = 0.7;

  // The follower acts on the gap and speeds it perceived this long ago.
  double reaction_time = 0.6;  // s
  double accel_noise = 0.05;  // stationary std of the follower's OU acceleration noise
  double noise_time = 1.5;    // OU correlation time, s
};

/// Ground truth behind one synthetic pair.
struct SynthTruth {
  idm::IdmParams calm;
  idm::IdmParams alert;
  std::vector<double> brake_onsets;  // s
  std::vector<double> alert_by_sample;  // 1 where the follower was in the alert regime
};

struct SynthCorpus {
  std::vector<TrajectoryPair> pairs;
  std::vector<SynthTruth> truth;
};

SynthCorpus synth_corpus(const SynthConfig& config);

struct CorpusEntry {
  std::string pair_id;
  std::size_t length = 0;
  std::string file;
};

struct CorpusManifest {
  std::string source;  // "recorded" | "synthetic"
  double dt = 0.0;
  std::vector<CorpusEntry> pairs;
};

inline constexpr const char* kPairCsvHeader = "t,x_lead,v_lead,a_lead,x_foll,v_foll,a_foll,dx,dv";

void write_pair_csv(const TrajectoryPair& pair, const std::filesystem::path& path);

/// pair_id defaults to the file stem.
TrajectoryPair read_pair_csv(const std::filesystem::path& path);

/// Writes <pair_id>.csv for each pair plus corpus.json.
CorpusManifest write_corpus(const std::filesystem::path& dir, const std::vector<TrajectoryPair>& pairs,
                            const std::string& source);

/// Reads corpus.json when present, otherwise every *.csv in name order.
std::vector<TrajectoryPair> read_corpus(const std::filesystem::path& dir);

}  // namespace cfs::ingest
