#pragma once

#include <string>

namespace cfs::idm {

/// Intelligent driver model parameters (SI units). The acceleration
/// exponent is fixed at 4.
struct IdmParams {
  double v0 = 33.0;    // desired speed
  double T = 1.5;      // desired time headway
  double s0 = 2.0;     // jam spacing
  double a_max = 1.0;  // maximum acceleration
  double b = 1.5;      // comfortable deceleration

  static constexpr double delta = 4.0;

  friend bool operator==(const IdmParams&, const IdmParams&) = default;
};

/// Throws ArgumentError unless every parameter is finite and > 0.
void validate(const IdmParams& p);

inline constexpr double kMinAccel = -9.0;
inline constexpr double kMaxAccel = 5.0;

/// s* = s0 + v T + v dv / (2 sqrt(a_max b)), floored at s0.
/// approach_rate is v_foll - v_lead.
double desired_gap(const IdmParams& p, double v, double approach_rate);

/// a_max [1 - (v/v0)^4 - (s*/s)^2]. Throws CollisionError for gap <= 0.
double idm_accel(const IdmParams& p, double v, double approach_rate, double gap);

/// Steady-state gap behind a leader cruising at v < v0.
double equilibrium_gap(const IdmParams& p, double v);

struct FollowerState {
  double x = 0.0;
  double v = 0.0;
};

/// x is the leader's front bumper; the gap subtracts length.
struct LeaderState {
  double x = 0.0;
  double v = 0.0;
  double length = 0.0;
};

struct StepResult {
  FollowerState next;
  double accel = 0.0;  // applied, after clamping
};

/// Semi-implicit Euler with the acceleration clamped to [kMinAccel, kMaxAccel]:
/// v+ = max(0, v + a dt), x+ = x + (v + v+) dt / 2.
FollowerState integrate(const FollowerState& s, double accel, double dt);

double clamp_accel(double a);

/// One IDM step against the given leader. Throws CollisionError if the
/// gap is not positive, ArgumentError if dt <= 0.
StepResult step(const IdmParams& p, const FollowerState& state, const LeaderState& leader, double dt);

std::string to_string(const IdmParams& p);

}  // namespace cfs::idm
