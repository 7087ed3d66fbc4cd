#include "cfs/idm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cfs/error.hpp"

namespace cfs::idm {

void validate(const IdmParams& p) {
  const double vals[] = {p.v0, p.T, p.s0, p.a_max, p.b};
  const char* names[] = {"v0", "T", "s0", "a_max", "b"};
  for (int i = 0; i < 5; ++i) {
    if (!std::isfinite(vals[i]) || vals[i] <= 0.0) throw ArgumentError(std::string("IDM parameter ") + names[i] + " must be > 0");
  }
}

double desired_gap(const IdmParams& p, double v, double approach_rate) {
  const double s = p.s0 + v * p.T + v * approach_rate / (2.0 * std::sqrt(p.a_max * p.b));
  return std::max(p.s0, s);
}

double idm_accel(const IdmParams& p, double v, double approach_rate, double gap) {
  if (!(gap > 0.0)) throw CollisionError("IDM evaluated at non-positive gap " + std::to_string(gap));
  const double r = v / p.v0;
  const double r2 = r * r;
  const double ss = desired_gap(p, v, approach_rate) / gap;
  return p.a_max * (1.0 - r2 * r2 - ss * ss);
}

double equilibrium_gap(const IdmParams& p, double v) {
  const double r = v / p.v0;
  const double free = 1.0 - r * r * r * r;
  if (!(free > 0.0)) throw ArgumentError("equilibrium gap undefined for v >= v0");
  return desired_gap(p, v, 0.0) / std::sqrt(free);
}

double clamp_accel(double a) { return std::clamp(a, kMinAccel, kMaxAccel); }

FollowerState integrate(const FollowerState& s, double accel, double dt) {
  const double a = clamp_accel(accel);
  const double v_next = std::max(0.0, s.v + a * dt);
  return {s.x + 0.5 * (s.v + v_next) * dt, v_next};
}

StepResult step(const IdmParams& p, const FollowerState& state, const LeaderState& leader, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("step: dt must be > 0");
  const double gap = leader.x - leader.length - state.x;
  if (!(gap > 0.0)) throw CollisionError("step: gap " + std::to_string(gap) + " m before stepping");
  const double a = clamp_accel(idm_accel(p, state.v, state.v - leader.v, gap));
  return {integrate(state, a, dt), a};
}

std::string to_string(const IdmParams& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "v0=%.3f T=%.3f s0=%.3f a_max=%.3f b=%.3f", p.v0, p.T, p.s0, p.a_max, p.b);
  return buf;
}

}  // namespace cfs::idm
