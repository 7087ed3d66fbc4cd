#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cfs/gmm.hpp"
#include "cfs/idm.hpp"
#include "cfs/rng.hpp"
#include "cfs/trajectory.hpp"

namespace cfs::test {

using gmm::Gmm;
using gmm::Matrix;
using gmm::Vector;

/// Single-block layout "x:d".
FeatureLayout flat_layout(std::size_t d);

Gmm gaussian1d(double mean, double sd);
Gmm mixture1d(const std::vector<double>& weights, const std::vector<double>& means, const std::vector<double>& sds);

/// Well-conditioned random SPD matrix (eigenvalues in [0.2, 3]).
Matrix random_spd(std::size_t d, Rng& rng);

/// Random mixture on the flat layout; weights bounded away from 0.
Gmm random_gmm(std::size_t k, std::size_t d, Rng& rng, double spread = 3.0);

/// Random mixture on an arbitrary layout.
Gmm random_gmm(const FeatureLayout& layout, std::size_t k, Rng& rng, double spread = 3.0);

/// Adaptive Simpson quadrature of f on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10);

/// Minimum of the transportation problem over every basic feasible
/// solution, found by enumerating bases of m + n - 1 cells.
double brute_force_transport(const std::vector<double>& supply, const std::vector<double>& demand, const Matrix& cost);

/// Leader at constant speed v, follower at the same speed `gap` metres
/// behind the leader's rear.
TrajectoryPair constant_pair(std::size_t n, double dt, double v, double gap, const std::string& id = "const");

/// Leader cruising at v, braking at `decel` from t_brake for `brake_time`
/// seconds, then cruising again. The follower is driven by p from the
/// equilibrium gap. 25 Hz generation decimated to dt.
TrajectoryPair brake_pair(const idm::IdmParams& p, double duration, double dt, double v, double t_brake, double decel,
                          double brake_time, const std::string& id = "brake");

/// Leader cruising at v, braking at decel over [20, 24) s and recovering
/// at 1 m/s^2 from 40 s; follower driven by p at the same step dt, so the
/// pair lies inside the IDM model class. Gaussian noise of sd metres is
/// added to the recorded follower positions.
TrajectoryPair idm_pair(const idm::IdmParams& p, double v, double decel, double dt, double duration, double noise_sd,
                        std::uint64_t noise_seed, const std::string& id = "idm");

/// Fresh empty directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

}  // namespace cfs::test
