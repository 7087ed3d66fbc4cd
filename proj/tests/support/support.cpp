#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cfs::test {
namespace fs = std::filesystem;

FeatureLayout flat_layout(std::size_t d) { return FeatureLayout({{"x", d}}); }

Gmm gaussian1d(double mean, double sd) { return mixture1d({1.0}, {mean}, {sd}); }

Gmm mixture1d(const std::vector<double>& weights, const std::vector<double>& means, const std::vector<double>& sds) {
  std::vector<Vector> mu;
  std::vector<Matrix> cov;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    mu.push_back(Vector::Constant(1, means[i]));
    cov.push_back(Matrix::Constant(1, 1, sds[i] * sds[i]));
  }
  return Gmm(flat_layout(1), weights, mu, cov);
}

Matrix random_spd(std::size_t d, Rng& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> ev(0.2, 3.0);
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = n01(rng);
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector lambda(d);
  for (std::size_t i = 0; i < d; ++i) lambda(i) = ev(rng);
  Matrix s = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

Gmm random_gmm(const FeatureLayout& layout, std::size_t k, Rng& rng, double spread) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> uw(0.2, 1.0);
  const std::size_t d = layout.dim();
  std::vector<double> w(k);
  double sum = 0.0;
  for (auto& x : w) sum += (x = uw(rng));
  for (auto& x : w) x /= sum;
  std::vector<Vector> mu;
  std::vector<Matrix> cov;
  for (std::size_t i = 0; i < k; ++i) {
    Vector m(d);
    for (std::size_t j = 0; j < d; ++j) m(j) = spread * n01(rng);
    mu.push_back(m);
    cov.push_back(random_spd(d, rng));
  }
  return Gmm(layout, w, mu, cov);
}

Gmm random_gmm(std::size_t k, std::size_t d, Rng& rng, double spread) { return random_gmm(flat_layout(d), k, rng, spread); }

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole,
               double tol, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  // Split first so narrow peaks are not missed by the initial coarse estimate.
  const int pieces = 64;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces, hi = a + (b - a) * (i + 1) / pieces;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    total += simpson(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / pieces, 40);
  }
  return total;
}

double brute_force_transport(const std::vector<double>& supply, const std::vector<double>& demand, const Matrix& cost) {
  const std::size_t m = supply.size(), n = demand.size(), cells = m * n, basis = m + n - 1;
  Matrix a = Matrix::Zero(m + n, cells);
  Vector rhs(m + n);
  for (std::size_t i = 0; i < m; ++i) rhs(i) = supply[i];
  for (std::size_t j = 0; j < n; ++j) rhs(m + j) = demand[j];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      a(i, i * n + j) = 1.0;
      a(m + j, i * n + j) = 1.0;
    }
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(cells, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(basis), true);
  do {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < cells; ++c)
      if (pick[c]) idx.push_back(c);
    Matrix sub(m + n, basis);
    for (std::size_t k = 0; k < basis; ++k) sub.col(k) = a.col(idx[k]);
    const Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    if (qr.rank() < static_cast<Eigen::Index>(basis)) continue;
    const Vector x = qr.solve(rhs);
    if ((sub * x - rhs).cwiseAbs().maxCoeff() > 1e-12) continue;
    if (x.minCoeff() < -1e-12) continue;
    double c = 0.0;
    for (std::size_t k = 0; k < basis; ++k) c += x(k) * cost(idx[k] / n, idx[k] % n);
    best = std::min(best, c);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

TrajectoryPair constant_pair(std::size_t n, double dt, double v, double gap, const std::string& id) {
  TrajectoryPair p;
  p.pair_id = id;
  p.dt = dt;
  p.leader_length = 4.5;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    const double xl = 100.0 + v * t;
    p.leader.push_back({t, xl, v, 0.0});
    p.follower.push_back({t, xl - p.leader_length - gap, v, 0.0});
  }
  return p;
}

TrajectoryPair brake_pair(const idm::IdmParams& prm, double duration, double dt, double v, double t_brake, double decel,
                          double brake_time, const std::string& id) {
  const double h = 0.04;
  const std::size_t factor = static_cast<std::size_t>(std::lround(dt / h));
  const std::size_t steps = static_cast<std::size_t>(std::lround(duration / h));
  TrajectoryPair p;
  p.pair_id = id;
  p.dt = dt;
  p.leader_length = 4.5;
  double xl = 100.0, vl = v;
  idm::FollowerState f{xl - p.leader_length - idm::equilibrium_gap(prm, v), v};
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = h * static_cast<double>(k);
    const double al = (t >= t_brake && t < t_brake + brake_time && vl > 0.0) ? -decel : 0.0;
    const auto r = idm::step(prm, f, {xl, vl, p.leader_length}, h);
    if (k % factor == 0) {
      p.leader.push_back({t, xl, vl, al});
      p.follower.push_back({t, f.x, f.v, r.accel});
    }
    f = r.next;
    const double vn = std::max(0.0, vl + al * h);
    xl += 0.5 * (vl + vn) * h;
    vl = vn;
  }
  // Timestamps on the output grid exactly.
  for (std::size_t i = 0; i < p.size(); ++i) p.leader[i].t = p.follower[i].t = dt * static_cast<double>(i);
  return p;
}

TrajectoryPair idm_pair(const idm::IdmParams& prm, double v, double decel, double dt, double duration, double noise_sd,
                        std::uint64_t noise_seed, const std::string& id) {
  TrajectoryPair p;
  p.pair_id = id;
  p.dt = dt;
  p.leader_length = 4.5;
  double xl = 100.0, vl = v;
  idm::FollowerState f{xl - p.leader_length - idm::equilibrium_gap(prm, v), v};
  const auto n = static_cast<std::size_t>(std::lround(duration / dt)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    double al = 0.0;
    if (t >= 20.0 && t < 24.0) al = -decel;
    else if (t >= 40.0 && vl < v) al = 1.0;
    const auto r = idm::step(prm, f, {xl, vl, p.leader_length}, dt);
    p.leader.push_back({t, xl, vl, al});
    p.follower.push_back({t, f.x, f.v, r.accel});
    f = r.next;
    const double vn = std::max(0.0, vl + al * dt);
    xl += 0.5 * (vl + vn) * dt;
    vl = vn;
  }
  Rng rng(noise_seed);
  std::normal_distribution<double> z(0.0, noise_sd);
  if (noise_sd > 0.0)
    for (auto& s : p.follower) s.x += z(rng);
  return p;
}

TempDir::TempDir(const std::string& name) : path_(fs::path(CFS_TEST_TMP) / name) {
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace cfs::test
