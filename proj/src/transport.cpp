#include "cfs/transport.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cfs/error.hpp"

namespace cfs {
namespace {

// Basis tree over m row nodes (0..m-1) and n column nodes (m..m+n-1).
struct Tree {
  std::size_t m, n;
  std::vector<std::vector<std::size_t>> adj;

  Tree(std::size_t m_, std::size_t n_, const std::vector<std::pair<std::size_t, std::size_t>>& basis)
      : m(m_), n(n_), adj(m_ + n_) {
    for (const auto& [i, j] : basis) {
      adj[i].push_back(m + j);
      adj[m + j].push_back(i);
    }
  }

  // Node path from `from` to `to` (inclusive).
  std::vector<std::size_t> path(std::size_t from, std::size_t to) const {
    std::vector<std::size_t> parent(m + n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> stack{from};
    parent[from] = from;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (u == to) break;
      for (std::size_t w : adj[u])
        if (parent[w] == std::numeric_limits<std::size_t>::max()) {
          parent[w] = u;
          stack.push_back(w);
        }
    }
    if (parent[to] == std::numeric_limits<std::size_t>::max()) throw NumericError("transport: basis is not a spanning tree");
    std::vector<std::size_t> p{to};
    while (p.back() != from) p.push_back(parent[p.back()]);
    return p;  // to ... from
  }
};

}  // namespace

TransportPlan solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                              const Eigen::MatrixXd& cost) {
  const std::size_t m = supply.size(), n = demand.size();
  if (m == 0 || n == 0) throw ArgumentError("transport: empty marginal");
  if (static_cast<std::size_t>(cost.rows()) != m || static_cast<std::size_t>(cost.cols()) != n)
    throw ArgumentError("transport: cost matrix is not " + std::to_string(m) + " x " + std::to_string(n));
  for (double s : supply)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("transport: supply entries must be finite and >= 0");
  for (double d : demand)
    if (!(d >= 0.0) || !std::isfinite(d)) throw ArgumentError("transport: demand entries must be finite and >= 0");
  const double ts = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double td = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(ts - td) > 1e-9 * std::max(1.0, ts)) throw ArgumentError("transport: supply and demand totals differ");
  if (!cost.allFinite()) throw ArgumentError("transport: cost matrix has non-finite entries");

  TransportPlan plan;
  plan.flow = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));

  // North-west corner; when a row and a column run out together only the row
  // advances, which keeps exactly m + n - 1 (possibly zero) basic cells.
  std::vector<std::pair<std::size_t, std::size_t>> basis;
  std::vector<double> s = supply, d = demand;
  // Absorb the rounding imbalance into the last column.
  d.back() += ts - td;
  if (d.back() < 0.0) d.back() = 0.0;
  std::size_t i = 0, j = 0;
  while (true) {
    const double x = std::min(s[i], d[j]);
    plan.flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    basis.emplace_back(i, j);
    s[i] -= x;
    d[j] -= x;
    if (i == m - 1 && j == n - 1) break;
    if (i == m - 1) ++j;
    else if (j == n - 1) ++i;
    else if (s[i] <= d[j]) ++i;
    else ++j;
  }

  std::vector<std::vector<char>> in_basis(m, std::vector<char>(n, 0));
  for (const auto& [bi, bj] : basis) in_basis[bi][bj] = 1;

  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  const std::size_t max_pivots = 50 * (m + n) * (m + n) + 100;
  std::vector<double> u(m), v(n);
  for (;; ++plan.pivots) {
    if (plan.pivots > max_pivots) throw NumericError("transport: simplex did not terminate");
    Tree tree(m, n, basis);
    // Potentials: u_i + v_j = c_ij on basic cells, u_0 = 0.
    std::vector<char> seen(m + n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : tree.adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        if (a < m) v[b - m] = cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b - m)) - u[a];
        else u[b] = cost(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a - m)) - v[a - m];
        stack.push_back(b);
      }
    }

    // Bland: first nonbasic cell (row-major) with negative reduced cost.
    std::size_t ei = m, ej = n;
    for (std::size_t r = 0; r < m && ei == m; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        if (in_basis[r][c]) continue;
        if (cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - u[r] - v[c] < -tol) {
          ei = r;
          ej = c;
          break;
        }
      }
    if (ei == m) break;

    // Cycle: entering cell (+), then the tree path column ej -> row ei.
    const auto p = tree.path(m + ej, ei);  // ei ... m+ej
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      const std::size_t a = p[k], b = p[k + 1];
      cells.emplace_back(a < m ? a : b, (a < m ? b : a) - m);
    }
    // cells[0] touches row ei and gets "-", alternating from there.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = cells.size();
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      const double f = plan.flow(static_cast<Eigen::Index>(cells[k].first), static_cast<Eigen::Index>(cells[k].second));
      const bool better = f < theta ||
                          (f == theta && cells[k].first * n + cells[k].second < cells[leave].first * n + cells[leave].second);
      if (better) {
        theta = f;
        leave = k;
      }
    }
    plan.flow(static_cast<Eigen::Index>(ei), static_cast<Eigen::Index>(ej)) += theta;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      double& f = plan.flow(static_cast<Eigen::Index>(cells[k].first), static_cast<Eigen::Index>(cells[k].second));
      f += (k % 2 == 0) ? -theta : theta;
    }
    plan.flow(static_cast<Eigen::Index>(cells[leave].first), static_cast<Eigen::Index>(cells[leave].second)) = 0.0;
    in_basis[cells[leave].first][cells[leave].second] = 0;
    in_basis[ei][ej] = 1;
    for (auto& b : basis)
      if (b == cells[leave]) {
        b = {ei, ej};
        break;
      }
  }

  plan.flow = plan.flow.cwiseMax(0.0);
  plan.cost = (plan.flow.array() * cost.array()).sum();
  return plan;
}

}  // namespace cfs
