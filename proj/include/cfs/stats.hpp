#pragma once

#include <span>
#include <vector>

namespace cfs::stats {

double mean(std::span<const double> x);

/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> x);

/// Nearest-rank empirical quantile: the ceil(q * n)-th smallest value.
/// q in (0, 1]; q <= 0 returns the minimum.
double quantile_nearest_rank(std::span<const double> x, double q);

/// Ranks starting at 1, ties receive the average rank.
std::vector<double> ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace cfs::stats
