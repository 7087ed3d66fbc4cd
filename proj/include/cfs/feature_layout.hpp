#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cfs {

namespace blocks {
inline constexpr const char* kAccelHistory = "a_hist";
inline constexpr const char* kAccelFuture = "a_fut";
inline constexpr const char* kSpeed = "v_foll";
inline constexpr const char* kRelSpeed = "dv";
inline constexpr const char* kGap = "dx";
}  // namespace blocks

struct Block {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Ordered named blocks tiling 0..dim().
class FeatureLayout {
 public:
  FeatureLayout() = default;
  explicit FeatureLayout(const std::vector<std::pair<std::string, std::size_t>>& blocks);

  /// a_hist (H), a_fut (F), v_foll (H), dv (H), dx (H).
  static FeatureLayout car_following(std::size_t history, std::size_t horizon);

  /// H = round(history_s / dt), F = round(horizon_s / dt).
  static FeatureLayout car_following(double history_s, double horizon_s, double dt);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  bool has(std::string_view name) const noexcept;

  /// Throws ArgumentError for unknown names.
  const Block& block(std::string_view name) const;

  /// Coordinates of the named blocks, in this layout's order.
  std::vector<std::size_t> indices(const std::vector<std::string>& names) const;

  /// Blocks not listed in names, in layout order.
  std::vector<std::string> complement(const std::vector<std::string>& names) const;

  /// Sub-layout of the named blocks, re-packed from offset 0 in layout order.
  FeatureLayout subset(const std::vector<std::string>& names) const;

  std::string describe() const;  // "a_hist:5,a_fut:3,..."
  static FeatureLayout parse(std::string_view description);

  friend bool operator==(const FeatureLayout& a, const FeatureLayout& b);

 private:
  std::vector<Block> blocks_;
  std::size_t dim_ = 0;
};

}  // namespace cfs
