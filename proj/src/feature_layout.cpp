#include "cfs/feature_layout.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cfs/error.hpp"

namespace cfs {

FeatureLayout::FeatureLayout(const std::vector<std::pair<std::string, std::size_t>>& blocks) {
  std::set<std::string> seen;
  for (const auto& [name, size] : blocks) {
    if (size == 0) throw ArgumentError("block '" + name + "' has zero size");
    if (!seen.insert(name).second) throw ArgumentError("duplicate block '" + name + "'");
    blocks_.push_back({name, dim_, size});
    dim_ += size;
  }
}

FeatureLayout FeatureLayout::car_following(std::size_t history, std::size_t horizon) {
  return FeatureLayout({{blocks::kAccelHistory, history},
                        {blocks::kAccelFuture, horizon},
                        {blocks::kSpeed, history},
                        {blocks::kRelSpeed, history},
                        {blocks::kGap, history}});
}

FeatureLayout FeatureLayout::car_following(double history_s, double horizon_s, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("layout: dt must be > 0");
  const auto h = static_cast<std::size_t>(std::llround(history_s / dt));
  const auto f = static_cast<std::size_t>(std::llround(horizon_s / dt));
  if (h == 0 || f == 0) throw ArgumentError("layout: horizons shorter than one step");
  return car_following(h, f);
}

bool FeatureLayout::has(std::string_view name) const noexcept {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.name == name; });
}

const Block& FeatureLayout::block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ArgumentError("unknown block '" + std::string(name) + "'");
}

std::vector<std::size_t> FeatureLayout::indices(const std::vector<std::string>& names) const {
  for (const auto& n : names) (void)block(n);
  std::vector<std::size_t> idx;
  for (const auto& b : blocks_) {
    if (std::find(names.begin(), names.end(), b.name) == names.end()) continue;
    for (std::size_t i = 0; i < b.size; ++i) idx.push_back(b.offset + i);
  }
  return idx;
}

std::vector<std::string> FeatureLayout::complement(const std::vector<std::string>& names) const {
  for (const auto& n : names) (void)block(n);
  std::vector<std::string> rest;
  for (const auto& b : blocks_)
    if (std::find(names.begin(), names.end(), b.name) == names.end()) rest.push_back(b.name);
  return rest;
}

FeatureLayout FeatureLayout::subset(const std::vector<std::string>& names) const {
  for (const auto& n : names) (void)block(n);
  std::vector<std::pair<std::string, std::size_t>> keep;
  for (const auto& b : blocks_)
    if (std::find(names.begin(), names.end(), b.name) != names.end()) keep.emplace_back(b.name, b.size);
  return FeatureLayout(keep);
}

std::string FeatureLayout::describe() const {
  std::string s;
  for (const auto& b : blocks_) {
    if (!s.empty()) s += ',';
    s += b.name + ':' + std::to_string(b.size);
  }
  return s;
}

FeatureLayout FeatureLayout::parse(std::string_view description) {
  std::vector<std::pair<std::string, std::size_t>> blocks;
  std::size_t start = 0;
  while (start < description.size()) {
    std::size_t comma = description.find(',', start);
    if (comma == std::string_view::npos) comma = description.size();
    const std::string_view item = description.substr(start, comma - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) throw ParseError("layout item '" + std::string(item) + "' lacks ':'");
    std::size_t size = 0;
    try {
      size = static_cast<std::size_t>(std::stoul(std::string(item.substr(colon + 1))));
    } catch (const std::exception&) {
      throw ParseError("layout item '" + std::string(item) + "' has a bad size");
    }
    blocks.emplace_back(std::string(item.substr(0, colon)), size);
    start = comma + 1;
  }
  return FeatureLayout(blocks);
}

bool operator==(const FeatureLayout& a, const FeatureLayout& b) {
  if (a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t i = 0; i < a.blocks_.size(); ++i)
    if (a.blocks_[i].name != b.blocks_[i].name || a.blocks_[i].size != b.blocks_[i].size) return false;
  return true;
}

}  // namespace cfs
