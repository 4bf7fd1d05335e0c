#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/random.hpp"

namespace seft {

/// Largest-remainder apportionment of `total` items to `fractions`.
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions) {
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double exact = fractions[k] * static_cast<double>(total);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[k];
    remainders.emplace_back(-(exact - static_cast<double>(sizes[k])), k);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++sizes[remainders[i % remainders.size()].second];
  return sizes;
}

/// Stratified partition of indices 0..labels.size()-1.
///
/// Members of each class are shuffled and given evenly spaced quantile keys
/// (r + 0.5) / n_c; the merged key order is cut into contiguous chunks of the
/// apportioned sizes, so every split holds each class within one sample of
/// its exact share.
inline std::vector<std::vector<std::size_t>> split_stratified_indices(
    std::span<const int> labels, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ArgumentError("no split fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ArgumentError("empty split requested");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");

  Rng rng(seed);
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 2));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    // unlabeled records (-1) form their own stratum
    by_class[static_cast<std::size_t>(labels[i] + 1)].push_back(i);
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> keyed;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t r = 0; r < members.size(); ++r) {
      keyed.emplace_back((static_cast<double>(r) + 0.5) / static_cast<double>(members.size()), c,
                         members[r]);
    }
  }
  std::sort(keyed.begin(), keyed.end());

  const auto sizes = apportion(labels.size(), fractions);
  std::vector<std::vector<std::size_t>> out(fractions.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) throw ArgumentError("split " + std::to_string(k) + " would be empty");
    for (std::size_t i = 0; i < sizes[k]; ++i) out[k].push_back(std::get<2>(keyed[pos++]));
    std::sort(out[k].begin(), out[k].end());
  }
  return out;
}

inline std::vector<std::vector<TimeSeriesSet>> split_stratified(
    const std::vector<TimeSeriesSet>& data, std::span<const double> fractions, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);
  std::vector<std::vector<TimeSeriesSet>> out;
  for (const auto& idx : split_stratified_indices(labels, fractions, seed)) {
    auto& part = out.emplace_back();
    part.reserve(idx.size());
    for (std::size_t i : idx) part.push_back(data[i]);
  }
  return out;
}

}  // namespace seft
