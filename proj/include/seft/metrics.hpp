#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/errors.hpp"

namespace seft {

namespace detail {

inline void check_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ArgumentError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                        std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) throw ArgumentError("no scored examples");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ArgumentError("labels must be 0 or 1");
  }
}

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline ClassCounts count_classes(std::span<const int> labels) {
  ClassCounts c;
  for (int y : labels) (y == 1 ? c.positives : c.negatives)++;
  return c;
}

/// Indices sorted by score (ascending unless `descending`), ties broken by
/// index so the grouping below never depends on input order.
inline std::vector<std::size_t> score_order(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace detail

/// Mann-Whitney normalization: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
template <typename Real = double>
Real auroc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scored(scores, labels);
  const auto counts = detail::count_classes(labels);
  if (counts.positives == 0 || counts.negatives == 0) {
    throw MetricUndefinedError("AUROC needs both classes");
  }
  const auto order = detail::score_order(scores, false);
  Real u(0);
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t pos = 0, neg = 0, j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      (labels[order[j]] == 1 ? pos : neg)++;
    }
    u += Real(static_cast<long long>(pos)) *
         (Real(static_cast<long long>(negatives_below)) + Real(static_cast<long long>(neg)) / Real(2));
    negatives_below += neg;
    i = j;
  }
  return u / (Real(static_cast<long long>(counts.positives)) * Real(static_cast<long long>(counts.negatives)));
}

/// Step-wise average precision. Tied scores form one group: every positive in
/// the group gets the precision measured after the whole group.
template <typename Real = double>
Real auprc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scored(scores, labels);
  const auto counts = detail::count_classes(labels);
  if (counts.positives == 0) throw MetricUndefinedError("AUPRC needs at least one positive");
  const auto order = detail::score_order(scores, true);
  Real ap(0);
  std::size_t seen = 0, true_positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t pos = 0, j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      if (labels[order[j]] == 1) ++pos;
    }
    seen += j - i;
    true_positives += pos;
    if (pos > 0) {
      ap += Real(static_cast<long long>(pos)) * Real(static_cast<long long>(true_positives)) /
            Real(static_cast<long long>(seen));
    }
    i = j;
  }
  return ap / Real(static_cast<long long>(counts.positives));
}

/// Scores at or above `threshold` are predicted positive.
inline double balanced_accuracy(std::span<const double> scores, std::span<const int> labels,
                                double threshold = 0.5) {
  detail::check_scored(scores, labels);
  const auto counts = detail::count_classes(labels);
  if (counts.positives == 0 || counts.negatives == 0) {
    throw MetricUndefinedError("balanced accuracy needs both classes");
  }
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1 && predicted) ++tp;
    if (labels[i] == 0 && !predicted) ++tn;
  }
  const double tpr = static_cast<double>(tp) / static_cast<double>(counts.positives);
  const double tnr = static_cast<double>(tn) / static_cast<double>(counts.negatives);
  return (tpr + tnr) / 2.0;
}

inline double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  detail::check_scored(scores, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if ((scores[i] >= threshold) == (labels[i] == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

struct EvalReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t n = 0;
  double prevalence = 0.0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// All metrics over sigmoid scores at threshold 0.5.
inline EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.accuracy = accuracy(scores, labels);
  r.balanced_accuracy = balanced_accuracy(scores, labels);
  r.auroc = auroc(scores, labels);
  r.auprc = auprc(scores, labels);
  r.n = scores.size();
  r.prevalence = static_cast<double>(detail::count_classes(labels).positives) / static_cast<double>(r.n);
  return r;
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"accuracy", r.accuracy}, {"balanced_accuracy", r.balanced_accuracy},
                     {"auroc", r.auroc},       {"auprc", r.auprc},
                     {"n", r.n},               {"prevalence", r.prevalence}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  r.accuracy = j.at("accuracy").get<double>();
  r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
  r.auroc = j.at("auroc").get<double>();
  r.auprc = j.at("auprc").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.prevalence = j.at("prevalence").get<double>();
}

}  // namespace seft
