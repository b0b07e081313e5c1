#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "afgn/errors.hpp"

namespace afgn {

// Scores with binary ground truth; label 1 = fake = positive class.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  size_t size() const { return scores.size(); }
  void add(double score, int label) {
    scores.push_back(score);
    labels.push_back(label);
  }
  size_t positives() const {
    size_t p = 0;
    for (int l : labels) p += l != 0;
    return p;
  }
  void validate() const {
    if (scores.size() != labels.size())
      throw ValueError("scored set: scores and labels differ in length");
    if (scores.empty()) throw ValueError("scored set: empty");
  }
};

// Fraction of samples where (score >= threshold) agrees with the label.
inline double accuracy(const ScoredSet& set, double threshold = 0.5) {
  set.validate();
  size_t hits = 0;
  for (size_t i = 0; i < set.size(); ++i)
    hits += (set.scores[i] >= threshold) == (set.labels[i] != 0);
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

// Ranked-positives average precision: mean over positives of the precision
// at that positive's rank, scores descending, ties kept in input order.
inline double average_precision(const ScoredSet& set) {
  set.validate();
  size_t p = set.positives();
  if (p == 0)
    throw ValueError("average_precision: needs at least one positive");
  std::vector<size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return set.scores[a] > set.scores[b];
  });
  double ap = 0.0;
  size_t hits = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (set.labels[order[rank]] != 0) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(p);
}

// P(score_pos > score_neg) + 0.5 * P(tie), via the rank-sum formulation
// with midranks for ties.
inline double auroc(const ScoredSet& set) {
  set.validate();
  size_t p = set.positives();
  size_t n = set.size() - p;
  if (p == 0 || n == 0)
    throw ValueError("auroc: needs both a positive and a negative sample");
  std::vector<size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return set.scores[a] < set.scores[b];
  });
  // midranks over tie groups (1-based ranks)
  std::vector<double> rank(set.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() &&
           set.scores[order[j + 1]] == set.scores[order[i]])
      ++j;
    double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (size_t k = 0; k < set.size(); ++k)
    if (set.labels[k] != 0) rank_sum += rank[k];
  double u = rank_sum - 0.5 * static_cast<double>(p) * (p + 1);
  return u / (static_cast<double>(p) * static_cast<double>(n));
}

struct ReportRow {
  std::string tag;
  size_t n = 0;
  double accuracy = 0.0;
  double average_precision = 0.0;
  double auroc = 0.0;
};

// CSV schema: source_tag,n,accuracy,average_precision,auroc.
inline void write_report_csv(const std::string& path,
                             const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  out << "source_tag,n,accuracy,average_precision,auroc\n";
  char buf[64];
  for (const auto& row : rows) {
    out << row.tag << "," << row.n;
    for (double v : {row.accuracy, row.average_precision, row.auroc}) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for report " + path);
}

}  // namespace afgn
