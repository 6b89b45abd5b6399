#pragma once

#include <array>
#include <vector>

#include "simt/types.hpp"

namespace simt {

// Latency summary of one action sequence against a (|s|, |t|) pair.
//
//   g(i)  source tokens read when target token i is emitted
//   AL    (1/tau) * sum_{i<=tau} [g(i) - (i-1)/gamma],  gamma = |t|/|s|,
//         tau = min{ i : g(i) = |s| }
//   AP    sum_i g(i) / (|s| * |t|)
//   CW    total READs / number of maximal consecutive-READ segments
//
// When the sequence never reads the full source, tau falls back to the last
// write index and `truncated` is set.
struct LatencyReport {
  std::vector<int> g;
  double al = 0.0;
  double ap = 0.0;
  double cw = 0.0;
  double gamma = 0.0;
  int tau = 0;
  bool truncated = false;
};

std::vector<int> g_vector(const ActionSequence& actions);

double average_lagging(const ActionSequence& actions, int src_len, int tgt_len);
double average_proportion(const ActionSequence& actions, int src_len, int tgt_len);
double consecutive_wait(const ActionSequence& actions);

LatencyReport latency_report(const ActionSequence& actions, int src_len, int tgt_len);

struct BleuReport {
  double bleu = 0.0;  // [0, 100]
  std::array<double, 4> precisions = {0, 0, 0, 0};
  double brevity_penalty = 1.0;
};

// Corpus-level BLEU, geometric mean of clipped n-gram precisions up to
// max_n times the brevity penalty. Orders with no hypothesis n-grams at
// all are dropped from the mean; any zero precision among the used orders
// gives bleu = 0 unless add-one smoothing is on (smoothing applies to
// orders >= 2).
BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references, int max_n = 4,
                       bool smooth = false);

}  // namespace simt
