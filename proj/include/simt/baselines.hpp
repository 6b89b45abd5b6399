#pragma once

#include <vector>

#include "simt/corpus.hpp"
#include "simt/policy.hpp"

namespace simt {

struct WaitKConfig {
  int k = 1;  // k >= 1
};

enum class HeuristicMode : uint8_t { kWaitIfWorse, kWaitIfDiff };

struct WiwWidConfig {
  HeuristicMode mode = HeuristicMode::kWaitIfWorse;
  int s0 = 1;     // initial reads
  int delta = 1;  // lookahead reads per comparison
};

// The fixed wait-k schedule: read k (capped at |s|), then alternate
// WRITE/READ; once the source is exhausted, the remaining writes come
// consecutively. `writes` fixes the WRITE count (for schedules detached
// from decoding, e.g. latency analysis).
ActionSequence wait_k_schedule(int k, int src_len, int writes);

// Greedy decoding under the wait-k schedule with an unchanged full-sentence
// model: emit the model's top-1 at every scheduled WRITE, stopping at EOS or
// the length cap.
Trajectory wait_k_decode(const WaitKConfig& cfg, const Predictor& predictor,
                         const CorpusEntry& entry, int max_target_len = 0);

// Wait-If-Worse / Wait-If-Diff: after s0 initial reads, compare the model's
// answer at the current read count i against read count i + delta (delta
// truncated at the source end). WIW reads further when the probability of
// the current top-1 token drops under the extended context; WID reads when
// the top-1 identity changes. Triggered comparisons commit the lookahead
// READs for real; otherwise the top-1 at i is written. Source exhaustion
// forces WRITE.
Trajectory wiw_wid_decode(const WiwWidConfig& cfg, const Predictor& predictor,
                          const CorpusEntry& entry, int max_target_len = 0);

std::vector<Trajectory> wait_k_decode_corpus(const WaitKConfig& cfg, const Predictor& predictor,
                                             const std::vector<CorpusEntry>& corpus,
                                             int workers = 1);
std::vector<Trajectory> wiw_wid_decode_corpus(const WiwWidConfig& cfg, const Predictor& predictor,
                                              const std::vector<CorpusEntry>& corpus,
                                              int workers = 1);

}  // namespace simt
