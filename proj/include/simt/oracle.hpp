#pragma once

#include <limits>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/metrics.hpp"
#include "simt/predictor.hpp"

namespace simt {

struct OracleConfig {
  int rank_threshold = 1;  // write when the gold token's rank <= this
  double al_cap = 3.0;     // keep sequences with AL <= al_cap; +inf disables

  static constexpr double kNoCap = std::numeric_limits<double>::infinity();
};

enum class RejectReason : uint8_t { kNone = 0, kEarlyFinish, kAlExceeded, kError };

const char* reject_reason_name(RejectReason r);

struct OracleRecord {
  int64_t pair_id = 0;
  ActionSequence actions;
  LatencyReport latency;
  bool kept = false;
  RejectReason reason = RejectReason::kNone;
  std::string error;  // set when reason == kError
};

struct OracleStats {
  int64_t total = 0;
  int64_t kept = 0;
  int64_t early_finish = 0;
  int64_t al_exceeded = 0;
  int64_t errors = 0;
  double mean_al_kept = 0.0;

  double kept_fraction() const { return total ? double(kept) / double(total) : 0.0; }
};

// The action-sequence generator: start from [R]; while target tokens remain,
// WRITE when the gold next token ranks within the threshold or the source is
// exhausted, otherwise READ. The target prefix fed to the model is always
// the gold prefix.
ActionSequence generate_sequence(const Predictor& predictor, const CorpusEntry& entry,
                                 const OracleConfig& cfg);

// Fills in latency, the kept flag and the rejection reason for a generated
// sequence. A sequence must read the whole source before its final WRITE
// and have AL <= al_cap (inclusive) to be kept; the receive-all-source check
// runs first.
OracleRecord apply_filters(int64_t pair_id, ActionSequence actions, int src_len, int tgt_len,
                           const OracleConfig& cfg);

// generate_sequence + apply_filters over a corpus, sharded over `workers`
// threads. Results are in corpus order regardless of worker count; per-pair
// predictor failures become kError records and processing continues.
std::vector<OracleRecord> generate_corpus(const Predictor& predictor,
                                          const std::vector<CorpusEntry>& corpus,
                                          const OracleConfig& cfg, int workers = 1,
                                          OracleStats* stats = nullptr);

OracleStats summarize(const std::vector<OracleRecord>& records);

// TSV: pair id, action string, status (ok | early_finish | al_exceeded | error).
void save_oracle_records(const std::string& path, const std::vector<OracleRecord>& records);
std::vector<OracleRecord> load_oracle_records(const std::string& path);

}  // namespace simt
