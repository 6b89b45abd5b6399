#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simt/types.hpp"

namespace simt {

// Fixed-width real feature vector attached to every prediction; the policy
// network's per-step input.
struct Observation {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
};

// Full ranked next-token distribution, best first, plus features.
struct Prediction {
  std::vector<std::pair<TokenId, double>> ranked;  // (token id, log prob)
  Observation features;

  TokenId top1() const { return ranked.front().first; }
  double top1_prob() const;
};

struct PredictorInfo {
  int vocab_size = 0;
  int feature_dim = 0;
  std::string name;
};

// Everything a predictor may know about the sentence being translated.
// The toy predictor uses the full source and the variant to simulate a
// model trained on the synthetic language; adapters only see the prefixes
// sent over the wire. `reveal_dependency` gates the toy's gold-derived
// dependency-satisfied feature slot: oracle generation and diagnostics may
// see it, while anything that feeds the policy network (training replay,
// every decode path) must leave it zeroed so the label cannot leak into
// the net.
struct SentenceContext {
  int pair_id = -1;
  std::span<const TokenId> source;
  Variant variant = Variant::kNone;
  bool reveal_dependency = false;
};

// Abstract incremental translator: ranked next-token predictions plus an
// observation vector given (source prefix, target prefix).
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual PredictorInfo info() const = 0;

  virtual Prediction predict(const SentenceContext& ctx,
                             std::span<const TokenId> src_prefix,
                             std::span<const TokenId> tgt_prefix) const = 0;

  // 1-based rank of `gold` in predict's ordering.
  virtual int rank_of(TokenId gold, const SentenceContext& ctx,
                      std::span<const TokenId> src_prefix,
                      std::span<const TokenId> tgt_prefix) const;

  // Independent handle for a parallel worker. Toy predictors share state
  // freely; adapters open a fresh connection.
  virtual std::unique_ptr<Predictor> fork_worker() const = 0;
};

// Builds a predictor from a CLI model spec:
//   toy:<variant>[:noise=P][:stallq=Q][:dip=D][:seed=S][:eps=E][:rankfloor=R]
//       variant in {copy,swap2,rotate1,auto}; "auto" resolves per pair
//       from corpus metadata
//   adapter:exec:<command>             line-JSON over the child's stdio
//   adapter:tcp:<host>:<port>          line-JSON over TCP
// `vocab_size` configures toy predictors and is ignored by adapters.
// `toy_rank_floor` seeds the noise model's buried-rank floor (callers pass
// the oracle's rank threshold); an explicit rankfloor=R wins over it.
std::unique_ptr<Predictor> make_predictor(const std::string& model_spec, int vocab_size,
                                          int toy_rank_floor = 1);

}  // namespace simt
