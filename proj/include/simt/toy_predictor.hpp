#pragma once

#include <cstdint>

#include "simt/predictor.hpp"

namespace simt {

// Noise model for the toy predictor. Each target position j of a pair may
// carry a confidence stall: the positions i = d(j) .. d(j)+L-1 (L geometric
// with continue-probability `stall_q`) answer with the gold token buried at
// a rank drawn uniformly from [rank_floor+1, V] and a mid-confidence top-1.
// The stall chance scales with `inflate_p` and fades as d(j) sits deeper in
// the source. Positions that do not stall may instead dip (probability
// `dip_p` of the remainder): the same window law holds the confidence in
// the same mid band, but the gold stays on top, so writing through a dip is
// safe while writing through a stall is not. All draws come from
// counter-based hashes of (seed, pair id, i, j), so answers are pure
// functions of the query and identical across worker counts.
// inflate_p = dip_p = 0 reproduces the ideal predictor exactly.
struct ToyNoise {
  double inflate_p = 0.0;
  double stall_q = 0.5;
  int rank_floor = 1;
  uint64_t seed = 17;
  double dip_p = 0.0;
};

// Deterministic simulated translator over the synthetic languages. Given a
// sentence context carrying the full source and its variant, it derives the
// gold target and the per-position dependency lags, then answers queries:
//
//   enough source read for the next gold token  -> gold at rank 1, high
//       confidence (top-1 prob 0.95, wobbled downward when noise is on)
//   not enough source                           -> diffuse distribution,
//       gold ranked dead last, top-1 = most recently read source token
//   stalled query (noise)                       -> gold buried, wrong
//       mid-confidence top-1
//
// Emitting the final gold token and then EOS additionally requires the
// whole source to have been read, which is what lets generated sequences
// pass the receive-all-source filter. Queries past the gold target length
// keep answering the EOS rule, so free-running decodes always terminate.
class ToyPredictor : public Predictor {
 public:
  // eps: probability mass off the top-1 token when confident.
  // default_variant: used when a query's context does not name one.
  explicit ToyPredictor(int vocab_size, Variant default_variant = Variant::kNone,
                        ToyNoise noise = {}, double eps = 0.05);

  PredictorInfo info() const override;

  Prediction predict(const SentenceContext& ctx, std::span<const TokenId> src_prefix,
                     std::span<const TokenId> tgt_prefix) const override;

  std::unique_ptr<Predictor> fork_worker() const override;

  static constexpr int kFeatureDim = 8;

 private:
  int vocab_size_;
  Variant default_variant_;
  ToyNoise noise_;
  double eps_;
};

}  // namespace simt
