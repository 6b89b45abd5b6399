#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/metrics.hpp"
#include "simt/oracle.hpp"
#include "simt/predictor.hpp"

namespace simt {

struct PolicyConfig {
  int feature_dim = 8;
  int hidden_dim = 64;  // paper-scale 512 selectable by flag
  int fc_dim = 16;      // paper-scale 64
  uint64_t seed = 1;
};

// One supervised step: the observation seen before deciding, plus the action
// taken just before it (the recurrent conditioning on a_{<i}). The first
// decision always follows the forced initial READ.
struct PolicyStep {
  Observation obs;
  Action prev = Action::READ;
};

struct TrainExample {
  int64_t pair_id = 0;
  std::vector<PolicyStep> steps;
  std::vector<Action> gold;  // aligned 1:1 with steps
};

// Single-layer GRU over [observation, previous-action one-hot], then
// FC(H->F) + ReLU, FC(F->2) + softmax over {READ, WRITE}. Parameters live in
// one flat vector so the optimizer and the finite-difference check can treat
// the net as a plain function of theta. The output layer starts at zero, so
// a fresh net is exactly uniform.
class PolicyNet {
 public:
  explicit PolicyNet(const PolicyConfig& cfg);

  const PolicyConfig& config() const { return cfg_; }
  int input_dim() const { return cfg_.feature_dim + 2; }
  std::vector<double>& parameters() { return theta_; }
  const std::vector<double>& parameters() const { return theta_; }

  // Per-step action distributions for a whole sequence (teacher-forced).
  std::vector<std::array<double, 2>> forward(const std::vector<PolicyStep>& steps) const;

  // Summed negative log-likelihood of the gold actions.
  double nll(const TrainExample& ex) const;
  // Adds d(nll)/d(theta) into grad (sized like parameters()) and returns the
  // loss. Backprop through time over the full sequence.
  double nll_grad(const TrainExample& ex, std::vector<double>& grad) const;

  // Incremental interface for decoding.
  struct State {
    std::vector<double> h;
  };
  State initial_state() const;
  // Advances the recurrence and returns {p(READ), p(WRITE)}.
  std::array<double, 2> step(State& state, const Observation& obs, Action prev) const;

  void save(const std::string& path) const;
  static PolicyNet load(const std::string& path);

 private:
  PolicyConfig cfg_;
  std::vector<double> theta_;
};

struct TrainConfig {
  int epochs = 15;
  int batch_size = 16;
  double lr = 1e-3;
  double clip_norm = 5.0;
  double heldout_fraction = 0.1;
  uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_nll = 0.0;      // mean per-decision NLL
  double heldout_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  bool diverged = false;
};

// Replays a kept oracle sequence through the predictor with the gold target
// prefix, collecting the observation before each decision. The forced first
// READ contributes no training step. The dependency feature slot stays
// hidden, exactly as at decode time.
TrainExample make_train_example(const Predictor& predictor, const CorpusEntry& entry,
                                const ActionSequence& actions);

// Mini-batch training with adaptive-moment updates (lr as configured,
// decay 0.9/0.999) and gradient-norm clipping. Deterministic given the seed:
// fixed shuffle, fixed batch order, serial reduction. On a non-finite loss
// the last finite epoch's parameters are restored and the report is marked
// diverged.
TrainReport train_policy(PolicyNet& net, const std::vector<TrainExample>& data,
                         const TrainConfig& cfg, std::ostream* log = nullptr);

struct DecodeConfig {
  double rho = 0.5;
  int max_target_len = 0;  // 0: derived as 2*|s| + 5
};

struct Trajectory {
  ActionSequence actions;
  std::vector<TokenId> output;               // emitted tokens, EOS excluded
  std::vector<std::array<double, 2>> probs;  // one entry per action, incl. forced
  LatencyReport latency;
  bool hit_cap = false;
};

// Threshold decoding: after the forced first READ, choose READ iff
// p(READ) > rho (a tie writes); WRITE is forced once the source is
// exhausted. Each WRITE emits the predictor's current top-1 token; an EOS
// top-1 ends the trajectory without recording an action. rho = 0.5 is
// argmax decoding.
Trajectory decode_pair(const PolicyNet& net, const Predictor& predictor,
                       const CorpusEntry& entry, const DecodeConfig& cfg);

// Sentence-parallel decoding; output order matches input order.
std::vector<Trajectory> decode_corpus(const PolicyNet& net, const Predictor& predictor,
                                      const std::vector<CorpusEntry>& corpus,
                                      const DecodeConfig& cfg, int workers = 1);

}  // namespace simt
