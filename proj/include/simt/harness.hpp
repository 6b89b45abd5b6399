#pragma once

#include <string>
#include <vector>

#include "simt/baselines.hpp"
#include "simt/corpus.hpp"
#include "simt/metrics.hpp"
#include "simt/oracle.hpp"
#include "simt/policy.hpp"
#include "simt/predictor.hpp"

namespace simt {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Corpus-level aggregation shared by `eval`, `sweep` and the pipeline:
// corpus BLEU plus per-sentence latency means.
struct EvalSummary {
  double bleu = 0.0;
  double al = 0.0;
  double ap = 0.0;
  double cw = 0.0;
  int n = 0;
};

EvalSummary evaluate_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                            const std::vector<ActionSequence>& actions,
                            const std::vector<int>& src_lens, bool smooth_bleu = false);

// One plotted point of a latency-quality curve.
struct CurvePoint {
  std::string label;  // sl | waitk | wiw | wid
  std::string param;  // rho, k, or "s0:delta"
  double al = 0.0;
  double ap = 0.0;
  double cw = 0.0;
  double bleu = 0.0;
  int n = 0;
};

// What to plot: any combination of a trained policy over a rho grid, wait-k
// over a k grid, and heuristic configs. All rows are computed over the same
// sentence set.
struct SweepSpec {
  const PolicyNet* policy = nullptr;  // required when rho_grid is nonempty
  std::vector<double> rho_grid;
  std::vector<int> k_grid;
  std::vector<WiwWidConfig> heuristics;
  int workers = 1;
  int max_target_len = 0;
  bool smooth_bleu = false;
  // When dump_dir is set, every point also writes hyp_<label>_<param>.txt
  // and acts_<label>_<param>.tsv there (vocab required to render tokens),
  // so any row can be replayed through `eval`.
  std::string dump_dir;
  const Vocab* vocab = nullptr;
};

std::vector<CurvePoint> run_sweep(const SweepSpec& spec, const Predictor& predictor,
                                  const std::vector<CorpusEntry>& corpus,
                                  const std::vector<Sentence>& refs);

// Fixed columns: label,param,al,ap,cw,bleu,n. Formatting is pinned so equal
// runs emit equal bytes.
void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& points);

// Declarative experiment description (JSON file). Unknown keys are rejected
// so typos fail loudly before any stage runs.
struct PipelineConfig {
  uint64_t seed = 1;
  int vocab_size = 32;
  int workers = 1;

  int train_pairs = 5000;
  int dev_pairs = 600;
  int min_len = 4;
  int max_len = 10;
  std::vector<std::pair<Variant, double>> train_mix;
  std::vector<std::pair<Variant, double>> dev_mix;

  std::string model_spec = "toy:auto";

  int oracle_rank = 1;
  double oracle_al_max = 3.0;

  int train_epochs = 15;
  int train_batch = 16;
  double train_lr = 1e-3;
  int hidden_dim = 64;
  int fc_dim = 16;
  double heldout_fraction = 0.1;
  int max_train_records = 0;  // 0: use all kept records

  std::vector<double> rho_grid;
  std::vector<int> k_grid;
  std::vector<WiwWidConfig> heuristics;
};

PipelineConfig load_pipeline_config(const std::string& path);

// Runs corpus -> oracle -> train -> sweep into out_dir, writing
// train/dev corpora + vocab, seqs.tsv, stats.json, policy.bin, per-point
// hypothesis/action files, curves.csv and manifest.json. Refuses to reuse
// an existing directory unless force is set. Failures carry the stage name;
// completed stages' outputs stay on disk.
void run_pipeline(const std::string& config_path, const std::string& out_dir, bool force);

}  // namespace simt
