#include "simt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "simt/errors.hpp"

namespace simt {

std::vector<int> g_vector(const ActionSequence& actions) {
  std::vector<int> g;
  int reads = 0;
  for (Action a : actions.actions) {
    if (a == Action::READ) {
      ++reads;
    } else {
      g.push_back(reads);
    }
  }
  return g;
}

namespace {

void check_counts(const ActionSequence& actions, int src_len, int tgt_len) {
  if (src_len < 1 || tgt_len < 1) throw ContractError("latency metrics need |s|, |t| >= 1");
  if (actions.write_count() != tgt_len)
    throw ContractError("WRITE count " + std::to_string(actions.write_count()) +
                        " does not match |t| = " + std::to_string(tgt_len));
  if (actions.read_count() > src_len)
    throw ContractError("READ count exceeds |s| = " + std::to_string(src_len));
}

// tau = first write index with the whole source read; 0 when none exists.
int full_read_index(const std::vector<int>& g, int src_len) {
  for (size_t i = 0; i < g.size(); ++i)
    if (g[i] == src_len) return static_cast<int>(i) + 1;
  return 0;
}

}  // namespace

double average_lagging(const ActionSequence& actions, int src_len, int tgt_len) {
  check_counts(actions, src_len, tgt_len);
  std::vector<int> g = g_vector(actions);
  double gamma = static_cast<double>(tgt_len) / static_cast<double>(src_len);
  int tau = full_read_index(g, src_len);
  if (tau == 0) tau = static_cast<int>(g.size());
  double sum = 0.0;
  for (int i = 1; i <= tau; ++i) sum += g[i - 1] - (i - 1) / gamma;
  return sum / tau;
}

double average_proportion(const ActionSequence& actions, int src_len, int tgt_len) {
  check_counts(actions, src_len, tgt_len);
  std::vector<int> g = g_vector(actions);
  double sum = 0.0;
  for (int gi : g) sum += gi;
  return sum / (static_cast<double>(src_len) * static_cast<double>(tgt_len));
}

double consecutive_wait(const ActionSequence& actions) {
  int reads = actions.read_count();
  if (reads == 0) throw ContractError("CW needs at least one READ");
  int segments = 0;
  bool in_segment = false;
  for (Action a : actions.actions) {
    if (a == Action::READ) {
      if (!in_segment) ++segments;
      in_segment = true;
    } else {
      in_segment = false;
    }
  }
  return static_cast<double>(reads) / segments;
}

LatencyReport latency_report(const ActionSequence& actions, int src_len, int tgt_len) {
  check_counts(actions, src_len, tgt_len);
  LatencyReport r;
  r.g = g_vector(actions);
  r.gamma = static_cast<double>(tgt_len) / static_cast<double>(src_len);
  r.tau = full_read_index(r.g, src_len);
  r.truncated = (r.tau == 0);
  if (r.truncated) r.tau = static_cast<int>(r.g.size());
  double sum = 0.0;
  for (int i = 1; i <= r.tau; ++i) sum += r.g[i - 1] - (i - 1) / r.gamma;
  r.al = sum / r.tau;
  double total = 0.0;
  for (int gi : r.g) total += gi;
  r.ap = total / (static_cast<double>(src_len) * static_cast<double>(tgt_len));
  r.cw = consecutive_wait(actions);
  return r;
}

namespace {

// Clipped n-gram match and total counts for one sentence pair, one order.
void ngram_counts(const Sentence& hyp, const Sentence& ref, int n, int64_t* match,
                  int64_t* total) {
  int hn = hyp.length() - n + 1;
  int rn = ref.length() - n + 1;
  *total += std::max(0, hn);
  if (hn <= 0 || rn <= 0) return;
  std::map<std::vector<TokenId>, int> ref_counts;
  for (int i = 0; i < rn; ++i) {
    std::vector<TokenId> gram(ref.tokens.begin() + i, ref.tokens.begin() + i + n);
    ++ref_counts[gram];
  }
  std::map<std::vector<TokenId>, int> hyp_counts;
  for (int i = 0; i < hn; ++i) {
    std::vector<TokenId> gram(hyp.tokens.begin() + i, hyp.tokens.begin() + i + n);
    ++hyp_counts[gram];
  }
  for (const auto& [gram, count] : hyp_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) *match += std::min(count, it->second);
  }
}

}  // namespace

BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references, int max_n, bool smooth) {
  if (hypotheses.empty()) throw ContractError("BLEU needs a non-empty corpus");
  if (hypotheses.size() != references.size())
    throw ContractError("BLEU needs equally many hypotheses and references");
  if (max_n < 1 || max_n > 4) throw ContractError("BLEU max order must be in [1, 4]");

  std::vector<int64_t> match(static_cast<size_t>(max_n), 0);
  std::vector<int64_t> total(static_cast<size_t>(max_n), 0);
  int64_t hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].length();
    ref_len += references[i].length();
    for (int n = 1; n <= max_n; ++n)
      ngram_counts(hypotheses[i], references[i], n, &match[n - 1], &total[n - 1]);
  }

  BleuReport report;
  for (int n = 1; n <= max_n; ++n)
    report.precisions[n - 1] =
        total[n - 1] > 0 ? static_cast<double>(match[n - 1]) / total[n - 1] : 0.0;

  if (hyp_len == 0) {
    report.brevity_penalty = 1e-300;
    return report;
  }
  report.brevity_penalty =
      hyp_len >= ref_len ? 1.0
                         : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);

  // Geometric mean over the orders that have any hypothesis n-grams; short
  // corpora simply use a lower effective order.
  double log_sum = 0.0;
  int used = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (total[n - 1] == 0) continue;
    double m = static_cast<double>(match[n - 1]);
    double t = static_cast<double>(total[n - 1]);
    if (smooth && n >= 2) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0) return report;  // bleu stays 0
    log_sum += std::log(m / t);
    ++used;
  }
  if (used == 0) return report;
  report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / used);
  return report;
}

}  // namespace simt
