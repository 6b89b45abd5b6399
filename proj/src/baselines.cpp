#include "simt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "simt/errors.hpp"

namespace simt {

ActionSequence wait_k_schedule(int k, int src_len, int writes) {
  if (k < 1) throw ContractError("wait-k needs k >= 1");
  if (src_len < 1) throw ContractError("wait-k needs a non-empty source");
  if (writes < 0) throw ContractError("negative write count");
  ActionSequence seq;
  seq.actions.reserve(static_cast<size_t>(std::min(k, src_len) + writes * 2));
  int reads = std::min(k, src_len);
  seq.actions.insert(seq.actions.end(), static_cast<size_t>(reads), Action::READ);
  for (int i = 1; i <= writes; ++i) {
    seq.actions.push_back(Action::WRITE);
    if (i < writes && reads < src_len) {
      seq.actions.push_back(Action::READ);
      ++reads;
    }
  }
  return seq;
}

namespace {

SentenceContext decode_context(const CorpusEntry& entry) {
  SentenceContext ctx;
  ctx.pair_id = entry.pair.id;
  ctx.source = entry.pair.source.tokens;
  ctx.variant = entry.variant;
  return ctx;
}

void finish_trajectory(Trajectory& traj, int src_len) {
  if (!traj.output.empty())
    traj.latency = latency_report(traj.actions, src_len, static_cast<int>(traj.output.size()));
}

// Probability assigned to `token`, zero when the ranking omits it.
double prob_of(const Prediction& pred, TokenId token) {
  for (const auto& [id, logp] : pred.ranked)
    if (id == token) return std::exp(logp);
  return 0.0;
}

std::vector<Trajectory> map_corpus(
    const Predictor& predictor, const std::vector<CorpusEntry>& corpus, int workers,
    const std::function<Trajectory(const Predictor&, const CorpusEntry&)>& fn) {
  if (workers < 1) throw ContractError("workers must be >= 1");
  const int n = static_cast<int>(corpus.size());
  std::vector<Trajectory> out(static_cast<size_t>(n));
  workers = std::min(workers, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fn(predictor, corpus[static_cast<size_t>(i)]);
    return out;
  }
  std::vector<std::unique_ptr<Predictor>> handles;
  handles.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) handles.push_back(predictor.fork_worker());
  std::vector<std::thread> threads;
  std::vector<std::string> errors(static_cast<size_t>(workers));
  int base = n / workers, rem = n % workers;
  int begin = 0;
  for (int w = 0; w < workers; ++w) {
    int end = begin + base + (w < rem ? 1 : 0);
    threads.emplace_back([&, begin, end, w] {
      try {
        for (int i = begin; i < end; ++i)
          out[static_cast<size_t>(i)] = fn(*handles[static_cast<size_t>(w)], corpus[static_cast<size_t>(i)]);
      } catch (const std::exception& e) {
        errors[static_cast<size_t>(w)] = e.what();
      }
    });
    begin = end;
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw ContractError("decode worker failed: " + e);
  return out;
}

}  // namespace

Trajectory wait_k_decode(const WaitKConfig& cfg, const Predictor& predictor,
                         const CorpusEntry& entry, int max_target_len) {
  if (cfg.k < 1) throw ContractError("wait-k needs k >= 1");
  const auto& src = entry.pair.source.tokens;
  if (src.empty()) throw ContractError("cannot decode an empty source");
  const int src_len = static_cast<int>(src.size());
  const int max_len = max_target_len > 0 ? max_target_len : 2 * src_len + 5;
  SentenceContext ctx = decode_context(entry);

  Trajectory traj;
  int id_s = std::min(cfg.k, src_len);
  traj.actions.actions.insert(traj.actions.actions.end(), static_cast<size_t>(id_s), Action::READ);
  while (true) {
    if (static_cast<int>(traj.output.size()) >= max_len) {
      traj.hit_cap = true;
      break;
    }
    Prediction pred = predictor.predict(ctx, std::span<const TokenId>(src.data(), static_cast<size_t>(id_s)),
                                        traj.output);
    TokenId top = pred.top1();
    if (top == kEosId) break;
    traj.actions.actions.push_back(Action::WRITE);
    traj.output.push_back(top);
    if (id_s < src_len) {
      traj.actions.actions.push_back(Action::READ);
      ++id_s;
    }
  }
  finish_trajectory(traj, src_len);
  return traj;
}

Trajectory wiw_wid_decode(const WiwWidConfig& cfg, const Predictor& predictor,
                          const CorpusEntry& entry, int max_target_len) {
  if (cfg.s0 < 1 || cfg.delta < 1) throw ContractError("heuristic needs s0 >= 1 and delta >= 1");
  const auto& src = entry.pair.source.tokens;
  if (src.empty()) throw ContractError("cannot decode an empty source");
  const int src_len = static_cast<int>(src.size());
  const int max_len = max_target_len > 0 ? max_target_len : 2 * src_len + 5;
  SentenceContext ctx = decode_context(entry);

  Trajectory traj;
  int id_s = std::min(cfg.s0, src_len);
  traj.actions.actions.insert(traj.actions.actions.end(), static_cast<size_t>(id_s), Action::READ);
  while (true) {
    if (static_cast<int>(traj.output.size()) >= max_len) {
      traj.hit_cap = true;
      break;
    }
    Prediction here = predictor.predict(ctx, std::span<const TokenId>(src.data(), static_cast<size_t>(id_s)),
                                        traj.output);
    TokenId top = here.top1();
    if (id_s < src_len) {
      int delta = std::min(cfg.delta, src_len - id_s);
      Prediction ahead = predictor.predict(
          ctx, std::span<const TokenId>(src.data(), static_cast<size_t>(id_s + delta)), traj.output);
      bool wait = cfg.mode == HeuristicMode::kWaitIfWorse
                      ? prob_of(ahead, top) < here.top1_prob()
                      : ahead.top1() != top;
      if (wait) {
        // The extra context is needed, so the peek becomes real reads.
        traj.actions.actions.insert(traj.actions.actions.end(), static_cast<size_t>(delta), Action::READ);
        id_s += delta;
        continue;
      }
    }
    if (top == kEosId) break;
    traj.actions.actions.push_back(Action::WRITE);
    traj.output.push_back(top);
  }
  finish_trajectory(traj, src_len);
  return traj;
}

std::vector<Trajectory> wait_k_decode_corpus(const WaitKConfig& cfg, const Predictor& predictor,
                                             const std::vector<CorpusEntry>& corpus, int workers) {
  return map_corpus(predictor, corpus, workers, [&cfg](const Predictor& p, const CorpusEntry& e) {
    return wait_k_decode(cfg, p, e);
  });
}

std::vector<Trajectory> wiw_wid_decode_corpus(const WiwWidConfig& cfg, const Predictor& predictor,
                                              const std::vector<CorpusEntry>& corpus, int workers) {
  return map_corpus(predictor, corpus, workers, [&cfg](const Predictor& p, const CorpusEntry& e) {
    return wiw_wid_decode(cfg, p, e);
  });
}

}  // namespace simt
