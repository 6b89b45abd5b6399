#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simt/baselines.hpp"
#include "simt/corpus.hpp"
#include "simt/errors.hpp"
#include "simt/harness.hpp"
#include "simt/metrics.hpp"
#include "simt/oracle.hpp"
#include "simt/policy.hpp"
#include "simt/predictor.hpp"
#include "simt/rng.hpp"
#include "simt/vocab.hpp"

using nlohmann::json;

namespace {

// Tokenization needs a vocabulary; without an explicit file we build one
// from the inputs by first appearance, which is always consistent for the
// toy languages. Adapter models need --vocab so ids match the server's.
simt::Vocab resolve_vocab(const std::string& vocab_path, const std::vector<std::string>& files) {
  if (!vocab_path.empty()) return simt::Vocab::load(vocab_path);
  return simt::Vocab::build_from_files(files);
}

double parse_al_cap(const std::string& s) {
  if (s == "inf" || s == "none") return simt::OracleConfig::kNoCap;
  double v = 0.0;
  size_t pos = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !(v > 0.0))
    throw simt::ConfigError("--al-max must be a positive number or 'inf'");
  return v;
}

std::vector<simt::Sentence> read_sentences_lenient(const std::string& path,
                                                   const simt::Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw simt::CorpusError("cannot read " + path);
  std::vector<simt::Sentence> out;
  std::string line, tok;
  while (std::getline(in, line)) {
    simt::Sentence s;
    std::istringstream ss(line);
    while (ss >> tok) s.tokens.push_back(vocab.id_of(tok));
    out.push_back(std::move(s));
  }
  return out;
}

void write_hypotheses(const std::string& path, const std::vector<simt::Trajectory>& trajs,
                      const simt::Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw simt::CorpusError("cannot write " + path);
  for (const auto& t : trajs) {
    for (size_t i = 0; i < t.output.size(); ++i) {
      if (i) out << ' ';
      out << vocab.token_of(t.output[i]);
    }
    out << '\n';
  }
  if (!out) throw simt::CorpusError("failed writing " + path);
}

void write_trajectory_actions(const std::string& path,
                              const std::vector<simt::Trajectory>& trajs,
                              const std::vector<simt::CorpusEntry>& entries) {
  std::vector<std::pair<int, simt::ActionSequence>> rows;
  rows.reserve(trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) rows.emplace_back(entries[i].pair.id, trajs[i].actions);
  simt::write_actions(path, rows);
}

simt::WiwWidConfig parse_heuristic_spec(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty() || parts.size() > 3)
    throw simt::ConfigError("heuristic spec must be mode[:s0[:delta]], got '" + s + "'");
  simt::WiwWidConfig cfg;
  if (parts[0] == "wiw") {
    cfg.mode = simt::HeuristicMode::kWaitIfWorse;
  } else if (parts[0] == "wid") {
    cfg.mode = simt::HeuristicMode::kWaitIfDiff;
  } else {
    throw simt::ConfigError("heuristic mode must be 'wiw' or 'wid', got '" + parts[0] + "'");
  }
  try {
    if (parts.size() > 1) cfg.s0 = std::stoi(parts[1]);
    if (parts.size() > 2) cfg.delta = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw simt::ConfigError("heuristic spec must be mode[:s0[:delta]], got '" + s + "'");
  }
  if (cfg.s0 < 1 || cfg.delta < 1) throw simt::ConfigError("heuristic needs s0 >= 1 and delta >= 1");
  return cfg;
}

struct GenOracleArgs {
  std::string src, tgt, model, out, stats, vocab, meta;
  int rank = 50;
  std::string al_max = "3";
  int workers = 1;
};

void run_gen_oracle(const GenOracleArgs& a) {
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src, a.tgt});
  auto entries = simt::load_parallel(a.src, a.tgt, vocab);
  if (!a.meta.empty()) simt::load_meta(entries, a.meta);
  auto predictor = simt::make_predictor(a.model, vocab.size(), a.rank);
  simt::OracleConfig cfg;
  cfg.rank_threshold = a.rank;
  cfg.al_cap = parse_al_cap(a.al_max);
  simt::OracleStats stats;
  auto records = simt::generate_corpus(*predictor, entries, cfg, a.workers, &stats);
  simt::save_oracle_records(a.out, records);
  json j = {{"total", stats.total},
            {"kept", stats.kept},
            {"kept_fraction", stats.kept_fraction()},
            {"mean_al", stats.mean_al_kept}};
  if (!a.stats.empty()) {
    std::ofstream out(a.stats);
    if (!out) throw simt::CorpusError("cannot write " + a.stats);
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump() << '\n';
}

struct TrainArgs {
  std::string seqs, src, tgt, model, out, vocab, meta;
  int epochs = 15;
  uint64_t seed = 1;
  int batch = 16;
  double lr = 1e-3;
  int hidden = 64;
  int fc = 16;
  double heldout = 0.1;
  int max_records = 0;
};

void run_train(const TrainArgs& a) {
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src, a.tgt});
  auto entries = simt::load_parallel(a.src, a.tgt, vocab);
  if (!a.meta.empty()) simt::load_meta(entries, a.meta);
  auto records = simt::load_oracle_records(a.seqs);
  std::unordered_map<int64_t, size_t> by_id;
  for (size_t i = 0; i < entries.size(); ++i) by_id[entries[i].pair.id] = i;
  auto predictor = simt::make_predictor(a.model, vocab.size());

  std::vector<simt::TrainExample> examples;
  for (const auto& rec : records) {
    if (!rec.kept) continue;
    if (a.max_records > 0 && static_cast<int>(examples.size()) >= a.max_records) break;
    auto it = by_id.find(rec.pair_id);
    if (it == by_id.end())
      throw simt::CorpusError("oracle record for pair " + std::to_string(rec.pair_id) +
                              " has no corpus line");
    examples.push_back(simt::make_train_example(*predictor, entries[it->second], rec.actions));
  }
  if (examples.empty()) throw simt::CorpusError("no kept oracle records in " + a.seqs);

  simt::PolicyConfig pc;
  pc.feature_dim = predictor->info().feature_dim;
  pc.hidden_dim = a.hidden;
  pc.fc_dim = a.fc;
  pc.seed = simt::hash_combine(a.seed, 0x901C4ULL);
  simt::PolicyNet net(pc);
  simt::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.lr = a.lr;
  tc.heldout_fraction = a.heldout;
  tc.seed = a.seed;
  auto report = simt::train_policy(net, examples, tc, &std::cout);
  if (report.diverged) std::cerr << "warning: training diverged; saved the last finite state\n";
  net.save(a.out);
}

struct DecodeArgs {
  std::string policy, model, src, out, actions, vocab, meta;
  double rho = 0.5;
  int workers = 1;
  int max_len = 0;
};

void run_decode(const DecodeArgs& a) {
  if (!(a.rho >= 0.0 && a.rho <= 1.0)) throw simt::ConfigError("--rho must lie in [0, 1]");
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src});
  auto entries = simt::load_sources(a.src, vocab);
  if (!a.meta.empty()) simt::load_meta(entries, a.meta);
  simt::PolicyNet net = simt::PolicyNet::load(a.policy);
  auto predictor = simt::make_predictor(a.model, vocab.size());
  simt::DecodeConfig dc;
  dc.rho = a.rho;
  dc.max_target_len = a.max_len;
  auto trajs = simt::decode_corpus(net, *predictor, entries, dc, a.workers);
  write_hypotheses(a.out, trajs, vocab);
  if (!a.actions.empty()) write_trajectory_actions(a.actions, trajs, entries);
}

struct BaselineArgs {
  std::string type, model, src, out, actions, vocab, meta;
  int k = 3;
  int s0 = 1;
  int delta = 1;
  int workers = 1;
  int max_len = 0;
};

void run_baseline(const BaselineArgs& a) {
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src});
  auto entries = simt::load_sources(a.src, vocab);
  if (!a.meta.empty()) simt::load_meta(entries, a.meta);
  auto predictor = simt::make_predictor(a.model, vocab.size());
  std::vector<simt::Trajectory> trajs;
  if (a.type == "waitk") {
    trajs = simt::wait_k_decode_corpus(simt::WaitKConfig{a.k}, *predictor, entries, a.workers);
  } else {
    simt::WiwWidConfig cfg;
    cfg.mode = a.type == "wiw" ? simt::HeuristicMode::kWaitIfWorse
                               : simt::HeuristicMode::kWaitIfDiff;
    cfg.s0 = a.s0;
    cfg.delta = a.delta;
    trajs = simt::wiw_wid_decode_corpus(cfg, *predictor, entries, a.workers);
  }
  write_hypotheses(a.out, trajs, vocab);
  if (!a.actions.empty()) write_trajectory_actions(a.actions, trajs, entries);
}

struct EvalArgs {
  std::string hyp, ref, actions, src, vocab, per_sentence;
  bool smooth = false;
};

void run_eval(const EvalArgs& a) {
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src, a.ref, a.hyp});
  auto entries = simt::load_parallel(a.src, a.ref, vocab);
  auto hyps = read_sentences_lenient(a.hyp, vocab);
  auto action_rows = simt::read_actions(a.actions);
  if (hyps.size() != entries.size() || action_rows.size() != entries.size())
    throw simt::CorpusError("eval inputs disagree: " + std::to_string(entries.size()) +
                            " sentence pairs, " + std::to_string(hyps.size()) + " hypotheses, " +
                            std::to_string(action_rows.size()) + " action rows");

  std::vector<simt::Sentence> refs(entries.size());
  std::vector<simt::ActionSequence> actions(entries.size());
  std::vector<int> src_lens(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    refs[i] = entries[i].pair.target;
    actions[i] = action_rows[i].second;
    src_lens[i] = entries[i].pair.source.length();
  }
  simt::EvalSummary s = simt::evaluate_corpus(hyps, refs, actions, src_lens, a.smooth);
  json j = {{"bleu", s.bleu}, {"al", s.al}, {"ap", s.ap}, {"cw", s.cw}, {"n", s.n}};
  std::cout << j.dump() << '\n';

  if (!a.per_sentence.empty()) {
    std::ofstream out(a.per_sentence);
    if (!out) throw simt::CorpusError("cannot write " + a.per_sentence);
    out << "id,src_len,hyp_len,al,ap,cw\n";
    for (size_t i = 0; i < entries.size(); ++i) {
      double al = 0.0, ap = 0.0, cw = 0.0;
      if (!hyps[i].empty()) {
        auto rep = simt::latency_report(actions[i], src_lens[i], hyps[i].length());
        al = rep.al;
        ap = rep.ap;
        cw = rep.cw;
      }
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%d,%d,%.4f,%.4f,%.4f\n", entries[i].pair.id,
                    src_lens[i], hyps[i].length(), al, ap, cw);
      out << buf;
    }
  }
}

struct SweepArgs {
  std::string policy, model, src, ref, out, dump_dir, vocab, meta;
  std::vector<double> rho;
  std::vector<int> k;
  std::vector<std::string> heuristics;
  int workers = 1;
  int max_len = 0;
  bool smooth = false;
};

void run_sweep_cmd(const SweepArgs& a) {
  if (a.rho.empty() && a.k.empty() && a.heuristics.empty())
    throw simt::ConfigError("nothing to sweep: pass --rho, --k or --heuristic");
  if (!a.rho.empty() && a.policy.empty())
    throw simt::ConfigError("--rho needs --policy");
  simt::Vocab vocab = resolve_vocab(a.vocab, {a.src, a.ref});
  auto entries = simt::load_parallel(a.src, a.ref, vocab);
  if (!a.meta.empty()) simt::load_meta(entries, a.meta);
  std::vector<simt::Sentence> refs;
  refs.reserve(entries.size());
  for (const auto& e : entries) refs.push_back(e.pair.target);

  std::optional<simt::PolicyNet> net;
  if (!a.policy.empty()) net.emplace(simt::PolicyNet::load(a.policy));
  auto predictor = simt::make_predictor(a.model, vocab.size());

  simt::SweepSpec spec;
  if (net) spec.policy = &*net;
  spec.rho_grid = a.rho;
  spec.k_grid = a.k;
  for (const auto& h : a.heuristics) spec.heuristics.push_back(parse_heuristic_spec(h));
  spec.workers = a.workers;
  spec.max_target_len = a.max_len;
  spec.smooth_bleu = a.smooth;
  spec.dump_dir = a.dump_dir;
  spec.vocab = &vocab;
  auto points = simt::run_sweep(spec, *predictor, entries, refs);
  simt::write_curves_csv(a.out, points);
}

struct PipelineArgs {
  std::string config, out;
  bool force = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simultaneous translation policies: oracles, training, decoding, benchmarks"};
  app.require_subcommand(1);

  GenOracleArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-oracle", "generate oracle action sequences");
  gen_cmd->add_option("--src", gen.src, "source corpus file")->required();
  gen_cmd->add_option("--tgt", gen.tgt, "target corpus file")->required();
  gen_cmd->add_option("--model", gen.model, "model spec (toy:... or adapter:...)")->required();
  gen_cmd->add_option("--rank", gen.rank, "write when the gold rank is <= this");
  gen_cmd->add_option("--al-max", gen.al_max, "AL cap for keeping sequences, or 'inf'");
  gen_cmd->add_option("--workers", gen.workers, "parallel workers");
  gen_cmd->add_option("--out", gen.out, "output TSV of action sequences")->required();
  gen_cmd->add_option("--stats", gen.stats, "write a stats JSON here");
  gen_cmd->add_option("--vocab", gen.vocab, "vocabulary file (default: build from the corpus)");
  gen_cmd->add_option("--meta", gen.meta, "per-pair variant/lag sidecar");
  gen_cmd->callback([&] { run_gen_oracle(gen); });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the READ/WRITE policy network");
  train_cmd->add_option("--seqs", train.seqs, "oracle sequence TSV")->required();
  train_cmd->add_option("--src", train.src, "source corpus file")->required();
  train_cmd->add_option("--tgt", train.tgt, "target corpus file")->required();
  train_cmd->add_option("--model", train.model, "model spec")->required();
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--out", train.out, "output policy file")->required();
  train_cmd->add_option("--batch", train.batch, "mini-batch size");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--hidden", train.hidden, "recurrent state size");
  train_cmd->add_option("--fc", train.fc, "classifier hidden size");
  train_cmd->add_option("--heldout", train.heldout, "held-out fraction for accuracy reporting");
  train_cmd->add_option("--max-records", train.max_records, "cap on kept records used (0: all)");
  train_cmd->add_option("--vocab", train.vocab, "vocabulary file");
  train_cmd->add_option("--meta", train.meta, "per-pair variant/lag sidecar");
  train_cmd->callback([&] { run_train(train); });

  DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "decode with a trained policy");
  dec_cmd->add_option("--policy", dec.policy, "policy file from train")->required();
  dec_cmd->add_option("--model", dec.model, "model spec")->required();
  dec_cmd->add_option("--src", dec.src, "source file")->required();
  dec_cmd->add_option("--rho", dec.rho, "READ-probability threshold");
  dec_cmd->add_option("--out", dec.out, "hypothesis output file")->required();
  dec_cmd->add_option("--actions", dec.actions, "action TSV output file");
  dec_cmd->add_option("--workers", dec.workers, "parallel workers");
  dec_cmd->add_option("--max-len", dec.max_len, "target length cap (0: 2|s|+5)");
  dec_cmd->add_option("--vocab", dec.vocab, "vocabulary file");
  dec_cmd->add_option("--meta", dec.meta, "per-pair variant/lag sidecar");
  dec_cmd->callback([&] { run_decode(dec); });

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline", "decode with a fixed or heuristic policy");
  base_cmd->add_option("--type", base.type, "waitk | wiw | wid")
      ->required()
      ->check(CLI::IsMember({"waitk", "wiw", "wid"}));
  base_cmd->add_option("--model", base.model, "model spec")->required();
  base_cmd->add_option("--src", base.src, "source file")->required();
  base_cmd->add_option("--out", base.out, "hypothesis output file")->required();
  base_cmd->add_option("--actions", base.actions, "action TSV output file");
  base_cmd->add_option("--k", base.k, "wait-k offset");
  base_cmd->add_option("--s0", base.s0, "initial reads for wiw/wid");
  base_cmd->add_option("--delta", base.delta, "lookahead reads for wiw/wid");
  base_cmd->add_option("--workers", base.workers, "parallel workers");
  base_cmd->add_option("--max-len", base.max_len, "target length cap (0: 2|s|+5)");
  base_cmd->add_option("--vocab", base.vocab, "vocabulary file");
  base_cmd->add_option("--meta", base.meta, "per-pair variant/lag sidecar");
  base_cmd->callback([&] { run_baseline(base); });

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score hypotheses and action sequences");
  eval_cmd->add_option("--hyp", ev.hyp, "hypothesis file")->required();
  eval_cmd->add_option("--ref", ev.ref, "reference file")->required();
  eval_cmd->add_option("--actions", ev.actions, "action TSV file")->required();
  eval_cmd->add_option("--src", ev.src, "source file (for source lengths)")->required();
  eval_cmd->add_option("--vocab", ev.vocab, "vocabulary file");
  eval_cmd->add_option("--per-sentence", ev.per_sentence, "write per-sentence latency CSV here");
  eval_cmd->add_flag("--smooth", ev.smooth, "add-one BLEU smoothing on orders >= 2");
  eval_cmd->callback([&] { run_eval(ev); });

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "latency-quality curves over parameter grids");
  sweep_cmd->add_option("--model", sw.model, "model spec")->required();
  sweep_cmd->add_option("--src", sw.src, "source file")->required();
  sweep_cmd->add_option("--ref", sw.ref, "reference file")->required();
  sweep_cmd->add_option("--out", sw.out, "curve CSV output")->required();
  sweep_cmd->add_option("--policy", sw.policy, "policy file (needed for --rho)");
  sweep_cmd->add_option("--rho", sw.rho, "threshold grid for the trained policy");
  sweep_cmd->add_option("--k", sw.k, "wait-k grid");
  sweep_cmd->add_option("--heuristic", sw.heuristics, "heuristic specs, mode[:s0[:delta]]");
  sweep_cmd->add_option("--dump-dir", sw.dump_dir, "also write per-point hyp/action files here");
  sweep_cmd->add_option("--workers", sw.workers, "parallel workers");
  sweep_cmd->add_option("--max-len", sw.max_len, "target length cap (0: 2|s|+5)");
  sweep_cmd->add_option("--vocab", sw.vocab, "vocabulary file");
  sweep_cmd->add_option("--meta", sw.meta, "per-pair variant/lag sidecar");
  sweep_cmd->add_flag("--smooth", sw.smooth, "add-one BLEU smoothing on orders >= 2");
  sweep_cmd->callback([&] { run_sweep_cmd(sw); });

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "corpus -> oracle -> train -> sweep, end to end");
  pipe_cmd->add_option("--config", pipe.config, "pipeline config JSON")->required();
  pipe_cmd->add_option("--out", pipe.out, "experiment output directory")->required();
  pipe_cmd->add_flag("--force", pipe.force, "reuse a non-empty output directory");
  pipe_cmd->callback([&] { simt::run_pipeline(pipe.config, pipe.out, pipe.force); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const simt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
