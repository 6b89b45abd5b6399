#include "simt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "simt/errors.hpp"
#include "simt/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace simt {

EvalSummary evaluate_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                            const std::vector<ActionSequence>& actions,
                            const std::vector<int>& src_lens, bool smooth_bleu) {
  const size_t n = hyps.size();
  if (n == 0) throw ContractError("nothing to evaluate");
  if (refs.size() != n || actions.size() != n || src_lens.size() != n)
    throw ContractError("hypotheses, references, actions and source lengths must align");

  EvalSummary s;
  s.n = static_cast<int>(n);
  s.bleu = corpus_bleu(hyps, refs, 4, smooth_bleu).bleu;
  double al = 0.0, ap = 0.0, cw = 0.0;
  size_t counted = 0;
  for (size_t i = 0; i < n; ++i) {
    if (hyps[i].empty()) continue;  // nothing was written; latency undefined
    LatencyReport rep = latency_report(actions[i], src_lens[i], hyps[i].length());
    al += rep.al;
    ap += rep.ap;
    cw += rep.cw;
    ++counted;
  }
  if (counted) {
    s.al = al / static_cast<double>(counted);
    s.ap = ap / static_cast<double>(counted);
    s.cw = cw / static_cast<double>(counted);
  }
  return s;
}

namespace {

std::string format_param_rho(double rho) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rho);
  return buf;
}

std::string heuristic_label(const WiwWidConfig& h) {
  return h.mode == HeuristicMode::kWaitIfWorse ? "wiw" : "wid";
}

std::string heuristic_param(const WiwWidConfig& h) {
  return std::to_string(h.s0) + ":" + std::to_string(h.delta);
}

void dump_point(const SweepSpec& spec, const std::string& label, const std::string& param,
                const std::vector<Trajectory>& trajs, const std::vector<CorpusEntry>& corpus) {
  if (spec.dump_dir.empty()) return;
  if (!spec.vocab) throw ContractError("sweep dump needs a vocabulary");
  std::string tag = label + "_" + param;
  std::replace(tag.begin(), tag.end(), ':', '-');
  std::ofstream hyp(fs::path(spec.dump_dir) / ("hyp_" + tag + ".txt"));
  if (!hyp) throw CorpusError("cannot write sweep hypothesis file for " + tag);
  std::vector<std::pair<int, ActionSequence>> actions;
  actions.reserve(trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    for (size_t t = 0; t < trajs[i].output.size(); ++t) {
      if (t) hyp << ' ';
      hyp << spec.vocab->token_of(trajs[i].output[t]);
    }
    hyp << '\n';
    actions.emplace_back(corpus[i].pair.id, trajs[i].actions);
  }
  write_actions((fs::path(spec.dump_dir) / ("acts_" + tag + ".tsv")).string(), actions);
}

CurvePoint summarize_point(const SweepSpec& spec, const std::string& label,
                           const std::string& param, const std::vector<Trajectory>& trajs,
                           const std::vector<CorpusEntry>& corpus,
                           const std::vector<Sentence>& refs) {
  std::vector<Sentence> hyps(trajs.size());
  std::vector<ActionSequence> actions(trajs.size());
  std::vector<int> src_lens(trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    hyps[i].tokens = trajs[i].output;
    actions[i] = trajs[i].actions;
    src_lens[i] = corpus[i].pair.source.length();
  }
  EvalSummary s = evaluate_corpus(hyps, refs, actions, src_lens, spec.smooth_bleu);
  dump_point(spec, label, param, trajs, corpus);
  CurvePoint p;
  p.label = label;
  p.param = param;
  p.al = s.al;
  p.ap = s.ap;
  p.cw = s.cw;
  p.bleu = s.bleu;
  p.n = s.n;
  return p;
}

}  // namespace

std::vector<CurvePoint> run_sweep(const SweepSpec& spec, const Predictor& predictor,
                                  const std::vector<CorpusEntry>& corpus,
                                  const std::vector<Sentence>& refs) {
  if (corpus.empty()) throw ContractError("sweep needs a non-empty corpus");
  if (refs.size() != corpus.size())
    throw ContractError("sweep references must align with the corpus");
  for (double rho : spec.rho_grid)
    if (!(rho >= 0.0 && rho <= 1.0)) throw ContractError("rho grid entries must lie in [0, 1]");
  if (!spec.rho_grid.empty() && !spec.policy)
    throw ContractError("a rho grid needs a trained policy");

  std::vector<CurvePoint> points;
  for (double rho : spec.rho_grid) {
    DecodeConfig dc;
    dc.rho = rho;
    dc.max_target_len = spec.max_target_len;
    auto trajs = decode_corpus(*spec.policy, predictor, corpus, dc, spec.workers);
    points.push_back(summarize_point(spec, "sl", format_param_rho(rho), trajs, corpus, refs));
  }
  for (int k : spec.k_grid) {
    auto trajs = wait_k_decode_corpus(WaitKConfig{k}, predictor, corpus, spec.workers);
    points.push_back(summarize_point(spec, "waitk", std::to_string(k), trajs, corpus, refs));
  }
  for (const auto& h : spec.heuristics) {
    auto trajs = wiw_wid_decode_corpus(h, predictor, corpus, spec.workers);
    points.push_back(summarize_point(spec, heuristic_label(h), heuristic_param(h), trajs,
                                     corpus, refs));
  }
  return points;
}

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& points) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write curve file " + path);
  out << "label,param,al,ap,cw,bleu,n\n";
  for (const auto& p : points) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.4f,%.4f,%.4f,%d\n", p.label.c_str(),
                  p.param.c_str(), p.al, p.ap, p.cw, p.bleu, p.n);
    out << buf;
  }
  if (!out) throw CorpusError("failed writing curve file " + path);
}

namespace {

std::vector<std::pair<Variant, double>> parse_mix(const json& j, const std::string& key) {
  if (!j.is_object() || j.empty())
    throw ConfigError("'" + key + "' must be a non-empty object of variant -> weight");
  std::vector<std::pair<Variant, double>> mix;
  for (const auto& [name, weight] : j.items()) {
    Variant v;
    try {
      v = parse_variant(name);
    } catch (const Error&) {
      throw ConfigError("'" + key + "' names unknown variant '" + name + "'");
    }
    if (v == Variant::kNone) throw ConfigError("'" + key + "' cannot mix variant 'none'");
    if (!weight.is_number() || weight.get<double>() <= 0.0)
      throw ConfigError("'" + key + "' weight for " + name + " must be a positive number");
    mix.emplace_back(v, weight.get<double>());
  }
  // items() iterates in nlohmann's sorted key order, so the mix is already
  // deterministic; keep that order.
  return mix;
}

std::vector<WiwWidConfig> parse_heuristics(const json& j) {
  if (!j.is_array()) throw ConfigError("'heuristics' must be an array");
  std::vector<WiwWidConfig> out;
  for (const auto& h : j) {
    if (!h.is_object()) throw ConfigError("each heuristic must be an object");
    WiwWidConfig cfg;
    for (const auto& [key, val] : h.items()) {
      if (key == "mode") {
        std::string mode = val.get<std::string>();
        if (mode == "wiw") {
          cfg.mode = HeuristicMode::kWaitIfWorse;
        } else if (mode == "wid") {
          cfg.mode = HeuristicMode::kWaitIfDiff;
        } else {
          throw ConfigError("heuristic mode must be 'wiw' or 'wid', got '" + mode + "'");
        }
      } else if (key == "s0") {
        cfg.s0 = val.get<int>();
      } else if (key == "delta") {
        cfg.delta = val.get<int>();
      } else {
        throw ConfigError("unknown heuristic key '" + key + "'");
      }
    }
    if (cfg.s0 < 1 || cfg.delta < 1) throw ConfigError("heuristic needs s0 >= 1 and delta >= 1");
    out.push_back(cfg);
  }
  return out;
}

double parse_al_max(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return OracleConfig::kNoCap;
    throw ConfigError("'oracle_al_max' must be a number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError("'oracle_al_max' must be a number or \"inf\"");
  double cap = v.get<double>();
  if (!(cap > 0.0)) throw ConfigError("'oracle_al_max' must be positive");
  return cap;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config file " + path + " is not a JSON object");

  PipelineConfig cfg;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "seed") {
        cfg.seed = val.get<uint64_t>();
      } else if (key == "vocab_size") {
        cfg.vocab_size = val.get<int>();
      } else if (key == "workers") {
        cfg.workers = val.get<int>();
      } else if (key == "train_pairs") {
        cfg.train_pairs = val.get<int>();
      } else if (key == "dev_pairs") {
        cfg.dev_pairs = val.get<int>();
      } else if (key == "min_len") {
        cfg.min_len = val.get<int>();
      } else if (key == "max_len") {
        cfg.max_len = val.get<int>();
      } else if (key == "train_mix") {
        cfg.train_mix = parse_mix(val, key);
      } else if (key == "dev_mix") {
        cfg.dev_mix = parse_mix(val, key);
      } else if (key == "model") {
        cfg.model_spec = val.get<std::string>();
      } else if (key == "oracle_rank") {
        cfg.oracle_rank = val.get<int>();
      } else if (key == "oracle_al_max") {
        cfg.oracle_al_max = parse_al_max(val);
      } else if (key == "train_epochs") {
        cfg.train_epochs = val.get<int>();
      } else if (key == "train_batch") {
        cfg.train_batch = val.get<int>();
      } else if (key == "train_lr") {
        cfg.train_lr = val.get<double>();
      } else if (key == "hidden_dim") {
        cfg.hidden_dim = val.get<int>();
      } else if (key == "fc_dim") {
        cfg.fc_dim = val.get<int>();
      } else if (key == "heldout_fraction") {
        cfg.heldout_fraction = val.get<double>();
      } else if (key == "max_train_records") {
        cfg.max_train_records = val.get<int>();
      } else if (key == "rho_grid") {
        cfg.rho_grid = val.get<std::vector<double>>();
      } else if (key == "k_grid") {
        cfg.k_grid = val.get<std::vector<int>>();
      } else if (key == "heuristics") {
        cfg.heuristics = parse_heuristics(val);
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }

  if (cfg.train_mix.empty())
    cfg.train_mix = {{Variant::kCopy, 1.0}, {Variant::kSwap2, 1.0}, {Variant::kRotate1, 1.0}};
  // Default dev set leaves rotate1 out: its first target token depends on
  // the whole source, which pins per-sentence AL near |s| and drowns the
  // latency range the curves are meant to show.
  if (cfg.dev_mix.empty()) cfg.dev_mix = {{Variant::kCopy, 1.0}, {Variant::kSwap2, 1.0}};
  if (cfg.rho_grid.empty()) cfg.rho_grid = {0.65, 0.6, 0.55, 0.5, 0.45, 0.4};
  if (cfg.k_grid.empty()) cfg.k_grid = {1, 2, 3};
  if (cfg.heuristics.empty())
    cfg.heuristics = {{HeuristicMode::kWaitIfWorse, 2, 2}, {HeuristicMode::kWaitIfDiff, 2, 2}};

  if (cfg.vocab_size < 4) throw ConfigError("'vocab_size' must be >= 4");
  if (cfg.workers < 1) throw ConfigError("'workers' must be >= 1");
  if (cfg.train_pairs < 1 || cfg.dev_pairs < 1)
    throw ConfigError("'train_pairs' and 'dev_pairs' must be >= 1");
  if (cfg.min_len < 1 || cfg.max_len < cfg.min_len)
    throw ConfigError("'min_len'/'max_len' must satisfy 1 <= min <= max");
  if (cfg.oracle_rank < 1) throw ConfigError("'oracle_rank' must be >= 1");
  if (cfg.train_epochs < 0) throw ConfigError("'train_epochs' must be >= 0");
  if (cfg.train_batch < 1) throw ConfigError("'train_batch' must be >= 1");
  if (!(cfg.train_lr > 0.0)) throw ConfigError("'train_lr' must be positive");
  if (cfg.hidden_dim < 1 || cfg.fc_dim < 1)
    throw ConfigError("'hidden_dim' and 'fc_dim' must be >= 1");
  if (!(cfg.heldout_fraction >= 0.0 && cfg.heldout_fraction < 1.0))
    throw ConfigError("'heldout_fraction' must lie in [0, 1)");
  if (cfg.max_train_records < 0) throw ConfigError("'max_train_records' must be >= 0");
  for (double rho : cfg.rho_grid)
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("'rho_grid' entries must lie in [0, 1]");
  for (int k : cfg.k_grid)
    if (k < 1) throw ConfigError("'k_grid' entries must be >= 1");
  return cfg;
}

namespace {

uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

json mix_to_json(const std::vector<std::pair<Variant, double>>& mix) {
  json j = json::object();
  for (const auto& [v, w] : mix) j[variant_name(v)] = w;
  return j;
}

std::vector<CorpusEntry> synth_stage(const PipelineConfig& cfg,
                                     const std::vector<std::pair<Variant, double>>& mix,
                                     int pairs, uint64_t seed, const Vocab& vocab,
                                     const fs::path& dir, const std::string& stem) {
  MixedCorpusSpec spec;
  spec.mix = mix;
  spec.vocab_size = cfg.vocab_size;
  spec.min_len = cfg.min_len;
  spec.max_len = cfg.max_len;
  spec.seed = seed;
  auto generated = gen_synthetic(spec, pairs);
  std::string src = (dir / (stem + ".src")).string();
  std::string tgt = (dir / (stem + ".tgt")).string();
  std::string meta = (dir / (stem + ".meta")).string();
  save_parallel(generated, vocab, src, tgt);
  save_meta(generated, meta);
  // Reload through the file path so every downstream number is exactly what
  // the standalone subcommands would compute from these files (the reload
  // appends the source EOS).
  auto corpus = load_parallel(src, tgt, vocab);
  load_meta(corpus, meta);
  return corpus;
}

}  // namespace

void run_pipeline(const std::string& config_path, const std::string& out_dir, bool force) {
  PipelineConfig cfg = load_pipeline_config(config_path);

  fs::path dir(out_dir);
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_empty(dir, ec) && !force)
    throw ConfigError("output directory " + out_dir + " already has contents; pass --force to reuse it");
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());

  const uint64_t train_corpus_seed = hash_combine(cfg.seed, 0xC0121ULL);
  const uint64_t dev_corpus_seed = hash_combine(cfg.seed, 0xC0122ULL);
  const uint64_t policy_seed = hash_combine(cfg.seed, 0x901C4ULL);

  Vocab vocab = Vocab::numeric(cfg.vocab_size);
  vocab.save((dir / "vocab.txt").string());

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  auto train_corpus = stage("corpus", [&] {
    return synth_stage(cfg, cfg.train_mix, cfg.train_pairs, train_corpus_seed, vocab, dir,
                       "train");
  });
  auto dev_corpus = stage("corpus", [&] {
    return synth_stage(cfg, cfg.dev_mix, cfg.dev_pairs, dev_corpus_seed, vocab, dir, "dev");
  });

  auto predictor = stage("oracle", [&] {
    return make_predictor(cfg.model_spec, cfg.vocab_size, cfg.oracle_rank);
  });

  OracleStats stats;
  auto records = stage("oracle", [&] {
    OracleConfig oc;
    oc.rank_threshold = cfg.oracle_rank;
    oc.al_cap = cfg.oracle_al_max;
    auto recs = generate_corpus(*predictor, train_corpus, oc, cfg.workers, &stats);
    save_oracle_records((dir / "seqs.tsv").string(), recs);
    json sj;
    sj["total"] = stats.total;
    sj["kept"] = stats.kept;
    sj["kept_fraction"] = stats.kept_fraction();
    sj["mean_al"] = stats.mean_al_kept;
    std::ofstream out(dir / "stats.json");
    out << sj.dump(2) << '\n';
    return recs;
  });

  PolicyConfig pc;
  pc.feature_dim = predictor->info().feature_dim;
  pc.hidden_dim = cfg.hidden_dim;
  pc.fc_dim = cfg.fc_dim;
  pc.seed = policy_seed;
  PolicyNet net(pc);
  stage("train", [&] {
    std::vector<TrainExample> examples;
    for (size_t i = 0; i < records.size(); ++i) {
      if (!records[i].kept) continue;
      if (cfg.max_train_records > 0 &&
          static_cast<int>(examples.size()) >= cfg.max_train_records)
        break;
      examples.push_back(make_train_example(*predictor, train_corpus[i], records[i].actions));
    }
    if (examples.empty()) throw ContractError("no kept oracle records to train on");
    TrainConfig tc;
    tc.epochs = cfg.train_epochs;
    tc.batch_size = cfg.train_batch;
    tc.lr = cfg.train_lr;
    tc.heldout_fraction = cfg.heldout_fraction;
    tc.seed = cfg.seed;
    std::ofstream log(dir / "train.log");
    train_policy(net, examples, tc, &log);
    net.save((dir / "policy.bin").string());
    return 0;
  });

  auto points = stage("sweep", [&] {
    std::vector<Sentence> refs;
    refs.reserve(dev_corpus.size());
    for (const auto& e : dev_corpus) refs.push_back(e.pair.target);
    SweepSpec spec;
    spec.policy = &net;
    spec.rho_grid = cfg.rho_grid;
    spec.k_grid = cfg.k_grid;
    spec.heuristics = cfg.heuristics;
    spec.workers = cfg.workers;
    spec.dump_dir = dir.string();
    spec.vocab = &vocab;
    auto pts = run_sweep(spec, *predictor, dev_corpus, refs);
    write_curves_csv((dir / "curves.csv").string(), pts);
    return pts;
  });

  json manifest;
  manifest["toolkit_version"] = kToolkitVersion;
  manifest["config_file"] = config_path;
  manifest["config_hash"] = file_hash(config_path);
  manifest["model"] = cfg.model_spec;
  manifest["seeds"] = {{"root", cfg.seed},
                       {"train_corpus", train_corpus_seed},
                       {"dev_corpus", dev_corpus_seed},
                       {"policy_init", policy_seed},
                       {"train", cfg.seed}};
  manifest["vocab_size"] = cfg.vocab_size;
  manifest["workers"] = cfg.workers;
  manifest["corpus"] = {{"train_pairs", cfg.train_pairs},
                        {"dev_pairs", cfg.dev_pairs},
                        {"min_len", cfg.min_len},
                        {"max_len", cfg.max_len},
                        {"train_mix", mix_to_json(cfg.train_mix)},
                        {"dev_mix", mix_to_json(cfg.dev_mix)}};
  manifest["oracle"] = {{"rank", cfg.oracle_rank},
                        {"al_max", std::isinf(cfg.oracle_al_max) ? json("inf")
                                                                 : json(cfg.oracle_al_max)},
                        {"total", stats.total},
                        {"kept", stats.kept}};
  manifest["train"] = {{"epochs", cfg.train_epochs},
                       {"batch", cfg.train_batch},
                       {"lr", cfg.train_lr},
                       {"hidden_dim", cfg.hidden_dim},
                       {"fc_dim", cfg.fc_dim},
                       {"heldout_fraction", cfg.heldout_fraction},
                       {"max_train_records", cfg.max_train_records}};
  manifest["curve_points"] = points.size();
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw StageError("manifest", "cannot write manifest.json");
}

}  // namespace simt
