#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/errors.hpp"
#include "simt/oracle.hpp"
#include "simt/toy_predictor.hpp"

using namespace simt;
namespace fs = std::filesystem;

namespace {

CorpusEntry make_entry(std::initializer_list<TokenId> src, Variant v, int id = 0) {
  CorpusEntry e;
  e.pair.source.tokens = src;
  e.pair.target = apply_variant(v, e.pair.source);
  e.pair.id = id;
  e.variant = v;
  e.lags = variant_lags(v, e.pair.source.length());
  return e;
}

// Effective dependency of target position j (1-based): the raw lag, except
// that the final token additionally waits for the entire source.
std::vector<int> effective_deps(const CorpusEntry& e) {
  std::vector<int> d = e.lags;
  if (!d.empty()) d.back() = std::max(d.back(), e.pair.source.length());
  return d;
}

// Exhaustive reference: enumerate every action sequence with |t| WRITEs and
// at most |s| READs, keep the anticipation-free ones (every write waits for
// its dependency), and return the one with the pointwise-minimal g vector,
// which is also the unique minimizer of the g sum.
ActionSequence brute_force_oracle(const CorpusEntry& e) {
  int src_len = e.pair.source.length();
  int tgt_len = e.pair.target.length();
  std::vector<int> deps = effective_deps(e);

  std::vector<Action> current;
  ActionSequence best;
  long long best_sum = std::numeric_limits<long long>::max();

  std::function<void(int, int, long long)> walk = [&](int reads, int writes, long long g_sum) {
    if (writes == tgt_len) {
      if (g_sum < best_sum) {
        best_sum = g_sum;
        best = ActionSequence(current);
      }
      return;
    }
    if (reads < src_len) {
      current.push_back(Action::READ);
      walk(reads + 1, writes, g_sum);
      current.pop_back();
    }
    if (reads >= deps[writes]) {  // anticipation-free: enough source read
      current.push_back(Action::WRITE);
      walk(reads, writes + 1, g_sum + reads);
      current.pop_back();
    }
  };
  walk(0, 0, 0);
  REQUIRE(best_sum != std::numeric_limits<long long>::max());
  return best;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("simt_oracle_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Predictor wrapper that fails on one specific pair; used to check that
// per-pair errors stay contained.
class FaultyPredictor : public Predictor {
 public:
  FaultyPredictor(const Predictor& inner, int bad_pair) : inner_(inner), bad_pair_(bad_pair) {}
  PredictorInfo info() const override { return inner_.info(); }
  Prediction predict(const SentenceContext& ctx, std::span<const TokenId> s,
                     std::span<const TokenId> t) const override {
    if (ctx.pair_id == bad_pair_) throw ContractError("synthetic failure");
    return inner_.predict(ctx, s, t);
  }
  std::unique_ptr<Predictor> fork_worker() const override {
    return std::make_unique<FaultyPredictor>(inner_, bad_pair_);
  }

 private:
  const Predictor& inner_;
  int bad_pair_;
};

// Records the target prefixes it is queried with.
class SpyPredictor : public Predictor {
 public:
  explicit SpyPredictor(const Predictor& inner) : inner_(inner) {}
  PredictorInfo info() const override { return inner_.info(); }
  Prediction predict(const SentenceContext& ctx, std::span<const TokenId> s,
                     std::span<const TokenId> t) const override {
    prefixes.emplace_back(t.begin(), t.end());
    return inner_.predict(ctx, s, t);
  }
  std::unique_ptr<Predictor> fork_worker() const override {
    throw ContractError("spy is single-threaded");
  }

  mutable std::vector<std::vector<TokenId>> prefixes;

 private:
  const Predictor& inner_;
};

}  // namespace

TEST_CASE("copy pairs alternate read/write under an ideal rank-1 oracle") {
  ToyPredictor model(16, Variant::kCopy);
  OracleConfig cfg;
  auto entry = make_entry({5, 6, 7, 8}, Variant::kCopy);
  auto seq = generate_sequence(model, entry, cfg);
  CHECK(seq.str() == "RWRWRWRW");
}

TEST_CASE("swap2 reads pairs ahead") {
  ToyPredictor model(16, Variant::kSwap2);
  OracleConfig cfg;
  auto entry = make_entry({5, 6, 7, 8}, Variant::kSwap2);
  // Gold [6,5,8,7]: token 1 needs two reads, token 3 needs four.
  CHECK(generate_sequence(model, entry, cfg).str() == "RRWWRRWW");
}

TEST_CASE("rank threshold loosens the writes") {
  ToyPredictor model(16, Variant::kSwap2);
  auto entry = make_entry({5, 6, 7, 8}, Variant::kSwap2);
  OracleConfig cfg;
  // The diffuse branch ranks the gold dead last (16), so any threshold
  // below V keeps the oracle waiting and V makes it write immediately.
  cfg.rank_threshold = 15;
  CHECK(generate_sequence(model, entry, cfg).str() == "RRWWRRWW");
  cfg.rank_threshold = 16;
  CHECK(generate_sequence(model, entry, cfg).str() == "RWWWW");
}

TEST_CASE("exhausted source forces the remaining writes") {
  ToyPredictor model(16, Variant::kRotate1);
  auto entry = make_entry({5, 6, 7, 8}, Variant::kRotate1);
  OracleConfig cfg;
  // Gold [8,5,6,7]: the first token needs the whole source, the rest are
  // then already determined.
  CHECK(generate_sequence(model, entry, cfg).str() == "RRRRWWWW");
}

TEST_CASE("oracle matches exhaustive search on every small pair") {
  OracleConfig cfg;
  for (Variant v : {Variant::kCopy, Variant::kSwap2, Variant::kRotate1}) {
    ToyPredictor model(20, v);
    SyntheticLanguageSpec spec;
    spec.variant = v;
    spec.vocab_size = 20;
    spec.min_len = 2;
    spec.max_len = 6;
    spec.seed = 31 + static_cast<int>(v);
    for (const auto& entry : gen_synthetic(spec, 60)) {
      auto got = generate_sequence(model, entry, cfg);
      auto expected = brute_force_oracle(entry);
      CAPTURE(variant_name(v));
      CAPTURE(entry.pair.id);
      CHECK(got == expected);
    }
  }
}

TEST_CASE("teacher forcing: the oracle always feeds gold prefixes") {
  ToyPredictor inner(16, Variant::kSwap2);
  SpyPredictor spy(inner);
  auto entry = make_entry({5, 6, 7, 8}, Variant::kSwap2);
  OracleConfig cfg;
  generate_sequence(spy, entry, cfg);
  const auto& gold = entry.pair.target.tokens;
  for (const auto& p : spy.prefixes) {
    REQUIRE(p.size() <= gold.size());
    CHECK(std::equal(p.begin(), p.end(), gold.begin()));
  }
}

TEST_CASE("filters: reading everything before the last write comes first") {
  OracleConfig cfg;
  cfg.al_cap = 0.1;  // would also fail the AL test
  auto rec = apply_filters(0, ActionSequence::parse("RWRW"), 3, 2, cfg);
  CHECK_FALSE(rec.kept);
  CHECK(rec.reason == RejectReason::kEarlyFinish);

  // Same shape, but the final write waits for everything: now the only
  // complaint left is the cap.
  rec = apply_filters(0, ActionSequence::parse("RWRRW"), 3, 2, cfg);
  CHECK_FALSE(rec.kept);
  CHECK(rec.reason == RejectReason::kAlExceeded);
}

TEST_CASE("the AL cap is inclusive") {
  OracleConfig cfg;
  cfg.al_cap = 3.0;
  // g = [3,3], gamma = 2/3, tau = 1: AL = 3 exactly.
  auto rec = apply_filters(0, ActionSequence::parse("RRRWW"), 3, 2, cfg);
  CHECK(rec.kept);
  CHECK(rec.reason == RejectReason::kNone);
  CHECK(rec.latency.al == doctest::Approx(3.0));

  cfg.al_cap = 2.999;
  rec = apply_filters(0, ActionSequence::parse("RRRWW"), 3, 2, cfg);
  CHECK_FALSE(rec.kept);
  CHECK(rec.reason == RejectReason::kAlExceeded);
}

TEST_CASE("an infinite cap keeps everything that reads the source") {
  OracleConfig cfg;
  cfg.al_cap = OracleConfig::kNoCap;
  auto rec = apply_filters(0, ActionSequence::parse("RRRRRRWW"), 6, 2, cfg);
  CHECK(rec.kept);
}

TEST_CASE("rotate1 always blows the default cap on long sources") {
  ToyPredictor model(34, Variant::kRotate1);
  OracleConfig cfg;  // rank 1, cap 3
  SyntheticLanguageSpec spec;
  spec.variant = Variant::kRotate1;
  spec.vocab_size = 34;
  spec.min_len = 5;  // cap + 2
  spec.max_len = 10;
  spec.seed = 77;
  auto corpus = gen_synthetic(spec, 50);
  auto records = generate_corpus(model, corpus, cfg);
  for (const auto& rec : records) {
    CHECK_FALSE(rec.kept);
    CHECK(rec.reason == RejectReason::kAlExceeded);
  }
}

TEST_CASE("worker sharding never changes the records") {
  MixedCorpusSpec spec;
  spec.mix = {{Variant::kCopy, 1.0}, {Variant::kSwap2, 1.0}, {Variant::kRotate1, 0.5}};
  spec.vocab_size = 34;
  spec.min_len = 4;
  spec.max_len = 12;
  spec.seed = 13;
  auto corpus = gen_synthetic(spec, 120);
  ToyPredictor model(34, Variant::kNone, ToyNoise{0.4, 0.6, 1, 5});
  OracleConfig cfg;

  OracleStats base_stats;
  auto base = generate_corpus(model, corpus, cfg, 1, &base_stats);
  for (int workers : {2, 3, 8, 64}) {
    OracleStats stats;
    auto got = generate_corpus(model, corpus, cfg, workers, &stats);
    REQUIRE(got.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(got[i].pair_id == base[i].pair_id);
      CHECK(got[i].actions == base[i].actions);
      CHECK(got[i].kept == base[i].kept);
      CHECK(got[i].reason == base[i].reason);
    }
    CHECK(stats.kept == base_stats.kept);
    CHECK(stats.mean_al_kept == doctest::Approx(base_stats.mean_al_kept).epsilon(1e-12));
  }
}

TEST_CASE("per-pair failures become error records, not crashes") {
  SyntheticLanguageSpec spec;
  spec.variant = Variant::kCopy;
  spec.vocab_size = 16;
  spec.seed = 3;
  auto corpus = gen_synthetic(spec, 10);
  ToyPredictor inner(16, Variant::kCopy);
  FaultyPredictor model(inner, 4);
  OracleStats stats;
  auto records = generate_corpus(model, corpus, OracleConfig{}, 2, &stats);
  REQUIRE(records.size() == 10);
  CHECK(records[4].reason == RejectReason::kError);
  CHECK_FALSE(records[4].kept);
  CHECK(records[4].error.find("synthetic failure") != std::string::npos);
  CHECK(stats.errors == 1);
  CHECK(stats.kept == 9);
  CHECK(records[3].kept);
  CHECK(records[5].kept);
}

TEST_CASE("summarize tallies rejections by reason") {
  std::vector<OracleRecord> records(5);
  records[0].kept = true;
  records[0].latency.al = 1.0;
  records[1].kept = true;
  records[1].latency.al = 3.0;
  records[2].reason = RejectReason::kEarlyFinish;
  records[3].reason = RejectReason::kAlExceeded;
  records[4].reason = RejectReason::kError;
  auto stats = summarize(records);
  CHECK(stats.total == 5);
  CHECK(stats.kept == 2);
  CHECK(stats.early_finish == 1);
  CHECK(stats.al_exceeded == 1);
  CHECK(stats.errors == 1);
  CHECK(stats.mean_al_kept == doctest::Approx(2.0));
  CHECK(stats.kept_fraction() == doctest::Approx(0.4));
}

TEST_CASE("record TSV round-trips statuses") {
  TempDir dir;
  ToyPredictor model(16, Variant::kNone);
  MixedCorpusSpec spec;
  spec.mix = {{Variant::kCopy, 1.0}, {Variant::kRotate1, 1.0}};
  spec.vocab_size = 16;
  spec.min_len = 5;
  spec.max_len = 9;
  spec.seed = 23;
  auto corpus = gen_synthetic(spec, 30);
  auto records = generate_corpus(model, corpus, OracleConfig{});
  save_oracle_records(dir.file("seqs.tsv"), records);
  auto back = load_oracle_records(dir.file("seqs.tsv"));
  REQUIRE(back.size() == records.size());
  bool saw_reject = false;
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].pair_id == records[i].pair_id);
    CHECK(back[i].actions == records[i].actions);
    CHECK(back[i].kept == records[i].kept);
    CHECK(back[i].reason == records[i].reason);
    saw_reject = saw_reject || !records[i].kept;
  }
  CHECK(saw_reject);  // rotate1 at this length must reject

  std::ofstream bad(dir.file("bad.tsv"));
  bad << "0\tRW\n";  // missing status column
  bad.close();
  CHECK_THROWS_AS(load_oracle_records(dir.file("bad.tsv")), ParseError);
}

TEST_CASE("generate_sequence validates its inputs") {
  ToyPredictor model(16, Variant::kCopy);
  auto entry = make_entry({5, 6}, Variant::kCopy);
  OracleConfig cfg;
  cfg.rank_threshold = 0;
  CHECK_THROWS_AS(generate_sequence(model, entry, cfg), ContractError);
  cfg.rank_threshold = 1;
  CorpusEntry empty;
  CHECK_THROWS_AS(generate_sequence(model, empty, cfg), ContractError);
}
