#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/errors.hpp"
#include "simt/predictor.hpp"
#include "simt/toy_predictor.hpp"

using namespace simt;

namespace {

struct Query {
  std::vector<TokenId> source;  // full source, as the context carries it
  Variant variant = Variant::kCopy;
  int pair_id = 0;
  bool reveal = false;

  SentenceContext ctx() const {
    SentenceContext c;
    c.pair_id = pair_id;
    c.source = source;
    c.variant = variant;
    c.reveal_dependency = reveal;
    return c;
  }
};

std::span<const TokenId> prefix(const std::vector<TokenId>& v, size_t n) {
  return std::span<const TokenId>(v.data(), n);
}

void check_well_formed(const Prediction& p, int vocab_size) {
  REQUIRE(static_cast<int>(p.ranked.size()) == vocab_size);
  std::set<TokenId> seen;
  double sum = 0.0;
  for (size_t k = 0; k < p.ranked.size(); ++k) {
    auto [id, logp] = p.ranked[k];
    CHECK(id >= 0);
    CHECK(id < vocab_size);
    seen.insert(id);
    sum += std::exp(logp);
    // Non-increasing everywhere (the confident branch ties its tail), and
    // the top slot strictly dominates so rank 1 is never ambiguous.
    if (k > 0) CHECK(p.ranked[k - 1].second >= p.ranked[k].second - 1e-12);
  }
  CHECK(p.ranked[0].second > p.ranked[1].second + 1e-12);
  CHECK(static_cast<int>(seen.size()) == vocab_size);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("confident prediction once the dependency is readable") {
  ToyPredictor model(16, Variant::kCopy);
  Query q{{5, 6, 7, 8}};
  // First target token of a copy pair depends on one source token.
  auto p = model.predict(q.ctx(), prefix(q.source, 1), {});
  check_well_formed(p, 16);
  CHECK(p.top1() == 5);
  CHECK(p.top1_prob() == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(model.rank_of(5, q.ctx(), prefix(q.source, 1), {}) == 1);
}

TEST_CASE("insufficient context buries the gold token dead last") {
  ToyPredictor model(16, Variant::kCopy);
  Query q{{5, 6, 7, 8}};
  std::vector<TokenId> tgt = {5};
  // Second token needs two source reads; with one, the model parrots the
  // latest source token and ranks the gold at the very bottom.
  auto p = model.predict(q.ctx(), prefix(q.source, 1), tgt);
  check_well_formed(p, 16);
  CHECK(p.top1() == 5);
  CHECK(model.rank_of(6, q.ctx(), prefix(q.source, 1), tgt) == 16);
  // One more read flips it to confident.
  CHECK(model.rank_of(6, q.ctx(), prefix(q.source, 2), tgt) == 1);
}

TEST_CASE("parrot falls back off the gold token when they collide") {
  ToyPredictor model(16, Variant::kCopy);
  // Source repeats a token, so parroting s1 would equal the gold for j=2.
  Query q{{5, 5, 7, 8}};
  std::vector<TokenId> tgt = {5};
  auto p = model.predict(q.ctx(), prefix(q.source, 1), tgt);
  CHECK(p.top1() != 5);
  CHECK(model.rank_of(5, q.ctx(), prefix(q.source, 1), tgt) == 16);
}

TEST_CASE("the sentence-final token requires the whole source") {
  ToyPredictor model(16, Variant::kCopy);
  Query q{{5, 6, 7, 8}};
  std::vector<TokenId> tgt = {5, 6, 7};
  // d(4) = 4 in a 4-token source, no EOS: satisfied at i = 4...
  CHECK(model.rank_of(8, q.ctx(), prefix(q.source, 4), tgt) == 1);
  CHECK(model.rank_of(8, q.ctx(), prefix(q.source, 3), tgt) == 16);

  // ...but with a trailing EOS the readable length is 5 and the final
  // content token now waits for it.
  Query qe{{5, 6, 7, 8, kEosId}};
  CHECK(model.rank_of(8, qe.ctx(), prefix(qe.source, 4), tgt) == 16);
  CHECK(model.rank_of(8, qe.ctx(), prefix(qe.source, 5), tgt) == 1);
}

TEST_CASE("EOS becomes the answer after the full target") {
  ToyPredictor model(16, Variant::kCopy);
  Query q{{5, 6, 7, 8}};
  std::vector<TokenId> full = {5, 6, 7, 8};
  auto p = model.predict(q.ctx(), prefix(q.source, 4), full);
  CHECK(p.top1() == kEosId);
  // Queries past the target length keep answering the EOS rule, so a
  // free-running decoder always sees a stop signal.
  std::vector<TokenId> over = {5, 6, 7, 8, 9, 9};
  CHECK(model.predict(q.ctx(), prefix(q.source, 4), over).top1() == kEosId);
  // EOS needs the full source too.
  CHECK(model.predict(q.ctx(), prefix(q.source, 3), full).top1() != kEosId);
}

TEST_CASE("swap2 and rotate1 dependencies drive the rank flips") {
  ToyPredictor swap(16, Variant::kSwap2);
  Query qs{{5, 6, 7, 8}, Variant::kSwap2};
  // Gold target is [6,5,8,7]; the first token needs two reads.
  CHECK(swap.rank_of(6, qs.ctx(), prefix(qs.source, 1), {}) == 16);
  CHECK(swap.rank_of(6, qs.ctx(), prefix(qs.source, 2), {}) == 1);

  ToyPredictor rot(16, Variant::kRotate1);
  Query qr{{5, 6, 7, 8}, Variant::kRotate1};
  // Gold target is [8,5,6,7]; the first token needs the whole source.
  CHECK(rot.rank_of(8, qr.ctx(), prefix(qr.source, 3), {}) == 16);
  CHECK(rot.rank_of(8, qr.ctx(), prefix(qr.source, 4), {}) == 1);
}

TEST_CASE("feature vector layout and gating") {
  ToyPredictor model(16, Variant::kCopy);
  Query q{{5, 6, 7, 8}};
  auto p = model.predict(q.ctx(), prefix(q.source, 2), std::vector<TokenId>{5});
  REQUIRE(p.features.dim() == ToyPredictor::kFeatureDim);
  const auto& f = p.features.values;
  CHECK(f[0] == doctest::Approx(2.0 / 4.0));  // source progress
  CHECK(f[1] == doctest::Approx(1.0 / 4.0));  // target progress
  CHECK(f[2] == doctest::Approx(p.top1_prob()));
  CHECK(f[3] == doctest::Approx(std::exp(p.ranked[0].second) - std::exp(p.ranked[1].second)));
  CHECK(f[4] > 0.0);  // normalized entropy
  CHECK(f[4] < 1.0);
  CHECK(f[5] == 0.0);  // source not exhausted
  CHECK(f[7] == 1.0);  // bias

  // The dependency-satisfied slot stays zero unless explicitly revealed:
  // it is derived from the gold alignment and must not leak into training.
  CHECK(f[6] == 0.0);
  Query qr = q;
  qr.reveal = true;
  auto pr = model.predict(qr.ctx(), prefix(q.source, 2), std::vector<TokenId>{5});
  CHECK(pr.features.values[6] == 1.0);  // j=2 needs 2 reads, satisfied
  auto pr2 = model.predict(qr.ctx(), prefix(q.source, 1), std::vector<TokenId>{5});
  CHECK(pr2.features.values[6] == 0.0);  // not satisfied

  auto pe = model.predict(q.ctx(), prefix(q.source, 4), std::vector<TokenId>{5, 6, 7});
  CHECK(pe.features.values[5] == 1.0);  // exhausted
}

TEST_CASE("confidence decays with position when context is insufficient") {
  ToyPredictor model(34, Variant::kCopy);
  std::vector<TokenId> src(12);
  for (int i = 0; i < 12; ++i) src[i] = static_cast<TokenId>(2 + i);
  Query q{src};
  std::vector<TokenId> tgt(11);
  for (int i = 0; i < 11; ++i) tgt[i] = src[i];
  // Query the last token (needs i = 12) at growing i: the parrot's
  // confidence shrinks as more context fails to resolve the answer.
  double prev = 1.0;
  for (int i = 1; i <= 11; ++i) {
    auto p = model.predict(q.ctx(), prefix(q.source, i), tgt);
    check_well_formed(p, 34);
    CHECK(p.top1_prob() < prev);
    prev = p.top1_prob();
  }
}

TEST_CASE("rankings stay sorted at tiny vocab sizes") {
  for (int vs : {4, 5, 6, 8, 12, 34}) {
    ToyPredictor model(vs, Variant::kCopy, ToyNoise{0.9, 0.6, 1, 7});
    std::vector<TokenId> src = {2, 3, 2, 3};
    Query q{src};
    for (int j = 0; j <= 4; ++j) {
      std::vector<TokenId> tgt(src.begin(), src.begin() + j);
      for (int i = 1; i <= 4; ++i) {
        CAPTURE(vs);
        CAPTURE(i);
        CAPTURE(j);
        check_well_formed(model.predict(q.ctx(), prefix(q.source, i), tgt), vs);
      }
    }
  }
}

TEST_CASE("noise off reproduces the ideal predictor exactly") {
  ToyPredictor ideal(20, Variant::kSwap2);
  ToyPredictor zero_noise(20, Variant::kSwap2, ToyNoise{0.0, 0.7, 5, 99});
  std::vector<TokenId> src = {4, 9, 11, 6, 13, 2};
  Query q{src, Variant::kSwap2, 42};
  for (int j = 0; j <= 6; ++j) {
    std::vector<TokenId> tgt;
    Sentence gold = apply_variant(Variant::kSwap2, Sentence{src});
    tgt.assign(gold.tokens.begin(), gold.tokens.begin() + j);
    for (int i = 1; i <= 6; ++i) {
      auto a = ideal.predict(q.ctx(), prefix(q.source, i), tgt);
      auto b = zero_noise.predict(q.ctx(), prefix(q.source, i), tgt);
      CHECK(a.ranked == b.ranked);
      CHECK(a.features.values == b.features.values);
    }
  }
}

TEST_CASE("stalls bury the gold past its dependency, never past the source") {
  // inflate_p = 1 stalls every shallow-dependency position for at least one
  // step (the stall chance fades for positions deep into the source).
  ToyNoise noise{1.0, 0.5, 1, 21};
  ToyPredictor model(16, Variant::kCopy, noise);
  std::vector<TokenId> src = {5, 6, 7, 8, 9, 10, kEosId};
  Query q{src, Variant::kCopy, 3};

  // Position j=1 (gold 6, d=2): at i=2 the stall is active.
  std::vector<TokenId> tgt = {5};
  auto p = model.predict(q.ctx(), prefix(q.source, 2), tgt);
  CHECK(p.top1() != 6);
  int r = model.rank_of(6, q.ctx(), prefix(q.source, 2), tgt);
  CHECK(r >= 2);
  CHECK(p.top1_prob() >= 0.50);
  CHECK(p.top1_prob() <= 0.88 + 1e-12);

  // Reading the whole source always resolves any stall.
  CHECK(model.rank_of(6, q.ctx(), prefix(q.source, 7), tgt) == 1);

  // EOS queries never stall.
  std::vector<TokenId> full = {5, 6, 7, 8, 9, 10};
  CHECK(model.predict(q.ctx(), prefix(q.source, 7), full).top1() == kEosId);
  // Neither does the final content token (its dependency is the full source).
  std::vector<TokenId> most = {5, 6, 7, 8, 9};
  CHECK(model.predict(q.ctx(), prefix(q.source, 7), most).top1() == 10);
}

TEST_CASE("rank floor pushes buried ranks deeper") {
  std::vector<TokenId> src = {5, 6, 7, 8, 9, 10, 11, 12, kEosId};
  Query q{src, Variant::kCopy, 9};
  std::vector<TokenId> tgt = {5};
  for (int floor : {1, 5, 10}) {
    ToyPredictor model(16, Variant::kCopy, ToyNoise{1.0, 0.5, floor, 21});
    int r = model.rank_of(6, q.ctx(), prefix(q.source, 2), tgt);
    CHECK(r > floor);
    CHECK(r <= 16);
  }
}

TEST_CASE("dips depress confidence but keep the gold on top") {
  // dip_p = 1 with inflate_p = 0 bands every eligible position for at
  // least one step without ever burying the gold.
  ToyNoise noise{0.0, 0.5, 1, 21, 1.0};
  ToyPredictor model(16, Variant::kCopy, noise);
  std::vector<TokenId> src = {5, 6, 7, 8, 9, 10, kEosId};
  Query q{src, Variant::kCopy, 3};

  // Position j=1 (gold 6, d=2): at i=2 the dip window is active. The
  // answer sits in the mid band but stays correct, so writing through a
  // dip costs nothing.
  std::vector<TokenId> tgt = {5};
  auto p = model.predict(q.ctx(), prefix(q.source, 2), tgt);
  check_well_formed(p, 16);
  CHECK(p.top1() == 6);
  CHECK(p.top1_prob() >= 0.52 - 1e-12);
  CHECK(p.top1_prob() <= 0.88 + 1e-12);

  // Reading the whole source resolves the dip back to clean confidence.
  auto pr = model.predict(q.ctx(), prefix(q.source, 7), tgt);
  CHECK(pr.top1() == 6);
  CHECK(pr.top1_prob() >= 0.89 - 1e-12);

  // EOS queries and the final content token never dip.
  std::vector<TokenId> full = {5, 6, 7, 8, 9, 10};
  auto pe = model.predict(q.ctx(), prefix(q.source, 7), full);
  CHECK(pe.top1() == kEosId);
  CHECK(pe.top1_prob() >= 0.89 - 1e-12);
  std::vector<TokenId> most = {5, 6, 7, 8, 9};
  auto pf = model.predict(q.ctx(), prefix(q.source, 7), most);
  CHECK(pf.top1() == 10);
  CHECK(pf.top1_prob() >= 0.89 - 1e-12);
}

TEST_CASE("dip windows share the stall window law") {
  // stall_q = 0 pins every window to exactly one step: banded at i = d(j),
  // clean again one read later.
  ToyNoise noise{0.0, 0.0, 1, 5, 1.0};
  ToyPredictor model(16, Variant::kCopy, noise);
  std::vector<TokenId> src = {5, 6, 7, 8, 9, kEosId};
  Query q{src, Variant::kCopy, 11};
  std::vector<TokenId> tgt = {5};
  auto at2 = model.predict(q.ctx(), prefix(q.source, 2), tgt);
  CHECK(at2.top1() == 6);
  CHECK(at2.top1_prob() <= 0.88 + 1e-12);
  auto at3 = model.predict(q.ctx(), prefix(q.source, 3), tgt);
  CHECK(at3.top1() == 6);
  CHECK(at3.top1_prob() >= 0.89 - 1e-12);
}

TEST_CASE("stall and dip classes partition banded positions") {
  // Both rates high: every eligible position lands in exactly one class.
  // Banded answers either keep the gold on top (dip) or bury it (stall),
  // and a mixed corpus shows plenty of each.
  ToyNoise noise{0.5, 0.6, 1, 13, 1.0};
  ToyPredictor model(20, Variant::kCopy, noise);
  std::vector<TokenId> src = {4, 5, 6, 7, 8, 9, 10, kEosId};
  int stalls = 0, dips = 0;
  for (int pid = 0; pid < 30; ++pid) {
    Query q{src, Variant::kCopy, pid};
    for (int j = 0; j + 1 < 7; ++j) {  // interior positions, d = j+1 < |s|
      std::vector<TokenId> tgt(src.begin(), src.begin() + j);
      int dep = j + 1;
      auto p = model.predict(q.ctx(), prefix(q.source, static_cast<size_t>(dep)), tgt);
      check_well_formed(p, 20);
      REQUIRE(p.top1_prob() <= 0.88 + 1e-12);  // a window always covers i = d
      int r = model.rank_of(src[static_cast<size_t>(j)], q.ctx(),
                            prefix(q.source, static_cast<size_t>(dep)), tgt);
      if (r == 1)
        ++dips;
      else
        ++stalls;
    }
  }
  CHECK(stalls + dips == 30 * 6);
  CHECK(stalls > 30);
  CHECK(dips > 30);
}

TEST_CASE("noise draws are a pure function of the query") {
  ToyNoise noise{0.6, 0.6, 3, 11, 0.8};
  ToyPredictor model(20, Variant::kCopy, noise);
  auto clone = model.fork_worker();
  std::vector<TokenId> src = {4, 5, 6, 7, 8, 9};
  Query q{src, Variant::kCopy, 17};
  for (int j = 0; j <= 5; ++j) {
    std::vector<TokenId> tgt(src.begin(), src.begin() + j);
    for (int i = 1; i <= 6; ++i) {
      auto a = model.predict(q.ctx(), prefix(q.source, i), tgt);
      auto b = model.predict(q.ctx(), prefix(q.source, i), tgt);  // repeat
      auto c = clone->predict(q.ctx(), prefix(q.source, i), tgt);
      CHECK(a.ranked == b.ranked);
      CHECK(a.ranked == c.ranked);
    }
  }
}

TEST_CASE("model specs parse into working predictors") {
  auto toy = make_predictor("toy:swap2", 16);
  CHECK(toy->info().vocab_size == 16);
  CHECK(toy->info().feature_dim == ToyPredictor::kFeatureDim);

  auto noisy = make_predictor("toy:copy:noise=0.8:stallq=0.7:dip=0.5:seed=5:eps=0.1:rankfloor=4", 16);
  std::vector<TokenId> src = {5, 6, 7, 8};
  Query q{src};
  auto a = toy->predict(q.ctx(), prefix(src, 1), {});
  auto b = noisy->predict(q.ctx(), prefix(src, 1), {});
  CHECK(a.ranked != b.ranked);  // eps alone changes the confident branch

  CHECK_THROWS_AS(make_predictor("toy:backwards", 16), ConfigError);
  CHECK_THROWS_AS(make_predictor("toy:copy:volume=11", 16), ConfigError);
  CHECK_THROWS_AS(make_predictor("oracle:copy", 16), ConfigError);
  CHECK_THROWS_AS(make_predictor("adapter:carrier-pigeon:x", 16), ConfigError);
  CHECK_THROWS_AS(make_predictor("toy:copy:noise=1.5", 16), ConfigError);
  CHECK_THROWS_AS(make_predictor("toy:copy:dip=1.5", 16), ConfigError);
}

TEST_CASE("the oracle rank threshold seeds the noise rank floor") {
  auto a = make_predictor("toy:copy:noise=1.0:seed=3", 16, 8);
  auto b = make_predictor("toy:copy:noise=1.0:seed=3:rankfloor=8", 16);
  std::vector<TokenId> src = {5, 6, 7, 8, 9, 10, kEosId};
  Query q{src, Variant::kCopy, 2};
  std::vector<TokenId> tgt = {5};
  CHECK(a->rank_of(6, q.ctx(), prefix(src, 2), tgt) ==
        b->rank_of(6, q.ctx(), prefix(src, 2), tgt));
  CHECK(a->rank_of(6, q.ctx(), prefix(src, 2), tgt) > 8);
}

TEST_CASE("auto variant resolves from the context") {
  auto model = make_predictor("toy:auto", 16);
  std::vector<TokenId> src = {5, 6, 7, 8};
  Query qs{src, Variant::kSwap2};
  CHECK(model->predict(qs.ctx(), prefix(src, 2), {}).top1() == 6);
  Query qc{src, Variant::kCopy};
  CHECK(model->predict(qc.ctx(), prefix(src, 2), {}).top1() == 5);
  Query qn{src, Variant::kNone};
  CHECK_THROWS_AS(model->predict(qn.ctx(), prefix(src, 2), {}), ContractError);
}
