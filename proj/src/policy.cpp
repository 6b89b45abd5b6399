#include "simt/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "simt/errors.hpp"
#include "simt/rng.hpp"

namespace simt {

namespace {

// Flat parameter layout. Matrices are row-major.
struct Layout {
  int I, H, F;
  size_t wz, uz, bz, wr, ur, br, wh, uh, bh, w1, b1, w2, b2, total;

  explicit Layout(const PolicyConfig& cfg)
      : I(cfg.feature_dim + 2), H(cfg.hidden_dim), F(cfg.fc_dim) {
    size_t o = 0;
    auto take = [&o](size_t n) {
      size_t at = o;
      o += n;
      return at;
    };
    size_t sI = static_cast<size_t>(I), sH = static_cast<size_t>(H), sF = static_cast<size_t>(F);
    wz = take(sH * sI);
    uz = take(sH * sH);
    bz = take(sH);
    wr = take(sH * sI);
    ur = take(sH * sH);
    br = take(sH);
    wh = take(sH * sI);
    uh = take(sH * sH);
    bh = take(sH);
    w1 = take(sF * sH);
    b1 = take(sF);
    w2 = take(2 * sF);
    b2 = take(2);
    total = o;
  }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += M x, M is rows x cols
void matvec_acc(const double* M, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = M + static_cast<size_t>(r) * static_cast<size_t>(cols);
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += M^T g, M is rows x cols, g has rows entries, y has cols entries
void mat_t_vec_acc(const double* M, const double* g, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = M + static_cast<size_t>(r) * static_cast<size_t>(cols);
    for (int c = 0; c < cols; ++c) y[c] += gr * row[c];
  }
}

// G += g (outer) x, G is rows x cols
void outer_acc(double* G, const double* g, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double gr = g[r];
    if (gr == 0.0) continue;
    double* row = G + static_cast<size_t>(r) * static_cast<size_t>(cols);
    for (int c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

struct StepCache {
  std::vector<double> x, z, r, c, rh, h, u, a;
  std::array<double, 2> p{0.5, 0.5};
};

void build_input(const Layout& L, const PolicyStep& s, std::vector<double>& x) {
  if (s.obs.dim() != L.I - 2)
    throw ContractError("observation has dim " + std::to_string(s.obs.dim()) + ", policy expects " +
                        std::to_string(L.I - 2));
  x.assign(static_cast<size_t>(L.I), 0.0);
  std::copy(s.obs.values.begin(), s.obs.values.end(), x.begin());
  x[static_cast<size_t>(L.I - 2)] = s.prev == Action::READ ? 1.0 : 0.0;
  x[static_cast<size_t>(L.I - 1)] = s.prev == Action::WRITE ? 1.0 : 0.0;
}

// One recurrence + head evaluation. h_prev is read before h is written, so
// the two may alias only if they are distinct buffers.
void run_step(const Layout& L, const double* th, const std::vector<double>& h_prev,
              StepCache& sc) {
  const int H = L.H, I = L.I, F = L.F;
  sc.z.assign(th + L.bz, th + L.bz + H);
  matvec_acc(th + L.wz, sc.x.data(), sc.z.data(), H, I);
  matvec_acc(th + L.uz, h_prev.data(), sc.z.data(), H, H);
  sc.r.assign(th + L.br, th + L.br + H);
  matvec_acc(th + L.wr, sc.x.data(), sc.r.data(), H, I);
  matvec_acc(th + L.ur, h_prev.data(), sc.r.data(), H, H);
  for (int i = 0; i < H; ++i) {
    sc.z[static_cast<size_t>(i)] = sigmoid(sc.z[static_cast<size_t>(i)]);
    sc.r[static_cast<size_t>(i)] = sigmoid(sc.r[static_cast<size_t>(i)]);
  }
  sc.rh.resize(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i) sc.rh[static_cast<size_t>(i)] = sc.r[static_cast<size_t>(i)] * h_prev[static_cast<size_t>(i)];
  sc.c.assign(th + L.bh, th + L.bh + H);
  matvec_acc(th + L.wh, sc.x.data(), sc.c.data(), H, I);
  matvec_acc(th + L.uh, sc.rh.data(), sc.c.data(), H, H);
  sc.h.resize(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i) {
    sc.c[static_cast<size_t>(i)] = std::tanh(sc.c[static_cast<size_t>(i)]);
    sc.h[static_cast<size_t>(i)] =
        sc.z[static_cast<size_t>(i)] * h_prev[static_cast<size_t>(i)] +
        (1.0 - sc.z[static_cast<size_t>(i)]) * sc.c[static_cast<size_t>(i)];
  }

  sc.u.assign(th + L.b1, th + L.b1 + F);
  matvec_acc(th + L.w1, sc.h.data(), sc.u.data(), F, H);
  sc.a.resize(static_cast<size_t>(F));
  for (int i = 0; i < F; ++i) sc.a[static_cast<size_t>(i)] = std::max(0.0, sc.u[static_cast<size_t>(i)]);
  double o0 = th[L.b2], o1 = th[L.b2 + 1];
  const double* w2 = th + L.w2;
  for (int i = 0; i < F; ++i) {
    o0 += w2[i] * sc.a[static_cast<size_t>(i)];
    o1 += w2[F + i] * sc.a[static_cast<size_t>(i)];
  }
  double m = std::max(o0, o1);
  double e0 = std::exp(o0 - m), e1 = std::exp(o1 - m);
  double sum = e0 + e1;
  sc.p = {e0 / sum, e1 / sum};
}

double safe_nlog(double p) { return -std::log(std::max(p, 1e-300)); }

}  // namespace

PolicyNet::PolicyNet(const PolicyConfig& cfg) : cfg_(cfg) {
  if (cfg.feature_dim < 1 || cfg.hidden_dim < 1 || cfg.fc_dim < 1)
    throw ContractError("policy dimensions must be positive");
  Layout L(cfg_);
  theta_.assign(L.total, 0.0);
  Rng rng(hash_combine(cfg_.seed, 0x90CCULL));
  auto fill_uniform = [&](size_t at, size_t n, double limit) {
    for (size_t i = 0; i < n; ++i) theta_[at + i] = (rng.next_double() * 2.0 - 1.0) * limit;
  };
  // Glorot-style limits for the recurrent stack and the first FC layer;
  // biases and the output layer stay zero so a fresh net is exactly uniform.
  size_t sI = static_cast<size_t>(L.I), sH = static_cast<size_t>(L.H), sF = static_cast<size_t>(L.F);
  double lim_in = std::sqrt(6.0 / static_cast<double>(L.I + L.H));
  double lim_rec = std::sqrt(6.0 / static_cast<double>(L.H + L.H));
  double lim_fc = std::sqrt(6.0 / static_cast<double>(L.H + L.F));
  fill_uniform(L.wz, sH * sI, lim_in);
  fill_uniform(L.uz, sH * sH, lim_rec);
  fill_uniform(L.wr, sH * sI, lim_in);
  fill_uniform(L.ur, sH * sH, lim_rec);
  fill_uniform(L.wh, sH * sI, lim_in);
  fill_uniform(L.uh, sH * sH, lim_rec);
  fill_uniform(L.w1, sF * sH, lim_fc);
}

std::vector<std::array<double, 2>> PolicyNet::forward(const std::vector<PolicyStep>& steps) const {
  Layout L(cfg_);
  std::vector<std::array<double, 2>> out;
  out.reserve(steps.size());
  std::vector<double> h(static_cast<size_t>(L.H), 0.0);
  StepCache sc;
  for (const auto& s : steps) {
    build_input(L, s, sc.x);
    run_step(L, theta_.data(), h, sc);
    h = sc.h;
    out.push_back(sc.p);
  }
  return out;
}

double PolicyNet::nll(const TrainExample& ex) const {
  if (ex.gold.size() != ex.steps.size())
    throw ContractError("gold actions and steps must align");
  auto probs = forward(ex.steps);
  double loss = 0.0;
  for (size_t i = 0; i < probs.size(); ++i)
    loss += safe_nlog(probs[i][static_cast<size_t>(ex.gold[i])]);
  return loss;
}

double PolicyNet::nll_grad(const TrainExample& ex, std::vector<double>& grad) const {
  if (ex.gold.size() != ex.steps.size())
    throw ContractError("gold actions and steps must align");
  Layout L(cfg_);
  if (grad.size() != theta_.size())
    throw ContractError("gradient buffer size does not match the parameter count");
  const int n = static_cast<int>(ex.steps.size());
  const int H = L.H, I = L.I, F = L.F;
  const double* th = theta_.data();

  std::vector<StepCache> cache(static_cast<size_t>(n));
  std::vector<double> h0(static_cast<size_t>(H), 0.0);
  double loss = 0.0;
  for (int t = 0; t < n; ++t) {
    StepCache& sc = cache[static_cast<size_t>(t)];
    build_input(L, ex.steps[static_cast<size_t>(t)], sc.x);
    const std::vector<double>& h_prev = t == 0 ? h0 : cache[static_cast<size_t>(t - 1)].h;
    run_step(L, th, h_prev, sc);
    loss += safe_nlog(sc.p[static_cast<size_t>(ex.gold[static_cast<size_t>(t)])]);
  }

  double* g = grad.data();
  std::vector<double> gh(static_cast<size_t>(H), 0.0);   // dL/dh_t
  std::vector<double> ghp(static_cast<size_t>(H), 0.0);  // dL/dh_{t-1} under construction
  std::vector<double> du(static_cast<size_t>(F));
  std::vector<double> daz(static_cast<size_t>(H)), dar(static_cast<size_t>(H)), dah(static_cast<size_t>(H)), grh(static_cast<size_t>(H));
  for (int t = n - 1; t >= 0; --t) {
    const StepCache& sc = cache[static_cast<size_t>(t)];
    const std::vector<double>& h_prev = t == 0 ? h0 : cache[static_cast<size_t>(t - 1)].h;

    // Head: softmax cross-entropy.
    std::array<double, 2> dout = sc.p;
    dout[static_cast<size_t>(ex.gold[static_cast<size_t>(t)])] -= 1.0;
    g[L.b2] += dout[0];
    g[L.b2 + 1] += dout[1];
    for (int i = 0; i < F; ++i) {
      g[L.w2 + static_cast<size_t>(i)] += dout[0] * sc.a[static_cast<size_t>(i)];
      g[L.w2 + static_cast<size_t>(F + i)] += dout[1] * sc.a[static_cast<size_t>(i)];
      double da = dout[0] * th[L.w2 + static_cast<size_t>(i)] + dout[1] * th[L.w2 + static_cast<size_t>(F + i)];
      du[static_cast<size_t>(i)] = sc.u[static_cast<size_t>(i)] > 0.0 ? da : 0.0;
    }
    outer_acc(g + L.w1, du.data(), sc.h.data(), F, H);
    for (int i = 0; i < F; ++i) g[L.b1 + static_cast<size_t>(i)] += du[static_cast<size_t>(i)];
    mat_t_vec_acc(th + L.w1, du.data(), gh.data(), F, H);

    // Gate backprop.
    std::fill(ghp.begin(), ghp.end(), 0.0);
    for (int i = 0; i < H; ++i) {
      size_t si = static_cast<size_t>(i);
      double dz = gh[si] * (h_prev[si] - sc.c[si]);
      double dc = gh[si] * (1.0 - sc.z[si]);
      ghp[si] += gh[si] * sc.z[si];
      daz[si] = dz * sc.z[si] * (1.0 - sc.z[si]);
      dah[si] = dc * (1.0 - sc.c[si] * sc.c[si]);
    }
    outer_acc(g + L.wh, dah.data(), sc.x.data(), H, I);
    outer_acc(g + L.uh, dah.data(), sc.rh.data(), H, H);
    for (int i = 0; i < H; ++i) g[L.bh + static_cast<size_t>(i)] += dah[static_cast<size_t>(i)];
    std::fill(grh.begin(), grh.end(), 0.0);
    mat_t_vec_acc(th + L.uh, dah.data(), grh.data(), H, H);
    for (int i = 0; i < H; ++i) {
      size_t si = static_cast<size_t>(i);
      double dr = grh[si] * h_prev[si];
      ghp[si] += grh[si] * sc.r[si];
      dar[si] = dr * sc.r[si] * (1.0 - sc.r[si]);
    }
    outer_acc(g + L.wz, daz.data(), sc.x.data(), H, I);
    outer_acc(g + L.uz, daz.data(), h_prev.data(), H, H);
    outer_acc(g + L.wr, dar.data(), sc.x.data(), H, I);
    outer_acc(g + L.ur, dar.data(), h_prev.data(), H, H);
    for (int i = 0; i < H; ++i) {
      g[L.bz + static_cast<size_t>(i)] += daz[static_cast<size_t>(i)];
      g[L.br + static_cast<size_t>(i)] += dar[static_cast<size_t>(i)];
    }
    mat_t_vec_acc(th + L.uz, daz.data(), ghp.data(), H, H);
    mat_t_vec_acc(th + L.ur, dar.data(), ghp.data(), H, H);
    gh = ghp;
  }
  return loss;
}

PolicyNet::State PolicyNet::initial_state() const {
  return State{std::vector<double>(static_cast<size_t>(cfg_.hidden_dim), 0.0)};
}

std::array<double, 2> PolicyNet::step(State& state, const Observation& obs, Action prev) const {
  Layout L(cfg_);
  if (static_cast<int>(state.h.size()) != L.H)
    throw ContractError("policy state does not match the hidden size");
  StepCache sc;
  build_input(L, PolicyStep{obs, prev}, sc.x);
  run_step(L, theta_.data(), state.h, sc);
  state.h = std::move(sc.h);
  return sc.p;
}

void PolicyNet::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "simt-policy";
  j["version"] = 1;
  j["feature_dim"] = cfg_.feature_dim;
  j["hidden_dim"] = cfg_.hidden_dim;
  j["fc_dim"] = cfg_.fc_dim;
  j["seed"] = cfg_.seed;
  j["theta"] = theta_;
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write policy file " + path);
  out << j.dump() << '\n';
  if (!out) throw CorpusError("failed writing policy file " + path);
}

PolicyNet PolicyNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read policy file " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("policy file is not valid JSON");
  if (j.value("format", std::string()) != "simt-policy")
    throw ParseError("not a policy file (missing format tag)");
  if (j.value("version", 0) != 1) throw ParseError("unsupported policy file version");
  for (const char* key : {"feature_dim", "hidden_dim", "fc_dim", "theta"})
    if (!j.contains(key)) throw ParseError(std::string("policy file lacks '") + key + "'");
  PolicyConfig cfg;
  cfg.feature_dim = j["feature_dim"].get<int>();
  cfg.hidden_dim = j["hidden_dim"].get<int>();
  cfg.fc_dim = j["fc_dim"].get<int>();
  cfg.seed = j.value("seed", uint64_t{0});
  PolicyNet net(cfg);
  Layout L(cfg);
  const auto& arr = j["theta"];
  if (!arr.is_array() || arr.size() != L.total)
    throw ParseError("policy parameter count does not match the declared dimensions");
  for (size_t i = 0; i < L.total; ++i) {
    if (!arr[i].is_number()) throw ParseError("policy parameters must be finite numbers");
    net.theta_[i] = arr[i].get<double>();
    if (!std::isfinite(net.theta_[i]))
      throw ParseError("policy parameters must be finite numbers");
  }
  return net;
}

TrainExample make_train_example(const Predictor& predictor, const CorpusEntry& entry,
                                const ActionSequence& actions) {
  const auto& src = entry.pair.source.tokens;
  const auto& tgt = entry.pair.target.tokens;
  if (!actions.valid_for(static_cast<int>(src.size()), static_cast<int>(tgt.size())) ||
      actions.actions.empty())
    throw ContractError("action sequence does not fit sentence pair " +
                        std::to_string(entry.pair.id));

  SentenceContext ctx;
  ctx.pair_id = entry.pair.id;
  ctx.source = src;
  ctx.variant = entry.variant;
  ctx.reveal_dependency = false;

  TrainExample ex;
  ex.pair_id = entry.pair.id;
  ex.steps.reserve(actions.actions.size() - 1);
  ex.gold.reserve(actions.actions.size() - 1);
  size_t id_s = 0, id_t = 0;
  for (size_t i = 0; i < actions.actions.size(); ++i) {
    Action a = actions.actions[i];
    if (i == 0) {
      // The forced initial READ is not a decision; it only advances the
      // source cursor.
      ++id_s;
      continue;
    }
    Prediction pred = predictor.predict(ctx, std::span<const TokenId>(src.data(), id_s),
                                        std::span<const TokenId>(tgt.data(), id_t));
    ex.steps.push_back(PolicyStep{pred.features, actions.actions[i - 1]});
    ex.gold.push_back(a);
    if (a == Action::READ) {
      ++id_s;
    } else {
      ++id_t;
    }
  }
  return ex;
}

namespace {

double heldout_accuracy(const PolicyNet& net, const std::vector<TrainExample>& data,
                        const std::vector<int>& idx) {
  int64_t correct = 0, total = 0;
  for (int i : idx) {
    const TrainExample& ex = data[static_cast<size_t>(i)];
    auto probs = net.forward(ex.steps);
    for (size_t t = 0; t < probs.size(); ++t) {
      Action pred = probs[t][1] >= probs[t][0] ? Action::WRITE : Action::READ;
      correct += pred == ex.gold[t];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<size_t>(rng.next_int(0, static_cast<int64_t>(i) - 1))]);
}

}  // namespace

TrainReport train_policy(PolicyNet& net, const std::vector<TrainExample>& data,
                         const TrainConfig& cfg, std::ostream* log) {
  if (data.empty()) throw ContractError("no training examples");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0) ||
      !(cfg.heldout_fraction >= 0.0 && cfg.heldout_fraction < 1.0))
    throw ContractError("bad training configuration");

  const int n = static_cast<int>(data.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(hash_combine(cfg.seed, 0x5B117ULL));
  fisher_yates(order, split_rng);
  int held = std::clamp(static_cast<int>(std::floor(cfg.heldout_fraction * n)), 0, n - 1);
  std::vector<int> held_idx(order.begin(), order.begin() + held);
  std::vector<int> train_idx(order.begin() + held, order.end());
  // With no held-out split the accuracy column falls back to the training
  // examples themselves.
  const std::vector<int>& eval_idx = held_idx.empty() ? train_idx : held_idx;

  Layout L(net.config());
  std::vector<double> grad(L.total), m(L.total, 0.0), v(L.total, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int64_t updates = 0;

  TrainReport report;
  std::vector<double> last_good = net.parameters();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(hash_combine(cfg.seed, static_cast<uint64_t>(epoch)));
    fisher_yates(train_idx, epoch_rng);

    double loss_sum = 0.0;
    int64_t decisions = 0;
    bool finite = true;
    for (size_t at = 0; at < train_idx.size(); at += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(train_idx.size(), at + static_cast<size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      int64_t batch_decisions = 0;
      for (size_t k = at; k < end; ++k) {
        const TrainExample& ex = data[static_cast<size_t>(train_idx[k])];
        batch_loss += net.nll_grad(ex, grad);
        batch_decisions += static_cast<int64_t>(ex.steps.size());
      }
      if (!std::isfinite(batch_loss)) {
        finite = false;
        break;
      }
      double inv = 1.0 / static_cast<double>(end - at);
      double norm_sq = 0.0;
      for (double& gv : grad) {
        gv *= inv;
        norm_sq += gv * gv;
      }
      double norm = std::sqrt(norm_sq);
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
        double scale = cfg.clip_norm / norm;
        for (double& gv : grad) gv *= scale;
      }
      ++updates;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(updates));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(updates));
      std::vector<double>& theta = net.parameters();
      for (size_t i = 0; i < L.total; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam_eps);
      }
      loss_sum += batch_loss;
      decisions += batch_decisions;
    }

    if (finite)
      for (double p : net.parameters())
        if (!std::isfinite(p)) {
          finite = false;
          break;
        }
    if (!finite) {
      net.parameters() = last_good;
      report.diverged = true;
      if (log) *log << "epoch " << epoch << " diverged; restored last finite parameters\n";
      break;
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_nll = decisions ? loss_sum / static_cast<double>(decisions) : 0.0;
    st.heldout_accuracy = heldout_accuracy(net, data, eval_idx);
    report.epochs.push_back(st);
    last_good = net.parameters();
    if (log) {
      char line[128];
      std::snprintf(line, sizeof line, "epoch %d train_nll %.6f heldout_acc %.6f\n", st.epoch,
                    st.train_nll, st.heldout_accuracy);
      *log << line << std::flush;
    }
  }
  return report;
}

Trajectory decode_pair(const PolicyNet& net, const Predictor& predictor,
                       const CorpusEntry& entry, const DecodeConfig& cfg) {
  const auto& src = entry.pair.source.tokens;
  if (src.empty()) throw ContractError("cannot decode an empty source");
  const int src_len = static_cast<int>(src.size());
  const int max_len = cfg.max_target_len > 0 ? cfg.max_target_len : 2 * src_len + 5;

  SentenceContext ctx;
  ctx.pair_id = entry.pair.id;
  ctx.source = src;
  ctx.variant = entry.variant;
  ctx.reveal_dependency = false;

  Trajectory traj;
  PolicyNet::State state = net.initial_state();
  int id_s = 1;  // forced initial READ
  traj.actions.actions.push_back(Action::READ);
  traj.probs.push_back({1.0, 0.0});
  Action prev = Action::READ;

  while (true) {
    if (static_cast<int>(traj.output.size()) >= max_len) {
      traj.hit_cap = true;
      break;
    }
    Prediction pred = predictor.predict(ctx, std::span<const TokenId>(src.data(), static_cast<size_t>(id_s)),
                                        traj.output);
    std::array<double, 2> p = net.step(state, pred.features, prev);
    bool read = id_s < src_len && p[0] > cfg.rho;
    if (read) {
      traj.actions.actions.push_back(Action::READ);
      traj.probs.push_back(p);
      ++id_s;
      prev = Action::READ;
    } else {
      TokenId top = pred.top1();
      if (top == kEosId) break;  // end of sentence; no action recorded
      traj.actions.actions.push_back(Action::WRITE);
      traj.probs.push_back(p);
      traj.output.push_back(top);
      prev = Action::WRITE;
    }
  }

  if (!traj.output.empty())
    traj.latency = latency_report(traj.actions, src_len, static_cast<int>(traj.output.size()));
  return traj;
}

std::vector<Trajectory> decode_corpus(const PolicyNet& net, const Predictor& predictor,
                                      const std::vector<CorpusEntry>& corpus,
                                      const DecodeConfig& cfg, int workers) {
  if (workers < 1) throw ContractError("workers must be >= 1");
  const int n = static_cast<int>(corpus.size());
  std::vector<Trajectory> out(static_cast<size_t>(n));
  workers = std::min(workers, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = decode_pair(net, predictor, corpus[static_cast<size_t>(i)], cfg);
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
          out[static_cast<size_t>(i)] = decode_pair(net, *handles[static_cast<size_t>(w)], corpus[static_cast<size_t>(i)], cfg);
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

}  // namespace simt
