#include "simt/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "simt/adapter.hpp"
#include "simt/errors.hpp"
#include "simt/toy_predictor.hpp"

namespace simt {

double Prediction::top1_prob() const { return std::exp(ranked.front().second); }

int Predictor::rank_of(TokenId gold, const SentenceContext& ctx,
                       std::span<const TokenId> src_prefix,
                       std::span<const TokenId> tgt_prefix) const {
  Prediction p = predict(ctx, src_prefix, tgt_prefix);
  for (size_t k = 0; k < p.ranked.size(); ++k)
    if (p.ranked[k].first == gold) return static_cast<int>(k) + 1;
  throw ContractError("token " + std::to_string(gold) + " missing from the prediction");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(s);
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

double parse_num(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + value + "' for model option " + key);
  }
}

std::unique_ptr<Predictor> make_toy(const std::vector<std::string>& parts, int vocab_size,
                                    int rank_floor) {
  if (parts.size() < 2) throw ConfigError("toy model spec needs a variant");
  Variant variant = Variant::kNone;
  if (parts[1] != "auto") {
    try {
      variant = parse_variant(parts[1]);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  ToyNoise noise;
  // Seeded from the caller's rank threshold, which may exceed a small toy
  // vocabulary; clamp it into range. An explicit rankfloor= option below
  // still validates strictly.
  noise.rank_floor = std::clamp(rank_floor, 1, vocab_size - 1);
  double eps = 0.05;
  for (size_t i = 2; i < parts.size(); ++i) {
    auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw ConfigError("bad model option '" + parts[i] + "'");
    std::string key = parts[i].substr(0, eq), value = parts[i].substr(eq + 1);
    if (key == "noise") {
      noise.inflate_p = parse_num(key, value);
    } else if (key == "stallq") {
      noise.stall_q = parse_num(key, value);
    } else if (key == "dip") {
      noise.dip_p = parse_num(key, value);
    } else if (key == "seed") {
      noise.seed = static_cast<uint64_t>(parse_num(key, value));
    } else if (key == "eps") {
      eps = parse_num(key, value);
    } else if (key == "rankfloor") {
      noise.rank_floor = static_cast<int>(parse_num(key, value));
    } else {
      throw ConfigError("unknown model option '" + key + "'");
    }
  }
  try {
    return std::make_unique<ToyPredictor>(vocab_size, variant, noise, eps);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::unique_ptr<Predictor> make_predictor(const std::string& model_spec, int vocab_size,
                                          int toy_rank_floor) {
  if (model_spec.rfind("toy", 0) == 0)
    return make_toy(split(model_spec, ':'), vocab_size, toy_rank_floor);
  if (model_spec.rfind("adapter:exec:", 0) == 0) {
    std::string command = model_spec.substr(std::string("adapter:exec:").size());
    if (command.empty()) throw ConfigError("adapter:exec needs a command");
    return std::make_unique<AdapterPredictor>(make_exec_transport(command));
  }
  if (model_spec.rfind("adapter:tcp:", 0) == 0) {
    std::string address = model_spec.substr(std::string("adapter:tcp:").size());
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
      throw ConfigError("adapter:tcp needs host:port");
    int port = static_cast<int>(parse_num("port", address.substr(colon + 1)));
    return std::make_unique<AdapterPredictor>(
        make_tcp_transport(address.substr(0, colon), port));
  }
  throw ConfigError("unknown model spec '" + model_spec + "'");
}

}  // namespace simt
