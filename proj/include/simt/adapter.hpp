#pragma once

#include <memory>
#include <string>

#include "simt/predictor.hpp"

namespace simt {

// Line-delimited JSON client for out-of-process prediction backends.
//
// Handshake: on connect the adapter sends {"op":"hello","version":1} and
// expects {"vocab_size":V,"feature_dim":D}. Both must be positive; all later
// responses are validated against the declared dimensions.
//
// Per query it sends
//   {"op":"predict","src":[...],"tgt":[...]}        (plus "gold":id when known)
// and expects
//   {"topk":[[id,logp],...],"features":[...]}       (plus "gold_rank":r)
// topk must be non-empty and sorted by descending logp; features must have
// exactly feature_dim entries. Violations raise ProtocolError. Transport
// failures (EOF, broken pipe, connect refusal) raise TransportError.
class Transport {
 public:
  virtual ~Transport() = default;
  // Sends one line (newline appended) and reads one reply line.
  virtual std::string round_trip(const std::string& line) = 0;
  virtual std::unique_ptr<Transport> clone() const = 0;
};

// Spawns `command` via /bin/sh and speaks over its stdin/stdout.
std::unique_ptr<Transport> make_exec_transport(const std::string& command);
// Connects a TCP socket to host:port.
std::unique_ptr<Transport> make_tcp_transport(const std::string& host, int port);

class AdapterPredictor : public Predictor {
 public:
  // Performs the hello handshake eagerly; throws if it fails.
  explicit AdapterPredictor(std::unique_ptr<Transport> transport);

  PredictorInfo info() const override;
  Prediction predict(const SentenceContext& ctx, std::span<const TokenId> src_prefix,
                     std::span<const TokenId> tgt_prefix) const override;
  int rank_of(TokenId gold, const SentenceContext& ctx, std::span<const TokenId> src_prefix,
              std::span<const TokenId> tgt_prefix) const override;
  std::unique_ptr<Predictor> fork_worker() const override;

 private:
  Prediction query(const SentenceContext& ctx, std::span<const TokenId> src_prefix,
                   std::span<const TokenId> tgt_prefix, const TokenId* gold,
                   int* gold_rank) const;

  std::unique_ptr<Transport> transport_;
  PredictorInfo info_;
};

}  // namespace simt
