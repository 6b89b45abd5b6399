#include "simt/adapter.hpp"

#include <netdb.h>
#include <signal.h>
#include <string.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <limits>
#include <mutex>

#include <json.hpp>

#include "simt/errors.hpp"

namespace simt {

namespace {

using nlohmann::json;

std::string errno_text() { return std::string(strerror(errno)); }

void ignore_sigpipe() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

// Shared line framing over a pair of file descriptors.
class FdTransport : public Transport {
 public:
  std::string round_trip(const std::string& line) override {
    std::string out = line;
    out.push_back('\n');
    size_t sent = 0;
    while (sent < out.size()) {
      ssize_t n = is_socket_ ? ::send(write_fd_, out.data() + sent, out.size() - sent,
                                      MSG_NOSIGNAL)
                             : ::write(write_fd_, out.data() + sent, out.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("write to model failed: " + errno_text());
      }
      sent += static_cast<size_t>(n);
    }
    return read_line();
  }

 protected:
  std::string read_line() {
    for (;;) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("read from model failed: " + errno_text());
      }
      if (n == 0) throw TransportError("model connection closed");
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  int read_fd_ = -1;
  int write_fd_ = -1;
  bool is_socket_ = false;

 private:
  std::string buffer_;
};

class ExecTransport : public FdTransport {
 public:
  explicit ExecTransport(std::string command) : command_(std::move(command)) {
    ignore_sigpipe();
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw TransportError("pipe failed: " + errno_text());
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw TransportError("pipe failed: " + errno_text());
    }
    pid_ = ::fork();
    if (pid_ < 0) throw TransportError("fork failed: " + errno_text());
    if (pid_ == 0) {
      ::dup2(to_child[0], 0);
      ::dup2(from_child[1], 1);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ~ExecTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      // Closing stdin asks the server to exit; escalate if it lingers.
      for (int i = 0; i < 20; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
        ::usleep(50 * 1000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  std::unique_ptr<Transport> clone() const override {
    return std::make_unique<ExecTransport>(command_);
  }

 private:
  std::string command_;
  pid_t pid_ = -1;
};

class TcpTransport : public FdTransport {
 public:
  TcpTransport(std::string host, int port) : host_(std::move(host)), port_(port) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res);
    if (rc != 0)
      throw TransportError("cannot resolve " + host_ + ": " + gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
      throw TransportError("cannot connect to " + host_ + ":" + std::to_string(port_) +
                           ": " + errno_text());
    read_fd_ = write_fd_ = fd;
    is_socket_ = true;
  }

  ~TcpTransport() override {
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  std::unique_ptr<Transport> clone() const override {
    return std::make_unique<TcpTransport>(host_, port_);
  }

 private:
  std::string host_;
  int port_;
};

json parse_reply(const std::string& line) {
  json reply = json::parse(line, nullptr, false);
  if (reply.is_discarded()) throw ProtocolError("model sent malformed JSON: " + line);
  return reply;
}

}  // namespace

std::unique_ptr<Transport> make_exec_transport(const std::string& command) {
  return std::make_unique<ExecTransport>(command);
}

std::unique_ptr<Transport> make_tcp_transport(const std::string& host, int port) {
  return std::make_unique<TcpTransport>(host, port);
}

AdapterPredictor::AdapterPredictor(std::unique_ptr<Transport> transport)
    : transport_(std::move(transport)) {
  json reply = parse_reply(transport_->round_trip(R"({"op":"hello","version":1})"));
  if (!reply.contains("vocab_size") || !reply["vocab_size"].is_number_integer() ||
      !reply.contains("feature_dim") || !reply["feature_dim"].is_number_integer())
    throw ProtocolError("handshake must declare integer vocab_size and feature_dim");
  info_.vocab_size = reply["vocab_size"].get<int>();
  info_.feature_dim = reply["feature_dim"].get<int>();
  info_.name = "adapter";
  if (info_.vocab_size < 2 || info_.feature_dim < 1)
    throw ProtocolError("handshake declared unusable dimensions");
}

PredictorInfo AdapterPredictor::info() const { return info_; }

Prediction AdapterPredictor::query(const SentenceContext& ctx,
                                   std::span<const TokenId> src_prefix,
                                   std::span<const TokenId> tgt_prefix, const TokenId* gold,
                                   int* gold_rank) const {
  (void)ctx;  // the protocol is stateless per request
  if (src_prefix.empty()) throw ContractError("source prefix must be non-empty");
  json request = {{"op", "predict"},
                  {"src", std::vector<TokenId>(src_prefix.begin(), src_prefix.end())},
                  {"tgt", std::vector<TokenId>(tgt_prefix.begin(), tgt_prefix.end())}};
  if (gold) request["gold"] = *gold;
  json reply = parse_reply(transport_->round_trip(request.dump()));

  if (!reply.contains("topk") || !reply["topk"].is_array() || reply["topk"].empty())
    throw ProtocolError("response needs a non-empty topk list");
  if (!reply.contains("features") || !reply["features"].is_array())
    throw ProtocolError("response needs a features list");

  Prediction pred;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& item : reply["topk"]) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number_integer() ||
        !item[1].is_number())
      throw ProtocolError("topk entries must be [token id, log prob] pairs");
    TokenId id = item[0].get<TokenId>();
    double logp = item[1].get<double>();
    if (id < 0 || id >= info_.vocab_size)
      throw ProtocolError("topk token id " + std::to_string(id) + " out of range");
    if (logp > prev + 1e-12) throw ProtocolError("topk is not sorted by log prob");
    prev = logp;
    pred.ranked.emplace_back(id, logp);
  }
  for (const auto& v : reply["features"]) {
    if (!v.is_number()) throw ProtocolError("features must be numbers");
    pred.features.values.push_back(v.get<double>());
  }
  if (pred.features.dim() != info_.feature_dim)
    throw ProtocolError("features have dim " + std::to_string(pred.features.dim()) +
                        ", handshake declared " + std::to_string(info_.feature_dim));

  if (gold_rank) {
    *gold_rank = 0;
    if (reply.contains("gold_rank")) {
      if (!reply["gold_rank"].is_number_integer())
        throw ProtocolError("gold_rank must be an integer");
      int r = reply["gold_rank"].get<int>();
      if (r < 1 || r > info_.vocab_size) throw ProtocolError("gold_rank out of range");
      *gold_rank = r;
    }
  }
  return pred;
}

Prediction AdapterPredictor::predict(const SentenceContext& ctx,
                                     std::span<const TokenId> src_prefix,
                                     std::span<const TokenId> tgt_prefix) const {
  return query(ctx, src_prefix, tgt_prefix, nullptr, nullptr);
}

int AdapterPredictor::rank_of(TokenId gold, const SentenceContext& ctx,
                              std::span<const TokenId> src_prefix,
                              std::span<const TokenId> tgt_prefix) const {
  int rank = 0;
  Prediction pred = query(ctx, src_prefix, tgt_prefix, &gold, &rank);
  if (rank > 0) return rank;
  for (size_t k = 0; k < pred.ranked.size(); ++k)
    if (pred.ranked[k].first == gold) return static_cast<int>(k) + 1;
  throw ProtocolError("response carries neither gold_rank nor the gold token in topk");
}

std::unique_ptr<Predictor> AdapterPredictor::fork_worker() const {
  return std::make_unique<AdapterPredictor>(transport_->clone());
}

}  // namespace simt
