// Deterministic line-JSON prediction server for exercising the adapter
// transports. Predictions depend only on the request prefixes, so any
// number of concurrent clients see the same model.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

using nlohmann::json;

namespace {

struct Options {
  int vocab_size = 16;
  int feature_dim = 4;
  int tcp_port = -1;  // -1: stdio mode
  std::string bad;    // "", "hello", "json", "unsorted", "shortfeat", "close"
};

struct FdIo {
  int in_fd;
  int out_fd;
  std::string buf;

  bool read_line(std::string& line) {
    for (;;) {
      auto pos = buf.find('\n');
      if (pos != std::string::npos) {
        line = buf.substr(0, pos);
        buf.erase(0, pos + 1);
        return true;
      }
      char tmp[4096];
      ssize_t n = ::read(in_fd, tmp, sizeof tmp);
      if (n <= 0) return false;
      buf.append(tmp, static_cast<size_t>(n));
    }
  }

  bool write_line(const std::string& s) {
    std::string out = s + "\n";
    size_t done = 0;
    while (done < out.size()) {
      ssize_t n = ::write(out_fd, out.data() + done, out.size() - done);
      if (n <= 0) return false;
      done += static_cast<size_t>(n);
    }
    return true;
  }
};

json make_prediction(const Options& opt, const std::vector<int>& src,
                     const std::vector<int>& tgt, bool has_gold, int gold) {
  const int V = opt.vocab_size;
  int top = src.empty() ? 2 : src.back();
  if (top < 0 || top >= V) top = top < 0 ? 0 : V - 1;

  // top-1 holds 0.4; everyone else shares 0.6 on a linearly decaying
  // profile in ascending id order, which keeps the list strictly sorted.
  std::vector<std::pair<int, double>> ranked;
  ranked.reserve(static_cast<size_t>(V));
  ranked.emplace_back(top, 0.4);
  double denom = static_cast<double>(V) * (V - 1) / 2.0;
  int k = 0;
  for (int id = 0; id < V; ++id) {
    if (id == top) continue;
    double share = 0.6 * static_cast<double>(V - 1 - k) / denom;
    ranked.emplace_back(id, share);
    ++k;
  }

  int gold_rank = V;
  if (has_gold) {
    for (size_t i = 0; i < ranked.size(); ++i) {
      if (ranked[i].first == gold) {
        gold_rank = static_cast<int>(i) + 1;
        break;
      }
    }
  }

  size_t keep = has_gold ? std::min<size_t>(3, ranked.size()) : ranked.size();
  json topk = json::array();
  for (size_t i = 0; i < keep; ++i)
    topk.push_back(json::array({ranked[i].first, std::log(ranked[i].second)}));
  if (opt.bad == "unsorted" && topk.size() >= 2) std::swap(topk[0][1], topk[1][1]);

  int fdim = opt.feature_dim;
  if (opt.bad == "shortfeat" && fdim > 1) fdim -= 1;
  json features = json::array();
  double i_pos = static_cast<double>(src.size());
  double j_pos = static_cast<double>(tgt.size());
  for (int d = 0; d < fdim; ++d) {
    double v = d == 0 ? i_pos : d == 1 ? j_pos : d == 2 ? i_pos + j_pos : 1.0;
    features.push_back(v);
  }

  json reply = {{"topk", topk}, {"features", features}};
  if (has_gold) reply["gold_rank"] = gold_rank;
  return reply;
}

void serve(FdIo io, const Options& opt) {
  std::string line;
  while (io.read_line(line)) {
    if (line.empty()) continue;
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      if (!io.write_line(R"({"error":"bad request"})")) return;
      continue;
    }
    std::string op = req.value("op", "");
    if (op == "hello") {
      if (opt.bad == "close") return;
      if (opt.bad == "hello") {
        if (!io.write_line(json{{"feature_dim", opt.feature_dim}}.dump())) return;
      } else if (opt.bad == "json") {
        if (!io.write_line("this is not json")) return;
      } else {
        json reply = {{"vocab_size", opt.vocab_size}, {"feature_dim", opt.feature_dim}};
        if (!io.write_line(reply.dump())) return;
      }
      continue;
    }
    if (op == "predict") {
      std::vector<int> src, tgt;
      if (req.contains("src")) src = req["src"].get<std::vector<int>>();
      if (req.contains("tgt")) tgt = req["tgt"].get<std::vector<int>>();
      bool has_gold = req.contains("gold");
      int gold = has_gold ? req["gold"].get<int>() : -1;
      if (!io.write_line(make_prediction(opt, src, tgt, has_gold, gold).dump())) return;
      continue;
    }
    if (!io.write_line(R"({"error":"unknown op"})")) return;
  }
}

int serve_tcp(const Options& opt) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) {
    std::perror("socket");
    return 1;
  }
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(opt.tcp_port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    std::perror("bind");
    return 1;
  }
  if (::listen(listener, 16) < 0) {
    std::perror("listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  std::cout << "PORT " << ntohs(addr.sin_port) << std::endl;

  for (;;) {
    int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) continue;
    std::thread([conn, opt] {
      serve(FdIo{conn, conn, {}}, opt);
      ::close(conn);
    }).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << arg << " needs a value\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--tcp") {
      opt.tcp_port = std::stoi(next());
    } else if (arg == "--vocab") {
      opt.vocab_size = std::stoi(next());
    } else if (arg == "--feat") {
      opt.feature_dim = std::stoi(next());
    } else if (arg == "--bad") {
      opt.bad = next();
    } else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 2;
    }
  }
  if (opt.vocab_size < 2 || opt.feature_dim < 1) {
    std::cerr << "need --vocab >= 2 and --feat >= 1\n";
    return 2;
  }
  if (opt.tcp_port >= 0) return serve_tcp(opt);
  serve(FdIo{0, 1, {}}, opt);
  return 0;
}
