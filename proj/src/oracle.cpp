#include "simt/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "simt/errors.hpp"

namespace simt {

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "ok";
    case RejectReason::kEarlyFinish: return "early_finish";
    case RejectReason::kAlExceeded: return "al_exceeded";
    case RejectReason::kError: return "error";
  }
  throw ContractError("unknown rejection reason");
}

ActionSequence generate_sequence(const Predictor& predictor, const CorpusEntry& entry,
                                 const OracleConfig& cfg) {
  if (cfg.rank_threshold < 1) throw ContractError("rank threshold must be >= 1");
  const auto& src = entry.pair.source.tokens;
  const auto& tgt = entry.pair.target.tokens;
  if (src.empty() || tgt.empty()) throw ContractError("oracle needs a non-empty pair");

  SentenceContext ctx;
  ctx.pair_id = entry.pair.id;
  ctx.source = src;
  ctx.variant = entry.variant;

  const int src_len = static_cast<int>(src.size());
  const int tgt_len = static_cast<int>(tgt.size());
  ActionSequence seq;
  seq.actions.push_back(Action::READ);
  int id_s = 1;
  int id_t = 1;
  while (id_t <= tgt_len) {
    std::span<const TokenId> src_prefix(src.data(), static_cast<size_t>(id_s));
    std::span<const TokenId> tgt_prefix(tgt.data(), static_cast<size_t>(id_t - 1));
    int rank = predictor.rank_of(tgt[static_cast<size_t>(id_t - 1)], ctx, src_prefix, tgt_prefix);
    if (rank <= cfg.rank_threshold || id_s == src_len) {
      seq.actions.push_back(Action::WRITE);
      ++id_t;
    } else {
      seq.actions.push_back(Action::READ);
      ++id_s;
    }
  }
  return seq;
}

OracleRecord apply_filters(int64_t pair_id, ActionSequence actions, int src_len, int tgt_len,
                           const OracleConfig& cfg) {
  OracleRecord rec;
  rec.pair_id = pair_id;
  rec.latency = latency_report(actions, src_len, tgt_len);
  rec.actions = std::move(actions);

  // All |s| reads must precede the final WRITE.
  int reads_before_last_write = 0;
  int reads = 0;
  for (Action a : rec.actions.actions) {
    if (a == Action::READ) {
      ++reads;
    } else {
      reads_before_last_write = reads;
    }
  }
  if (reads_before_last_write < src_len) {
    rec.kept = false;
    rec.reason = RejectReason::kEarlyFinish;
  } else if (rec.latency.al > cfg.al_cap) {
    rec.kept = false;
    rec.reason = RejectReason::kAlExceeded;
  } else {
    rec.kept = true;
    rec.reason = RejectReason::kNone;
  }
  return rec;
}

namespace {

OracleRecord process_entry(const Predictor& predictor, const CorpusEntry& entry,
                           const OracleConfig& cfg) {
  try {
    ActionSequence seq = generate_sequence(predictor, entry, cfg);
    return apply_filters(entry.pair.id, std::move(seq), entry.pair.source.length(),
                         entry.pair.target.length(), cfg);
  } catch (const Error& e) {
    OracleRecord rec;
    rec.pair_id = entry.pair.id;
    rec.kept = false;
    rec.reason = RejectReason::kError;
    rec.error = e.what();
    return rec;
  }
}

}  // namespace

std::vector<OracleRecord> generate_corpus(const Predictor& predictor,
                                          const std::vector<CorpusEntry>& corpus,
                                          const OracleConfig& cfg, int workers,
                                          OracleStats* stats) {
  if (workers < 1) throw ContractError("workers must be >= 1");
  const int n = static_cast<int>(corpus.size());
  std::vector<OracleRecord> records(static_cast<size_t>(n));
  workers = std::min(workers, std::max(1, n));

  if (workers == 1) {
    for (int i = 0; i < n; ++i) records[static_cast<size_t>(i)] = process_entry(predictor, corpus[static_cast<size_t>(i)], cfg);
  } else {
    // Contiguous shards; every worker gets its own predictor handle and
    // writes results by index, so output never depends on the worker count.
    std::vector<std::unique_ptr<Predictor>> handles;
    handles.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) handles.push_back(predictor.fork_worker());
    std::vector<std::thread> threads;
    int base = n / workers, rem = n % workers;
    int begin = 0;
    for (int w = 0; w < workers; ++w) {
      int count = base + (w < rem ? 1 : 0);
      int end = begin + count;
      threads.emplace_back([&, begin, end, w] {
        for (int i = begin; i < end; ++i)
          records[static_cast<size_t>(i)] = process_entry(*handles[static_cast<size_t>(w)], corpus[static_cast<size_t>(i)], cfg);
      });
      begin = end;
    }
    for (auto& t : threads) t.join();
  }

  if (stats) *stats = summarize(records);
  return records;
}

OracleStats summarize(const std::vector<OracleRecord>& records) {
  OracleStats s;
  s.total = static_cast<int64_t>(records.size());
  double al_sum = 0.0;
  for (const auto& r : records) {
    switch (r.reason) {
      case RejectReason::kNone:
        ++s.kept;
        al_sum += r.latency.al;
        break;
      case RejectReason::kEarlyFinish: ++s.early_finish; break;
      case RejectReason::kAlExceeded: ++s.al_exceeded; break;
      case RejectReason::kError: ++s.errors; break;
    }
  }
  s.mean_al_kept = s.kept ? al_sum / static_cast<double>(s.kept) : 0.0;
  return s;
}

void save_oracle_records(const std::string& path, const std::vector<OracleRecord>& records) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write oracle record file " + path);
  for (const auto& r : records)
    out << r.pair_id << '\t' << r.actions.str() << '\t' << reject_reason_name(r.reason) << '\n';
}

std::vector<OracleRecord> load_oracle_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read oracle record file " + path);
  std::vector<OracleRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id_str, actions_str, status_str;
    if (!std::getline(ss, id_str, '\t') || !std::getline(ss, actions_str, '\t') ||
        !std::getline(ss, status_str, '\t'))
      throw ParseError("oracle record needs id, actions and status", line_no);
    OracleRecord rec;
    try {
      rec.pair_id = std::stoll(id_str);
    } catch (const std::exception&) {
      throw ParseError("bad pair id '" + id_str + "'", line_no);
    }
    rec.actions = ActionSequence::parse(actions_str, line_no);
    if (status_str == "ok") {
      rec.reason = RejectReason::kNone;
      rec.kept = true;
    } else if (status_str == "early_finish") {
      rec.reason = RejectReason::kEarlyFinish;
    } else if (status_str == "al_exceeded") {
      rec.reason = RejectReason::kAlExceeded;
    } else if (status_str == "error") {
      rec.reason = RejectReason::kError;
    } else {
      throw ParseError("unknown status '" + status_str + "'", line_no);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace simt
