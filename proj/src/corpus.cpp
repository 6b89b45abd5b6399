#include "simt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "simt/errors.hpp"
#include "simt/rng.hpp"

namespace simt {

Sentence apply_variant(Variant v, const Sentence& source) {
  const auto& s = source.tokens;
  int n = source.length();
  Sentence t;
  t.tokens.reserve(s.size());
  switch (v) {
    case Variant::kCopy:
      t.tokens = s;
      return t;
    case Variant::kSwap2:
      if (n % 2 != 0) throw ContractError("swap2 needs an even sentence length");
      for (int m = 0; m < n; m += 2) {
        t.tokens.push_back(s[m + 1]);
        t.tokens.push_back(s[m]);
      }
      return t;
    case Variant::kRotate1:
      t.tokens.push_back(s[n - 1]);
      t.tokens.insert(t.tokens.end(), s.begin(), s.end() - 1);
      return t;
    case Variant::kNone:
      break;
  }
  throw ContractError("no transform defined for variant 'none'");
}

std::vector<int> variant_lags(Variant v, int src_len) {
  std::vector<int> d(static_cast<size_t>(src_len));
  switch (v) {
    case Variant::kCopy:
      for (int j = 1; j <= src_len; ++j) d[j - 1] = j;
      return d;
    case Variant::kSwap2:
      if (src_len % 2 != 0) throw ContractError("swap2 needs an even sentence length");
      for (int j = 1; j <= src_len; ++j) d[j - 1] = ((j + 1) / 2) * 2;
      return d;
    case Variant::kRotate1:
      d[0] = src_len;
      for (int j = 2; j <= src_len; ++j) d[j - 1] = j - 1;
      return d;
    case Variant::kNone:
      break;
  }
  throw ContractError("no lags defined for variant 'none'");
}

namespace {

void check_lengths(int min_len, int max_len, int vocab_size) {
  if (vocab_size < 4) throw ContractError("synthetic vocab size must be >= 4");
  if (min_len < 1 || max_len < min_len) throw ContractError("bad synthetic length range");
}

int draw_length(Rng& rng, Variant v, int min_len, int max_len) {
  int len = static_cast<int>(rng.next_int(min_len, max_len));
  if (v == Variant::kSwap2 && len % 2 != 0) {
    len = (len + 1 <= max_len) ? len + 1 : len - 1;
    if (len < 2 || len % 2 != 0) throw ContractError("swap2 length range allows no even length");
  }
  return len;
}

CorpusEntry draw_entry(Rng& rng, Variant v, int vocab_size, int min_len, int max_len, int id) {
  int len = draw_length(rng, v, min_len, max_len);
  Sentence src;
  src.tokens.reserve(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i)
    src.tokens.push_back(static_cast<TokenId>(rng.next_int(kNumReservedIds, vocab_size - 1)));
  CorpusEntry e;
  e.pair = SentencePair{src, apply_variant(v, src), id};
  e.variant = v;
  e.lags = variant_lags(v, len);
  return e;
}

}  // namespace

std::vector<CorpusEntry> gen_synthetic(const SyntheticLanguageSpec& spec, int n) {
  if (n < 1) throw ContractError("corpus size must be >= 1");
  check_lengths(spec.min_len, spec.max_len, spec.vocab_size);
  Rng rng(spec.seed);
  std::vector<CorpusEntry> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(draw_entry(rng, spec.variant, spec.vocab_size, spec.min_len, spec.max_len, i));
  return out;
}

std::vector<CorpusEntry> gen_synthetic(const MixedCorpusSpec& spec, int n) {
  if (n < 1) throw ContractError("corpus size must be >= 1");
  check_lengths(spec.min_len, spec.max_len, spec.vocab_size);
  if (spec.mix.empty()) throw ContractError("empty variant mix");
  double total = 0.0;
  for (const auto& [v, w] : spec.mix) {
    if (w <= 0.0) throw ContractError("mix weight for " + variant_name(v) + " must be positive");
    total += w;
  }
  Rng rng(spec.seed);
  std::vector<CorpusEntry> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double roll = rng.next_double() * total;
    Variant v = spec.mix.back().first;
    for (const auto& [cand, w] : spec.mix) {
      if (roll < w) {
        v = cand;
        break;
      }
      roll -= w;
    }
    out.push_back(draw_entry(rng, v, spec.vocab_size, spec.min_len, spec.max_len, i));
  }
  return out;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

std::vector<CorpusEntry> load_parallel(const std::string& source_path,
                                       const std::string& target_path, const Vocab& vocab,
                                       int max_len) {
  auto src_lines = read_lines(source_path);
  auto tgt_lines = read_lines(target_path);
  if (src_lines.size() != tgt_lines.size())
    throw CorpusError("line count mismatch: " + source_path + " has " +
                      std::to_string(src_lines.size()) + " lines, " + target_path + " has " +
                      std::to_string(tgt_lines.size()));

  auto tokenize = [&vocab](const std::string& line, int line_no) {
    Sentence s;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) s.tokens.push_back(vocab.id_of(tok));
    if (s.empty()) throw ParseError("empty sentence", line_no);
    return s;
  };

  std::vector<CorpusEntry> out;
  for (size_t i = 0; i < src_lines.size(); ++i) {
    int line_no = static_cast<int>(i) + 1;
    Sentence src = tokenize(src_lines[i], line_no);
    Sentence tgt = tokenize(tgt_lines[i], line_no);
    if (max_len > 0 && (src.length() > max_len || tgt.length() > max_len)) continue;
    src.tokens.push_back(kEosId);
    CorpusEntry e;
    e.pair = SentencePair{std::move(src), std::move(tgt), static_cast<int>(i)};
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<CorpusEntry> load_sources(const std::string& source_path, const Vocab& vocab) {
  auto src_lines = read_lines(source_path);
  std::vector<CorpusEntry> out;
  out.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    Sentence src;
    std::istringstream ss(src_lines[i]);
    std::string tok;
    while (ss >> tok) src.tokens.push_back(vocab.id_of(tok));
    if (src.empty()) throw ParseError("empty sentence", static_cast<int>(i) + 1);
    src.tokens.push_back(kEosId);
    CorpusEntry e;
    e.pair.source = std::move(src);
    e.pair.id = static_cast<int>(i);
    out.push_back(std::move(e));
  }
  return out;
}

void save_parallel(const std::vector<CorpusEntry>& entries, const Vocab& vocab,
                   const std::string& source_path, const std::string& target_path) {
  std::ofstream src_out(source_path), tgt_out(target_path);
  if (!src_out || !tgt_out) throw CorpusError("cannot write corpus files");
  auto write_sentence = [&vocab](std::ofstream& out, const std::vector<TokenId>& tokens,
                                 size_t count) {
    for (size_t i = 0; i < count; ++i) {
      if (i) out << ' ';
      out << vocab.token_of(tokens[i]);
    }
    out << '\n';
  };
  for (const auto& e : entries) {
    const auto& s = e.pair.source.tokens;
    // A trailing source EOS is a load-time artifact, not corpus content.
    size_t n = (!s.empty() && s.back() == kEosId) ? s.size() - 1 : s.size();
    write_sentence(src_out, s, n);
    write_sentence(tgt_out, e.pair.target.tokens, e.pair.target.tokens.size());
  }
}

void save_meta(const std::vector<CorpusEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write meta file " + path);
  for (const auto& e : entries) {
    out << e.pair.id << '\t' << variant_name(e.variant) << '\t';
    for (size_t j = 0; j < e.lags.size(); ++j) {
      if (j) out << ',';
      out << e.lags[j];
    }
    out << '\n';
  }
}

void load_meta(std::vector<CorpusEntry>& entries, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read meta file " + path);
  struct Meta {
    Variant variant;
    std::vector<int> lags;
  };
  std::unordered_map<int, Meta> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id_str, variant_str, lags_str;
    if (!std::getline(ss, id_str, '\t') || !std::getline(ss, variant_str, '\t'))
      throw ParseError("meta line needs id, variant and lags", line_no);
    std::getline(ss, lags_str, '\t');
    Meta m;
    m.variant = parse_variant(variant_str);
    std::istringstream ls(lags_str);
    std::string field;
    while (std::getline(ls, field, ',')) {
      try {
        m.lags.push_back(std::stoi(field));
      } catch (const std::exception&) {
        throw ParseError("bad lag value '" + field + "'", line_no);
      }
    }
    int id = 0;
    try {
      id = std::stoi(id_str);
    } catch (const std::exception&) {
      throw ParseError("bad pair id '" + id_str + "'", line_no);
    }
    by_id[id] = std::move(m);
  }
  for (auto& e : entries) {
    auto it = by_id.find(e.pair.id);
    if (it == by_id.end()) continue;
    if (!it->second.lags.empty() && !e.pair.target.tokens.empty() &&
        it->second.lags.size() != e.pair.target.tokens.size())
      throw CorpusError("meta lags for pair " + std::to_string(e.pair.id) +
                        " do not match the target length");
    e.variant = it->second.variant;
    e.lags = it->second.lags;
  }
}

void write_actions(const std::string& path,
                   const std::vector<std::pair<int, ActionSequence>>& sequences) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write action file " + path);
  for (const auto& [id, seq] : sequences) out << id << '\t' << seq.str() << '\n';
}

std::vector<std::pair<int, ActionSequence>> read_actions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read action file " + path);
  std::vector<std::pair<int, ActionSequence>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id_str, actions_str;
    if (!std::getline(ss, id_str, '\t') || !std::getline(ss, actions_str, '\t'))
      throw ParseError("action line needs id and action string", line_no);
    int id = 0;
    try {
      id = std::stoi(id_str);
    } catch (const std::exception&) {
      throw ParseError("bad pair id '" + id_str + "'", line_no);
    }
    out.emplace_back(id, ActionSequence::parse(actions_str, line_no));
  }
  return out;
}

}  // namespace simt
