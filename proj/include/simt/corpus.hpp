#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simt/types.hpp"
#include "simt/vocab.hpp"

namespace simt {

// One synthetic language: a transform family, a vocabulary size, a length
// range and a seed. Lengths are rounded to even for swap2.
struct SyntheticLanguageSpec {
  Variant variant = Variant::kCopy;
  int vocab_size = 32;  // >= 4
  int min_len = 4;
  int max_len = 10;
  uint64_t seed = 1;
};

// A corpus made of several variants mixed by weight. Single-variant corpora
// are the one-entry case.
struct MixedCorpusSpec {
  std::vector<std::pair<Variant, double>> mix = {{Variant::kCopy, 1.0}};
  int vocab_size = 32;
  int min_len = 4;
  int max_len = 10;
  uint64_t seed = 1;
};

// The unit every stage consumes: the pair plus, when known, which transform
// produced it and its per-position dependency lags d(j).
struct CorpusEntry {
  SentencePair pair;
  Variant variant = Variant::kNone;
  std::vector<int> lags;  // empty for plain text corpora
};

// Transform + lags for one drawn source sentence.
Sentence apply_variant(Variant v, const Sentence& source);
std::vector<int> variant_lags(Variant v, int src_len);

// Deterministic synthetic generation; a pure function of (spec, n).
std::vector<CorpusEntry> gen_synthetic(const SyntheticLanguageSpec& spec, int n);
std::vector<CorpusEntry> gen_synthetic(const MixedCorpusSpec& spec, int n);

// Parallel text files, one whitespace-tokenized sentence per line. Appends
// EOS to every source sentence; unknown tokens map to UNK. max_len = 0
// disables the length filter (counted on tokens as loaded, before EOS).
std::vector<CorpusEntry> load_parallel(const std::string& source_path,
                                       const std::string& target_path,
                                       const Vocab& vocab, int max_len = 0);

// Source side alone (for decoding without references). Same tokenization
// and EOS convention as load_parallel; targets stay empty.
std::vector<CorpusEntry> load_sources(const std::string& source_path, const Vocab& vocab);

// Writers for the plain-text corpus formats.
void save_parallel(const std::vector<CorpusEntry>& entries, const Vocab& vocab,
                   const std::string& source_path, const std::string& target_path);

// Per-pair metadata sidecar: `<pair id>\t<variant>\t<comma-joined lags>`.
void save_meta(const std::vector<CorpusEntry>& entries, const std::string& path);
void load_meta(std::vector<CorpusEntry>& entries, const std::string& path);

// Action sequence TSV: one record per line, `<pair id>\t<string over {R,W}>`.
void write_actions(const std::string& path,
                   const std::vector<std::pair<int, ActionSequence>>& sequences);
std::vector<std::pair<int, ActionSequence>> read_actions(const std::string& path);

}  // namespace simt
