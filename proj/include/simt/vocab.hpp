#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "simt/types.hpp"

namespace simt {

// Token <-> id mapping. Ids 0 and 1 are reserved for UNK and EOS; the
// sidecar file stores one surface token per line, line number = id minus
// the reserved offset.
class Vocab {
 public:
  Vocab();

  // Adds a token if absent, returns its id either way.
  TokenId add(const std::string& token);

  // Lookup with UNK fallback.
  TokenId id_of(const std::string& token) const;

  const std::string& token_of(TokenId id) const;

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  int size() const { return static_cast<int>(tokens_.size()); }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Collects tokens from whitespace-tokenized text files in file order.
  static Vocab build_from_files(const std::vector<std::string>& paths);

  // Vocabulary whose surface tokens are the decimal strings of their own
  // ids; used for synthetic corpora so files round-trip as plain numbers.
  static Vocab numeric(int vocab_size);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace simt
