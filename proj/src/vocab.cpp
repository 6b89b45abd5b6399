#include "simt/vocab.hpp"

#include <fstream>
#include <sstream>

#include "simt/errors.hpp"

namespace simt {

Vocab::Vocab() {
  tokens_ = {"<unk>", "<eos>"};
  index_ = {{"<unk>", kUnkId}, {"<eos>", kEosId}};
}

TokenId Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  TokenId id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

TokenId Vocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(TokenId id) const {
  if (id < 0 || id >= size()) throw ContractError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write vocab file " + path);
  for (size_t i = kNumReservedIds; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read vocab file " + path);
  Vocab v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError("empty vocab line", line_no);
    if (v.contains(line)) throw ParseError("duplicate vocab token '" + line + "'", line_no);
    v.add(line);
  }
  return v;
}

Vocab Vocab::build_from_files(const std::vector<std::string>& paths) {
  Vocab v;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot read " + path);
    std::string line, tok;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      while (ss >> tok) v.add(tok);
    }
  }
  return v;
}

Vocab Vocab::numeric(int vocab_size) {
  if (vocab_size < kNumReservedIds + 1) throw ContractError("numeric vocab too small");
  Vocab v;
  for (int id = kNumReservedIds; id < vocab_size; ++id) v.add(std::to_string(id));
  return v;
}

}  // namespace simt
