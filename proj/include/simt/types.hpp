#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simt/errors.hpp"

namespace simt {

using TokenId = int32_t;

// Reserved vocabulary slots. EOS is appended to every source sentence on
// load and counts as a readable source token.
inline constexpr TokenId kUnkId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr int kNumReservedIds = 2;

struct Sentence {
  std::vector<TokenId> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  bool empty() const { return tokens.empty(); }
};

struct SentencePair {
  Sentence source;
  Sentence target;
  int id = 0;
};

enum class Action : uint8_t { READ = 0, WRITE = 1 };

inline char action_char(Action a) { return a == Action::READ ? 'R' : 'W'; }

// An ordered READ/WRITE decision sequence for one sentence pair. Valid
// sequences begin with a READ and carry one WRITE per target token.
struct ActionSequence {
  std::vector<Action> actions;

  ActionSequence() = default;
  explicit ActionSequence(std::vector<Action> a) : actions(std::move(a)) {}

  int size() const { return static_cast<int>(actions.size()); }

  int read_count() const {
    int n = 0;
    for (Action a : actions) n += (a == Action::READ);
    return n;
  }

  int write_count() const {
    int n = 0;
    for (Action a : actions) n += (a == Action::WRITE);
    return n;
  }

  // First action is a READ whenever any WRITE exists.
  bool prefix_valid() const {
    for (Action a : actions) {
      if (a == Action::READ) return true;
      return false;
    }
    return true;
  }

  // Full validity against a sentence pair's dimensions.
  bool valid_for(int src_len, int tgt_len) const {
    return prefix_valid() && write_count() == tgt_len && read_count() <= src_len;
  }

  std::string str() const {
    std::string s;
    s.reserve(actions.size());
    for (Action a : actions) s.push_back(action_char(a));
    return s;
  }

  static ActionSequence parse(const std::string& s, int line = 0) {
    ActionSequence seq;
    seq.actions.reserve(s.size());
    for (char c : s) {
      if (c == 'R') {
        seq.actions.push_back(Action::READ);
      } else if (c == 'W') {
        seq.actions.push_back(Action::WRITE);
      } else {
        throw ParseError(std::string("invalid action character '") + c + "'", line);
      }
    }
    return seq;
  }

  bool operator==(const ActionSequence& o) const { return actions == o.actions; }
};

// Synthetic language variants. d(j) below is the minimal source prefix
// length that determines target token j.
enum class Variant : uint8_t {
  kNone = 0,   // plain text corpus, no known transform
  kCopy,       // target = source,                 d(j) = j
  kSwap2,      // adjacent pairs swapped,          d(2m-1) = d(2m) = 2m
  kRotate1,    // target = [s_n, s_1 .. s_{n-1}],  d(1) = n, d(j>1) = j-1
};

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

}  // namespace simt
