#pragma once

// Byte-pair encoding over whitespace-tokenized text. Learning greedily
// merges the most frequent adjacent symbol pair (ties: lexicographically
// smallest pair); apply emits subword pieces with "@@" appended to every
// non-final piece; undo concatenates at "@@" boundaries. Words are split
// into UTF-8 code points, not bytes.

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcmt/error.hpp"

namespace lcmt {

struct BpeMerges {
    std::vector<std::pair<std::string, std::string>> merges;  // highest priority first

    void save(const std::string& path) const;
    static BpeMerges load(const std::string& path);
};

// corpus lines -> merge table
BpeMerges bpe_learn(const std::vector<std::string>& lines, int n_merges);

// one word -> pieces (markers already attached)
std::vector<std::string> bpe_apply_word(const std::string& word, const BpeMerges& merges);

// whitespace-tokenized line -> BPE-tokenized line
std::string bpe_apply_line(const std::string& line, const BpeMerges& merges);

// BPE token sequence -> original tokens
std::vector<std::string> bpe_undo(const std::vector<std::string>& tokens);
std::string bpe_undo_line(const std::string& line);

// subword pieces of one word, caching across calls
class BpeEncoder {
  public:
    explicit BpeEncoder(BpeMerges merges);
    const std::vector<std::string>& pieces(const std::string& word);
    std::string apply_line(const std::string& line);

  private:
    BpeMerges merges_;
    std::unordered_map<std::string, int> rank_;
    std::unordered_map<std::string, std::vector<std::string>> cache_;
};

std::vector<std::string> utf8_chars(const std::string& s);

}  // namespace lcmt
