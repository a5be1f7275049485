#pragma once

// Surface-form <-> id map with the reserved layout:
//   0 PAD, 1 UNK, 2 BOS, 3 EOS, language tags, <len_1>..<len_L>, corpus tokens.
// Length tokens are materialized only for source_token training. The file
// format is one token per line, line number == id.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcmt/error.hpp"

namespace lcmt {

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;

    Vocabulary() = default;

    // tags like "<2e>"; n_len_tokens > 0 materializes <len_1>..<len_n>
    static Vocabulary build(const std::vector<std::string>& tags, int n_len_tokens,
                            const std::vector<std::string>& corpus_tokens);

    // corpus tokens collected from lines in first-occurrence order
    static std::vector<std::string> collect_tokens(const std::vector<std::string>& lines);

    int id(const std::string& form) const {
        auto it = ids_.find(form);
        return it == ids_.end() ? kUnk : it->second;
    }
    std::optional<int> find(const std::string& form) const {
        auto it = ids_.find(form);
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }
    const std::string& form(int id) const;

    int size() const { return static_cast<int>(forms_.size()); }
    int n_tags() const { return n_tags_; }
    int n_len_tokens() const { return n_len_tokens_; }
    int first_tag_id() const { return 4; }
    int first_len_id() const { return 4 + n_tags_; }
    int first_content_id() const { return 4 + n_tags_ + n_len_tokens_; }

    bool is_tag(int id) const { return id >= first_tag_id() && id < first_len_id(); }
    bool is_length_token(int id) const { return id >= first_len_id() && id < first_content_id(); }
    bool is_special(int id) const { return id < first_content_id(); }

    int length_token_id(int j) const;  // id of <len_j>
    int tag_id(const std::string& lang) const;  // id of <2lang>

    // token id whose surface ends in the continuation marker
    bool is_continuation(int id) const;

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    void index();

    std::vector<std::string> forms_;
    std::unordered_map<std::string, int> ids_;
    int n_tags_ = 0;
    int n_len_tokens_ = 0;
};

std::vector<std::string> split_tokens(const std::string& line);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace lcmt
