#include "lcmt/vocab.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lcmt {

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tags, int n_len_tokens,
                             const std::vector<std::string>& corpus_tokens) {
    Vocabulary v;
    v.forms_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
    for (const auto& t : tags) v.forms_.push_back("<2" + t + ">");
    v.n_tags_ = static_cast<int>(tags.size());
    for (int j = 1; j <= n_len_tokens; ++j) v.forms_.push_back("<len_" + std::to_string(j) + ">");
    v.n_len_tokens_ = n_len_tokens;
    std::unordered_map<std::string, bool> seen;
    for (const auto& f : v.forms_) seen.emplace(f, true);
    for (const auto& t : corpus_tokens) {
        if (t.empty() || seen.count(t)) continue;
        seen.emplace(t, true);
        v.forms_.push_back(t);
    }
    v.index();
    return v;
}

std::vector<std::string> Vocabulary::collect_tokens(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    std::unordered_map<std::string, bool> seen;
    for (const auto& line : lines)
        for (auto& tok : split_tokens(line))
            if (!seen.count(tok)) {
                seen.emplace(tok, true);
                out.push_back(tok);
            }
    return out;
}

void Vocabulary::index() {
    ids_.clear();
    for (size_t i = 0; i < forms_.size(); ++i) {
        if (ids_.count(forms_[i]))
            throw DataError("duplicate vocabulary form: " + forms_[i]);
        ids_.emplace(forms_[i], static_cast<int>(i));
    }
}

const std::string& Vocabulary::form(int id) const {
    if (id < 0 || id >= size())
        throw DataError("vocabulary id out of range: " + std::to_string(id));
    return forms_[id];
}

int Vocabulary::length_token_id(int j) const {
    if (j < 1 || j > n_len_tokens_)
        throw DataError("length token <len_" + std::to_string(j) + "> not in vocabulary (L_max " +
                        std::to_string(n_len_tokens_) + ")");
    return first_len_id() + (j - 1);
}

int Vocabulary::tag_id(const std::string& lang) const {
    auto it = ids_.find("<2" + lang + ">");
    if (it == ids_.end()) throw DataError("unknown language tag: <2" + lang + ">");
    return it->second;
}

bool Vocabulary::is_continuation(int id) const {
    const std::string& f = form(id);
    return f.size() >= 2 && f.compare(f.size() - 2, 2, "@@") == 0;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(form(i));
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write vocabulary file: " + path);
    // counts on a header line so load() restores the reserved sections
    os << "#lcmt-vocab tags=" << n_tags_ << " len_tokens=" << n_len_tokens_ << "\n";
    for (const auto& f : forms_) os << f << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    if (!std::getline(is, line) || line.rfind("#lcmt-vocab", 0) != 0)
        throw DataError("not a vocabulary file: " + path);
    if (std::sscanf(line.c_str(), "#lcmt-vocab tags=%d len_tokens=%d", &v.n_tags_,
                    &v.n_len_tokens_) != 2)
        throw DataError("bad vocabulary header: " + line);
    while (std::getline(is, line)) v.forms_.push_back(line);
    if (v.size() < 4 + v.n_tags_ + v.n_len_tokens_)
        throw DataError("vocabulary file truncated: " + path);
    v.index();
    return v;
}

}  // namespace lcmt
