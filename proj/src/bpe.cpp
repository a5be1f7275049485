#include "lcmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "lcmt/vocab.hpp"

namespace lcmt {

namespace {

constexpr const char* kMarker = "@@";

std::string pair_key(const std::string& a, const std::string& b) {
    return a + " " + b;
}

// merge every adjacent (a, b) in-place
void merge_in_word(std::vector<std::string>& sym, const std::string& a, const std::string& b) {
    std::vector<std::string> out;
    out.reserve(sym.size());
    size_t i = 0;
    while (i < sym.size()) {
        if (i + 1 < sym.size() && sym[i] == a && sym[i + 1] == b) {
            out.push_back(a + b);
            i += 2;
        } else {
            out.push_back(sym[i]);
            i += 1;
        }
    }
    sym = std::move(out);
}

std::vector<std::string> attach_markers(std::vector<std::string> pieces) {
    for (size_t i = 0; i + 1 < pieces.size(); ++i) pieces[i] += kMarker;
    return pieces;
}

}  // namespace

std::vector<std::string> utf8_chars(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        size_t n = 1;
        if ((c & 0xE0) == 0xC0) n = 2;
        else if ((c & 0xF0) == 0xE0) n = 3;
        else if ((c & 0xF8) == 0xF0) n = 4;
        if (i + n > s.size()) n = 1;  // tolerate malformed tails
        out.push_back(s.substr(i, n));
        i += n;
    }
    return out;
}

BpeMerges bpe_learn(const std::vector<std::string>& lines, int n_merges) {
    if (n_merges < 0) throw DataError("bpe_learn: n_merges must be >= 0");
    std::map<std::string, int64_t> word_freq;
    for (const auto& line : lines)
        for (const auto& tok : split_tokens(line)) word_freq[tok] += 1;
    if (word_freq.empty()) throw DataError("bpe_learn: empty corpus");

    struct Entry {
        std::vector<std::string> symbols;
        int64_t freq;
    };
    std::vector<Entry> words;
    words.reserve(word_freq.size());
    for (const auto& [w, f] : word_freq) words.push_back({utf8_chars(w), f});

    BpeMerges result;
    for (int step = 0; step < n_merges; ++step) {
        std::map<std::pair<std::string, std::string>, int64_t> counts;
        for (const auto& e : words)
            for (size_t i = 0; i + 1 < e.symbols.size(); ++i)
                counts[{e.symbols[i], e.symbols[i + 1]}] += e.freq;
        if (counts.empty()) break;
        // max count; std::map order gives the lexicographically smallest tie
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (it->second > best->second) best = it;
        result.merges.push_back(best->first);
        for (auto& e : words) merge_in_word(e.symbols, best->first.first, best->first.second);
    }
    return result;
}

std::vector<std::string> bpe_apply_word(const std::string& word, const BpeMerges& merges) {
    std::unordered_map<std::string, int> rank;
    for (size_t i = 0; i < merges.merges.size(); ++i)
        rank.emplace(pair_key(merges.merges[i].first, merges.merges[i].second),
                     static_cast<int>(i));
    auto sym = utf8_chars(word);
    while (sym.size() > 1) {
        int best_rank = -1;
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < sym.size(); ++i) {
            auto it = rank.find(pair_key(sym[i], sym[i + 1]));
            if (it != rank.end() && (best_rank == -1 || it->second < best_rank)) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank == -1) break;
        sym[best_pos] += sym[best_pos + 1];
        sym.erase(sym.begin() + static_cast<ptrdiff_t>(best_pos) + 1);
    }
    return attach_markers(std::move(sym));
}

std::string bpe_apply_line(const std::string& line, const BpeMerges& merges) {
    std::vector<std::string> out;
    for (const auto& tok : split_tokens(line)) {
        auto pieces = bpe_apply_word(tok, merges);
        out.insert(out.end(), pieces.begin(), pieces.end());
    }
    return join_tokens(out);
}

std::vector<std::string> bpe_undo(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    std::string current;
    for (const auto& tok : tokens) {
        if (tok.size() >= 2 && tok.compare(tok.size() - 2, 2, kMarker) == 0) {
            current += tok.substr(0, tok.size() - 2);
        } else {
            current += tok;
            out.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(current);  // dangling continuation
    return out;
}

std::string bpe_undo_line(const std::string& line) {
    return join_tokens(bpe_undo(split_tokens(line)));
}

void BpeMerges::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write merges file: " + path);
    for (const auto& [a, b] : merges) os << a << " " << b << "\n";
}

BpeMerges BpeMerges::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read merges file: " + path);
    BpeMerges out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!(ls >> a >> b)) throw DataError("bad merges line: " + line);
        out.merges.emplace_back(a, b);
    }
    return out;
}

BpeEncoder::BpeEncoder(BpeMerges merges) : merges_(std::move(merges)) {
    for (size_t i = 0; i < merges_.merges.size(); ++i)
        rank_.emplace(pair_key(merges_.merges[i].first, merges_.merges[i].second),
                      static_cast<int>(i));
}

const std::vector<std::string>& BpeEncoder::pieces(const std::string& word) {
    auto it = cache_.find(word);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(word, bpe_apply_word(word, merges_)).first->second;
}

std::string BpeEncoder::apply_line(const std::string& line) {
    std::vector<std::string> out;
    for (const auto& tok : split_tokens(line)) {
        const auto& p = pieces(tok);
        out.insert(out.end(), p.begin(), p.end());
    }
    return join_tokens(out);
}

}  // namespace lcmt
