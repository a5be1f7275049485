#include "lcmt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lcmt {

bool annotate_length(Example& ex, int l_max, int* dropped) {
    if (ex.tgt_ids.empty()) throw DataError("annotate_length: empty target");
    const int j = static_cast<int>(ex.tgt_ids.size());
    if (j > l_max) {
        if (dropped) ++*dropped;
        return false;
    }
    ex.target_len = j;
    return true;
}

void add_length_token(Example& ex, const Vocabulary& vocab) {
    if (ex.target_len < 1) throw DataError("add_length_token: example has no J annotation");
    const int tok = vocab.length_token_id(ex.target_len);  // throws when J > L_max
    auto it = ex.src_ids.begin();
    if (!ex.src_ids.empty() && vocab.is_tag(ex.src_ids.front())) ++it;
    ex.src_ids.insert(it, tok);
}

void add_language_tag(Example& ex, const std::string& target_lang, const Vocabulary& vocab) {
    const int tag = vocab.tag_id(target_lang);  // throws on unknown language
    ex.src_ids.insert(ex.src_ids.begin(), tag);
    ex.lang_tag = tag;
}

int compute_target_length(int src_subword_count, double ratio) {
    if (src_subword_count < 1) throw DataError("compute_target_length: empty source");
    if (ratio <= 0.0) throw DataError("compute_target_length: ratio must be positive");
    const int j = static_cast<int>(std::floor(ratio * src_subword_count + 0.5));
    return std::max(1, j);
}

int source_content_count(const Example& ex, const Vocabulary& vocab) {
    int n = 0;
    for (int id : ex.src_ids)
        if (!vocab.is_tag(id) && !vocab.is_length_token(id)) ++n;
    return n;
}

std::vector<Batch> make_batches(std::vector<Example> examples, int max_tokens, int max_seq_len,
                                Rng& rng, int* dropped) {
    if (max_tokens < 2 * max_seq_len)
        throw DataError("make_batches: max_tokens too small for max_seq_len");
    // drop overlong examples (tgt needs the BOS/EOS slot)
    std::vector<Example> kept;
    kept.reserve(examples.size());
    for (auto& ex : examples) {
        if (static_cast<int>(ex.src_ids.size()) > max_seq_len ||
            static_cast<int>(ex.tgt_ids.size()) + 1 > max_seq_len) {
            if (dropped) ++*dropped;
            continue;
        }
        kept.push_back(std::move(ex));
    }

    // shuffle, then stable-sort by length so buckets mix across epochs
    for (size_t i = kept.size(); i > 1; --i)
        std::swap(kept[i - 1], kept[rng.uniform_int(static_cast<int>(i))]);
    std::stable_sort(kept.begin(), kept.end(), [](const Example& a, const Example& b) {
        return a.src_ids.size() + a.tgt_ids.size() < b.src_ids.size() + b.tgt_ids.size();
    });

    std::vector<Batch> batches;
    Batch cur;
    auto flush = [&] {
        if (cur.examples.empty()) return;
        cur.src.assign(static_cast<size_t>(cur.size()) * cur.max_src, Vocabulary::kPad);
        cur.tgt.assign(static_cast<size_t>(cur.size()) * cur.max_tgt, Vocabulary::kPad);
        cur.src_mask.assign(cur.src.size(), 0);
        cur.tgt_mask.assign(cur.tgt.size(), 0);
        for (int b = 0; b < cur.size(); ++b) {
            const auto& ex = cur.examples[b];
            for (size_t i = 0; i < ex.src_ids.size(); ++i) {
                cur.src[static_cast<size_t>(b) * cur.max_src + i] = ex.src_ids[i];
                cur.src_mask[static_cast<size_t>(b) * cur.max_src + i] = 1;
            }
            for (size_t i = 0; i < ex.tgt_ids.size() + 1; ++i) {
                const int id = i < ex.tgt_ids.size() ? ex.tgt_ids[i] : Vocabulary::kEos;
                cur.tgt[static_cast<size_t>(b) * cur.max_tgt + i] = id;
                cur.tgt_mask[static_cast<size_t>(b) * cur.max_tgt + i] = 1;
            }
            cur.token_count += static_cast<int>(ex.src_ids.size() + ex.tgt_ids.size() + 1);
        }
        batches.push_back(std::move(cur));
        cur = Batch{};
    };

    for (auto& ex : kept) {
        const int s = static_cast<int>(ex.src_ids.size());
        const int t = static_cast<int>(ex.tgt_ids.size()) + 1;
        const int new_max_src = std::max(cur.max_src, s);
        const int new_max_tgt = std::max(cur.max_tgt, t);
        const int cost = (cur.size() + 1) * (new_max_src + new_max_tgt);
        if (!cur.examples.empty() && cost > max_tokens) flush();
        cur.max_src = std::max(cur.max_src, s);
        cur.max_tgt = std::max(cur.max_tgt, t);
        cur.examples.push_back(std::move(ex));
    }
    flush();

    // deterministic shuffle of batch order
    for (size_t i = batches.size(); i > 1; --i)
        std::swap(batches[i - 1], batches[rng.uniform_int(static_cast<int>(i))]);
    return batches;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write file: " + path);
    for (const auto& l : lines) os << l << "\n";
    if (!os) throw DataError("write failed: " + path);
}

}  // namespace lcmt
