#pragma once

// Example-level annotation ops and batching. Length annotation is the
// pseudo-supervision step: J is read off the reference target. Tag order on
// the source is language tag first, <len_J> second.

#include <string>
#include <vector>

#include "lcmt/error.hpp"
#include "lcmt/example.hpp"
#include "lcmt/rng.hpp"
#include "lcmt/vocab.hpp"

namespace lcmt {

// J := subword count of the target, BOS/EOS excluded. Returns false (and
// counts) when J exceeds l_max and the example must be dropped.
bool annotate_length(Example& ex, int l_max, int* dropped = nullptr);

// prepend <len_J> after the language tag when present (source_token mode)
void add_length_token(Example& ex, const Vocabulary& vocab);

// prepend the target-language tag
void add_language_tag(Example& ex, const std::string& target_lang, const Vocabulary& vocab);

// J = max(1, round-half-up(ratio * I)) over true source subwords
int compute_target_length(int src_subword_count, double ratio);

// source tokens that are neither tags nor length tokens
int source_content_count(const Example& ex, const Vocabulary& vocab);

struct Batch {
    std::vector<Example> examples;
    int max_src = 0;
    int max_tgt = 0;  // includes the BOS/EOS slot
    // PAD-filled views + masks (1 = real token)
    std::vector<int> src;
    std::vector<int> tgt;
    std::vector<uint8_t> src_mask;
    std::vector<uint8_t> tgt_mask;
    int token_count = 0;

    int size() const { return static_cast<int>(examples.size()); }
};

// length-bucketed, PAD-filled batches; deterministic order given the rng.
// Examples exceeding max_seq_len on either side are dropped and counted.
std::vector<Batch> make_batches(std::vector<Example> examples, int max_tokens, int max_seq_len,
                                Rng& rng, int* dropped = nullptr);

// corpus file helpers: UTF-8, one sentence per line, space-separated tokens
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace lcmt
