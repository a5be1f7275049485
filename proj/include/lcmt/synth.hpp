#pragma once

// Synthetic parallel corpora over a shared content alphabet. Satellite
// languages l1..l4 render symbol c as the single token "l{i}w{c}". The
// pivot language e renders c either short ("e{c}", one token) or long
// ("e{c}a@@ e{c}b", two subword tokens of one word), so a k-symbol sentence
// admits pivot renderings of every length in [k, 2k]. Surface vocabularies
// of distinct languages are disjoint and every token maps to exactly one
// symbol.
//
// Salience of an occurrence is the position of its value's first
// occurrence; drops remove the lowest-salience occurrences first, i.e. the
// expendable content sits at the beginning of a sentence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcmt/error.hpp"
#include "lcmt/rng.hpp"

namespace lcmt {

struct SyntheticSpec {
    int alphabet_size = 40;
    int min_symbols = 3;
    int max_symbols = 8;
    int n_satellites = 4;
    double p_short = 0.5;
    double p_drop = 0.1;
    uint64_t seed = 1;

    void validate() const;
    void save(const std::string& path) const;
    static SyntheticSpec load(const std::string& path);
};

namespace synth {

inline std::string pivot_lang() { return "e"; }
std::string satellite_lang(int i);  // 1-based
bool is_pivot(const std::string& lang);
bool is_known_lang(const SyntheticSpec& spec, const std::string& lang);

std::string satellite_token(int lang_index, int symbol);
std::string pivot_short_token(int symbol);
std::string pivot_long_first(int symbol);   // carries "@@"
std::string pivot_long_second(int symbol);
std::string pivot_long_word(int symbol);    // after undoing the marker

// every surface token of a language, deterministic order
std::vector<std::string> language_tokens(const SyntheticSpec& spec, const std::string& lang);
bool token_in_language(const SyntheticSpec& spec, const std::string& lang,
                       const std::string& token);

// render a symbol sequence; pivot samples a form per symbol from rng
std::vector<std::string> render(const SyntheticSpec& spec, const std::string& lang,
                                const std::vector<int>& symbols, Rng* rng);
// pivot rendering with explicit form choices (true = short)
std::vector<std::string> render_pivot(const std::vector<int>& symbols,
                                      const std::vector<bool>& short_form);

struct DecodeOutcome {
    enum class Status { kOk, kForeignToken, kBadWord, kEmpty };
    Status status = Status::kEmpty;
    std::vector<int> symbols;
    bool ok() const { return status == Status::kOk; }
};

// tokens -> content symbols; fails on foreign tokens or unmatchable words
DecodeOutcome content_decode(const SyntheticSpec& spec, const std::string& lang,
                             const std::vector<std::string>& tokens);

// occurrence salience = position of the value's first occurrence
std::vector<int> occurrence_salience(const std::vector<int>& symbols);
// drop the d lowest-salience occurrences, order preserved
std::vector<int> drop_lowest_salience(const std::vector<int>& symbols, int d);
// keep the min(k, budget) highest-salience occurrences (the best content
// achievable under a token budget of `budget` pivot tokens)
std::vector<int> canonical_compress(const std::vector<int>& symbols, int budget);

struct ParallelCorpus {
    std::vector<std::string> src_lines;
    std::vector<std::string> tgt_lines;
};

// seeded, reproducible sentence pairs; the target side samples drops and
// (for pivot targets) long/short forms. label separates corpus streams.
ParallelCorpus generate(const SyntheticSpec& spec, int n_sentences, const std::string& src_lang,
                        const std::string& tgt_lang, const std::string& label);

}  // namespace synth
}  // namespace lcmt
