#pragma once

// Corpus metrics: unsmoothed corpus BLEU, average length distance against
// per-sentence targets, synthetic-content oracles (the embedding-metric
// replacement), and the complexity/readability report.

#include <string>
#include <vector>

#include "lcmt/error.hpp"
#include "lcmt/synth.hpp"

namespace lcmt {

using TokenLines = std::vector<std::vector<std::string>>;

// corpus-level geometric mean of modified n-gram precisions times the
// brevity penalty, scaled to [0, 100]. No smoothing: any all-zero n-gram
// order gives 0.
double bleu(const TokenLines& hypotheses, const TokenLines& references, int max_n = 4);

// mean |len(hyp) - J| in subword tokens, EOS excluded (hyp lines carry none)
double avg_length_distance(const TokenLines& hypotheses, const std::vector<int>& target_lens);

struct ContentReport {
    double exact = 0.0;          // symbols == budget-canonical compression of the source
    double recall = 0.0;         // multiset recall vs the full source
    double precision = 0.0;
    double salient_recall = 0.0; // recall vs the budget-canonical compression
    double prefix_recall = 0.0;  // recall over the first half of source positions
    double suffix_recall = 0.0;  // recall over the second half
    double language_validity = 0.0;  // every token in the expected language
    int n_sentences = 0;
    int n_decoded = 0;  // hypotheses that decoded to content symbols
};

// decode both sides and compare content. budgets (optional, per sentence)
// define the canonical compression `exact`/`salient_recall` are scored
// against; without budgets the canonical sequence is the full source.
// Hypotheses that fail to decode count in language_validity's denominator
// but are excluded from the content aggregates.
ContentReport content_metrics(const TokenLines& hypotheses, const TokenLines& sources,
                              const SyntheticSpec& spec, const std::string& hyp_lang,
                              const std::string& src_lang,
                              const std::vector<int>* budgets = nullptr);

struct ComplexityReport {
    long long bpe_tokens = 0;
    long long continuation_tokens = 0;
    long long words = 0;
    long long sentences = 0;
    double complex_word_ratio = 0.0;  // words of >= 2 subword pieces / words
    double fre = 0.0;  // Flesch approximation; syllables ~ vowel groups
};

ComplexityReport complexity_report(const TokenLines& corpus);

TokenLines tokenize_lines(const std::vector<std::string>& lines);

}  // namespace lcmt
