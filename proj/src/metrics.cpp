#include "lcmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "lcmt/bpe.hpp"
#include "lcmt/vocab.hpp"

namespace lcmt {

TokenLines tokenize_lines(const std::vector<std::string>& lines) {
    TokenLines out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(split_tokens(l));
    return out;
}

namespace {

// n-gram -> clipped-count bookkeeping, corpus level
void count_ngrams(const std::vector<std::string>& toks, int n,
                  std::map<std::vector<std::string>, long long>& counts) {
    if (static_cast<int>(toks.size()) < n) return;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        counts[std::vector<std::string>(toks.begin() + static_cast<ptrdiff_t>(i),
                                        toks.begin() + static_cast<ptrdiff_t>(i + n))] += 1;
}

}  // namespace

double bleu(const TokenLines& hypotheses, const TokenLines& references, int max_n) {
    if (hypotheses.size() != references.size())
        throw DataError("bleu: hypothesis/reference counts differ (" +
                        std::to_string(hypotheses.size()) + " vs " +
                        std::to_string(references.size()) + ")");
    if (hypotheses.empty()) throw DataError("bleu: empty corpus");
    if (max_n < 1) throw DataError("bleu: max_n must be >= 1");

    std::vector<long long> matched(static_cast<size_t>(max_n), 0);
    std::vector<long long> total(static_cast<size_t>(max_n), 0);
    long long hyp_len = 0, ref_len = 0;
    for (size_t s = 0; s < hypotheses.size(); ++s) {
        const auto& hyp = hypotheses[s];
        const auto& ref = references[s];
        hyp_len += static_cast<long long>(hyp.size());
        ref_len += static_cast<long long>(ref.size());
        for (int n = 1; n <= max_n; ++n) {
            std::map<std::vector<std::string>, long long> hc, rc;
            count_ngrams(hyp, n, hc);
            count_ngrams(ref, n, rc);
            for (const auto& [gram, c] : hc) {
                total[n - 1] += c;
                auto it = rc.find(gram);
                if (it != rc.end()) matched[n - 1] += std::min(c, it->second);
            }
        }
    }

    double log_prec = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        if (total[n - 1] == 0 || matched[n - 1] == 0) return 0.0;
        log_prec += std::log(static_cast<double>(matched[n - 1]) /
                             static_cast<double>(total[n - 1]));
    }
    log_prec /= max_n;
    const double bp =
        hyp_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_prec);
}

double avg_length_distance(const TokenLines& hypotheses, const std::vector<int>& target_lens) {
    if (hypotheses.size() != target_lens.size())
        throw DataError("avg_length_distance: misaligned lists");
    if (hypotheses.empty()) throw DataError("avg_length_distance: empty corpus");
    double sum = 0.0;
    for (size_t i = 0; i < hypotheses.size(); ++i)
        sum += std::abs(static_cast<double>(hypotheses[i].size()) - target_lens[i]);
    return sum / static_cast<double>(hypotheses.size());
}

namespace {

std::unordered_map<int, long long> multiset(const std::vector<int>& v) {
    std::unordered_map<int, long long> m;
    for (int x : v) m[x] += 1;
    return m;
}

long long intersection_size(const std::unordered_map<int, long long>& a,
                            const std::unordered_map<int, long long>& b) {
    long long n = 0;
    for (const auto& [k, c] : a) {
        auto it = b.find(k);
        if (it != b.end()) n += std::min(c, it->second);
    }
    return n;
}

}  // namespace

ContentReport content_metrics(const TokenLines& hypotheses, const TokenLines& sources,
                              const SyntheticSpec& spec, const std::string& hyp_lang,
                              const std::string& src_lang, const std::vector<int>* budgets) {
    if (hypotheses.size() != sources.size())
        throw DataError("content_metrics: hypothesis/source counts differ");
    if (budgets && budgets->size() != hypotheses.size())
        throw DataError("content_metrics: budget list misaligned");
    if (hypotheses.empty()) throw DataError("content_metrics: empty corpus");

    ContentReport rep;
    rep.n_sentences = static_cast<int>(hypotheses.size());
    long long valid = 0, decoded = 0;
    double exact = 0, recall = 0, precision = 0, salient = 0;
    double prefix_hits = 0, prefix_total = 0, suffix_hits = 0, suffix_total = 0;

    for (size_t s = 0; s < hypotheses.size(); ++s) {
        const auto src_dec = synth::content_decode(spec, src_lang, sources[s]);
        if (!src_dec.ok())
            throw DataError("content_metrics: source line " + std::to_string(s + 1) +
                            " does not decode in language " + src_lang);
        bool all_tokens_valid = !hypotheses[s].empty();
        for (const auto& t : hypotheses[s])
            if (!synth::token_in_language(spec, hyp_lang, t)) {
                all_tokens_valid = false;
                break;
            }
        if (all_tokens_valid) ++valid;

        const auto hyp_dec = synth::content_decode(spec, hyp_lang, hypotheses[s]);
        if (!hyp_dec.ok()) continue;  // excluded from content aggregates
        ++decoded;

        const auto& src_syms = src_dec.symbols;
        const auto& hyp_syms = hyp_dec.symbols;
        const auto canonical =
            budgets ? synth::canonical_compress(src_syms, (*budgets)[s]) : src_syms;

        if (hyp_syms == canonical) exact += 1.0;
        const auto hm = multiset(hyp_syms);
        const auto sm = multiset(src_syms);
        const auto cm = multiset(canonical);
        const long long inter = intersection_size(hm, sm);
        recall += static_cast<double>(inter) / static_cast<double>(src_syms.size());
        precision += hyp_syms.empty()
                         ? 0.0
                         : static_cast<double>(inter) / static_cast<double>(hyp_syms.size());
        salient += canonical.empty() ? 0.0
                                     : static_cast<double>(intersection_size(hm, cm)) /
                                           static_cast<double>(canonical.size());

        // positional halves of the source content
        const size_t half = (src_syms.size() + 1) / 2;
        std::vector<int> front(src_syms.begin(), src_syms.begin() + static_cast<ptrdiff_t>(half));
        std::vector<int> back(src_syms.begin() + static_cast<ptrdiff_t>(half), src_syms.end());
        prefix_hits += static_cast<double>(intersection_size(hm, multiset(front)));
        prefix_total += static_cast<double>(front.size());
        suffix_hits += static_cast<double>(intersection_size(hm, multiset(back)));
        suffix_total += static_cast<double>(back.size());
    }

    rep.n_decoded = static_cast<int>(decoded);
    rep.language_validity = static_cast<double>(valid) / rep.n_sentences;
    if (decoded > 0) {
        rep.exact = exact / static_cast<double>(decoded);
        rep.recall = recall / static_cast<double>(decoded);
        rep.precision = precision / static_cast<double>(decoded);
        rep.salient_recall = salient / static_cast<double>(decoded);
        rep.prefix_recall = prefix_total > 0 ? prefix_hits / prefix_total : 0.0;
        rep.suffix_recall = suffix_total > 0 ? suffix_hits / suffix_total : 0.0;
    }
    return rep;
}

ComplexityReport complexity_report(const TokenLines& corpus) {
    if (corpus.empty()) throw DataError("complexity_report: empty corpus");
    ComplexityReport rep;
    rep.sentences = static_cast<long long>(corpus.size());
    long long complex_words = 0, syllables = 0;
    for (const auto& line : corpus) {
        rep.bpe_tokens += static_cast<long long>(line.size());
        for (const auto& t : line)
            if (t.size() >= 2 && t.compare(t.size() - 2, 2, "@@") == 0)
                ++rep.continuation_tokens;
        int pieces_in_word = 0;
        for (const auto& t : line) {
            ++pieces_in_word;
            const bool cont = t.size() >= 2 && t.compare(t.size() - 2, 2, "@@") == 0;
            if (!cont) {
                ++rep.words;
                if (pieces_in_word >= 2) ++complex_words;
                pieces_in_word = 0;
            }
        }
        if (pieces_in_word > 0) {  // dangling continuation still ends a word
            ++rep.words;
            if (pieces_in_word >= 2) ++complex_words;
        }
        // syllables ~ maximal vowel-group count per reconstructed word, min 1
        for (const auto& word : bpe_undo(line)) {
            int groups = 0;
            bool in_group = false;
            for (char ch : word) {
                const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                const bool vowel =
                    lc == 'a' || lc == 'e' || lc == 'i' || lc == 'o' || lc == 'u' || lc == 'y';
                if (vowel && !in_group) ++groups;
                in_group = vowel;
            }
            syllables += std::max(1, groups);
        }
    }
    if (rep.words > 0)
        rep.complex_word_ratio =
            static_cast<double>(complex_words) / static_cast<double>(rep.words);
    if (rep.words > 0 && rep.sentences > 0)
        rep.fre = 206.835 -
                  1.015 * (static_cast<double>(rep.words) / static_cast<double>(rep.sentences)) -
                  84.6 * (static_cast<double>(syllables) / static_cast<double>(rep.words));
    return rep;
}

}  // namespace lcmt
