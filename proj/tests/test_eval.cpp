#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

#include "lcmt/metrics.hpp"
#include "lcmt/rng.hpp"
#include "lcmt/synth.hpp"
#include "lcmt/vocab.hpp"

using lcmt::Rng;
using lcmt::SyntheticSpec;
using lcmt::TokenLines;

namespace {

// independent BLEU oracle: nested-loop n-gram counting, no hash maps
bool ngram_eq(const std::vector<std::string>& a, size_t i, const std::vector<std::string>& b,
              size_t j, int n) {
    for (int k = 0; k < n; ++k)
        if (a[i + k] != b[j + k]) return false;
    return true;
}

long long count_occurrences(const std::vector<std::string>& where,
                            const std::vector<std::string>& gram_src, size_t gram_pos, int n) {
    if (static_cast<int>(where.size()) < n) return 0;
    long long c = 0;
    for (size_t i = 0; i + n <= where.size(); ++i)
        if (ngram_eq(where, i, gram_src, gram_pos, n)) ++c;
    return c;
}

double bleu_oracle(const TokenLines& hyps, const TokenLines& refs, int max_n) {
    long long hyp_len = 0, ref_len = 0;
    std::vector<long long> matched(static_cast<size_t>(max_n), 0);
    std::vector<long long> total(static_cast<size_t>(max_n), 0);
    for (size_t s = 0; s < hyps.size(); ++s) {
        const auto& hyp = hyps[s];
        const auto& ref = refs[s];
        hyp_len += static_cast<long long>(hyp.size());
        ref_len += static_cast<long long>(ref.size());
        for (int n = 1; n <= max_n; ++n) {
            if (static_cast<int>(hyp.size()) < n) continue;
            for (size_t i = 0; i + n <= hyp.size(); ++i) {
                bool seen_before = false;  // count each distinct gram once
                for (size_t j = 0; j < i && !seen_before; ++j)
                    seen_before = ngram_eq(hyp, j, hyp, i, n);
                if (seen_before) continue;
                const long long in_hyp = count_occurrences(hyp, hyp, i, n);
                const long long in_ref = count_occurrences(ref, hyp, i, n);
                total[n - 1] += in_hyp;
                matched[n - 1] += std::min(in_hyp, in_ref);
            }
        }
    }
    double log_prec = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        if (matched[n - 1] == 0 || total[n - 1] == 0) return 0.0;
        log_prec +=
            std::log(static_cast<double>(matched[n - 1]) / static_cast<double>(total[n - 1]));
    }
    log_prec /= max_n;
    const double bp = hyp_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_prec);
}

TokenLines random_corpus(Rng& rng, int sentences, int vocab, int min_len, int max_len) {
    TokenLines out;
    for (int s = 0; s < sentences; ++s) {
        std::vector<std::string> toks;
        const int len = min_len + rng.uniform_int(max_len - min_len + 1);
        for (int i = 0; i < len; ++i)
            toks.push_back("t" + std::to_string(rng.uniform_int(vocab)));
        out.push_back(std::move(toks));
    }
    return out;
}

}  // namespace

TEST_CASE("bleu: identity 100, disjoint 0, errors") {
    TokenLines ref = {{"a", "b", "c", "d", "e"}, {"x", "y", "z", "w"}};
    CHECK(lcmt::bleu(ref, ref) == doctest::Approx(100.0));
    TokenLines dis = {{"p", "q", "r", "s", "t"}, {"m", "n", "o", "k"}};
    CHECK(lcmt::bleu(dis, ref) == 0.0);
    CHECK_THROWS_AS(lcmt::bleu({}, {}), lcmt::DataError);
    CHECK_THROWS_AS(lcmt::bleu(ref, {{"a"}}), lcmt::DataError);
}

TEST_CASE("bleu: brevity penalty penalizes short output") {
    TokenLines ref = {{"a", "b", "c", "d", "e", "f", "g", "h"}};
    TokenLines full = {{"a", "b", "c", "d", "e", "f", "g", "h"}};
    TokenLines half = {{"a", "b", "c", "d"}};
    CHECK(lcmt::bleu(half, ref) < lcmt::bleu(full, ref));
    CHECK(lcmt::bleu(half, ref) == doctest::Approx(100.0 * std::exp(1.0 - 8.0 / 4.0)));
}

TEST_CASE("bleu: matches the brute-force oracle within 1e-9 on 100 random pairs") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + rng.uniform_int(4);
        auto hyp = random_corpus(rng, n, 6, 1, 12);
        auto ref = random_corpus(rng, n, 6, 1, 12);
        for (int max_n : {1, 2, 3, 4})
            CHECK(std::abs(lcmt::bleu(hyp, ref, max_n) - bleu_oracle(hyp, ref, max_n)) < 1e-9);
    }
}

TEST_CASE("bleu: permutation invariant over sentence order") {
    Rng rng(7);
    auto hyp = random_corpus(rng, 20, 5, 2, 10);
    auto ref = random_corpus(rng, 20, 5, 2, 10);
    double base = lcmt::bleu(hyp, ref);
    // rotate
    TokenLines h2(hyp.begin() + 7, hyp.end());
    h2.insert(h2.end(), hyp.begin(), hyp.begin() + 7);
    TokenLines r2(ref.begin() + 7, ref.end());
    r2.insert(r2.end(), ref.begin(), ref.begin() + 7);
    CHECK(lcmt::bleu(h2, r2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("the prefix pathology: BLEU prefers the truncated prefix, content metrics do not") {
    // the example sentence triple, punctuation stripped
    const std::vector<std::string> ref = {"So",  "CEOs",   "a",       "little", "bit",
                                          "better", "than", "average", "but",    "here's",
                                          "where",  "it",   "gets",    "interesting"};
    const std::vector<std::string> base_hyp = {"CEOs", "are", "a", "little", "bit"};
    const std::vector<std::string> cons_hyp = {"the", "CEOs", "are", "interesting"};

    // n-gram match counts as reported for this example: 4/2/1 vs 2/0
    auto count_matches = [](const std::vector<std::string>& hyp,
                            const std::vector<std::string>& r, int n) {
        long long m = 0;
        for (size_t i = 0; i + n <= hyp.size(); ++i) {
            bool dup = false;
            for (size_t j = 0; j < i && !dup; ++j) dup = ngram_eq(hyp, j, hyp, i, n);
            if (dup) continue;
            m += std::min(count_occurrences(hyp, hyp, i, n), count_occurrences(r, hyp, i, n));
        }
        return m;
    };
    CHECK(count_matches(base_hyp, ref, 1) == 4);
    CHECK(count_matches(base_hyp, ref, 2) == 2);
    CHECK(count_matches(base_hyp, ref, 3) == 1);
    CHECK(count_matches(cons_hyp, ref, 1) == 2);
    CHECK(count_matches(cons_hyp, ref, 2) == 0);

    const double bleu_base = lcmt::bleu({base_hyp}, {ref}, 3);
    const double bleu_cons = lcmt::bleu({cons_hyp}, {ref}, 3);
    CHECK(bleu_cons == 0.0);  // zero 2-gram precision
    CHECK(bleu_base > bleu_cons);

    // content view: transliterate words to pivot symbols; under the length
    // budget the salient content sits at the end, which only the constrained
    // hypothesis covers
    SyntheticSpec spec;
    spec.alphabet_size = 16;
    std::map<std::string, int> sym;
    auto id_of = [&sym](const std::string& w) {
        auto it = sym.find(w);
        if (it == sym.end()) it = sym.emplace(w, static_cast<int>(sym.size())).first;
        return it->second;
    };
    auto pivotize = [&](const std::vector<std::string>& words) {
        std::vector<std::string> out;
        for (const auto& w : words) out.push_back(lcmt::synth::pivot_short_token(id_of(w)));
        return out;
    };
    const auto src = pivotize(ref);
    const auto base_p = pivotize(base_hyp);
    const auto cons_p = pivotize(cons_hyp);
    std::vector<int> budget_base = {static_cast<int>(base_hyp.size())};
    std::vector<int> budget_cons = {static_cast<int>(cons_hyp.size())};
    auto rep_base = lcmt::content_metrics({base_p}, {src}, spec, "e", "e", &budget_base);
    auto rep_cons = lcmt::content_metrics({cons_p}, {src}, spec, "e", "e", &budget_cons);
    CHECK(rep_cons.salient_recall > rep_base.salient_recall);  // order reversed
}

TEST_CASE("avg_length_distance") {
    TokenLines hyps = {{"a", "b", "c"}, {"d", "e"}};
    CHECK(lcmt::avg_length_distance(hyps, {3, 2}) == 0.0);
    TokenLines two = {std::vector<std::string>(8, "x"), std::vector<std::string>(6, "x")};
    CHECK(lcmt::avg_length_distance(two, {8, 8}) == doctest::Approx(1.0));
    // zero iff every hypothesis matches its target
    CHECK(lcmt::avg_length_distance(hyps, {3, 3}) > 0.0);
    CHECK_THROWS_AS(lcmt::avg_length_distance(hyps, {1}), lcmt::DataError);
}

TEST_CASE("content_metrics: re-rendering, drops, language validity") {
    SyntheticSpec spec;
    spec.alphabet_size = 10;
    spec.n_satellites = 2;
    Rng rng(5);

    // any valid re-rendering of the source content is exact
    std::vector<int> syms = {1, 4, 7, 2};
    auto src = lcmt::synth::render(spec, "l1", syms, nullptr);
    auto hyp = lcmt::synth::render_pivot(syms, {true, false, true, false});
    auto rep = lcmt::content_metrics({hyp}, {src}, spec, "e", "l1");
    CHECK(rep.exact == 1.0);
    CHECK(rep.recall == 1.0);
    CHECK(rep.precision == 1.0);
    CHECK(rep.language_validity == 1.0);

    // half the symbols dropped: recall 0.5, precision 1.0
    auto half = lcmt::synth::render_pivot({7, 2}, {true, true});
    auto rep2 = lcmt::content_metrics({half}, {src}, spec, "e", "l1");
    CHECK(rep2.recall == doctest::Approx(0.5));
    CHECK(rep2.precision == doctest::Approx(1.0));
    CHECK(rep2.exact == 0.0);

    // copying the source is the wrong language entirely
    auto rep3 = lcmt::content_metrics({src}, {src}, spec, "e", "l1");
    CHECK(rep3.language_validity == 0.0);
    CHECK(rep3.n_decoded == 0);

    // budget-canonical exactness: keep the highest-salience (latest) symbols
    std::vector<int> budgets = {2};
    auto canon_hyp = lcmt::synth::render_pivot({7, 2}, {true, true});
    auto rep4 = lcmt::content_metrics({canon_hyp}, {src}, spec, "e", "l1", &budgets);
    CHECK(rep4.exact == 1.0);
    CHECK(rep4.salient_recall == 1.0);
    auto wrong = lcmt::synth::render_pivot({1, 4}, {true, true});
    auto rep5 = lcmt::content_metrics({wrong}, {src}, spec, "e", "l1", &budgets);
    CHECK(rep5.exact == 0.0);
    CHECK(rep5.salient_recall == 0.0);
    CHECK(rep5.prefix_recall == 1.0);  // it covered the first half instead
    CHECK(rep5.suffix_recall == 0.0);
}

TEST_CASE("content_metrics: exact never exceeds recall or precision (no budgets)") {
    SyntheticSpec spec;
    spec.alphabet_size = 8;
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        TokenLines hyps, srcs;
        const int n = 1 + rng.uniform_int(6);
        for (int s = 0; s < n; ++s) {
            const int k = 1 + rng.uniform_int(5);
            std::vector<int> sy(k), hy_syms(1 + rng.uniform_int(5));
            for (auto& c : sy) c = rng.uniform_int(8);
            for (auto& c : hy_syms) c = rng.uniform_int(8);
            if (rng.bernoulli(0.3)) hy_syms = sy;  // some exact sentences
            srcs.push_back(lcmt::synth::render(spec, "l1", sy, nullptr));
            std::vector<bool> forms(hy_syms.size());
            for (size_t i = 0; i < forms.size(); ++i) forms[i] = rng.bernoulli(0.5);
            hyps.push_back(lcmt::synth::render_pivot(hy_syms, forms));
        }
        auto rep = lcmt::content_metrics(hyps, srcs, spec, "e", "l1");
        CHECK(rep.exact <= rep.recall + 1e-12);
        CHECK(rep.exact <= rep.precision + 1e-12);
    }
}

TEST_CASE("complexity_report: counts, ratio, FRE direction") {
    auto plain = lcmt::tokenize_lines({"one two three", "four five"});
    auto rep = lcmt::complexity_report(plain);
    CHECK(rep.continuation_tokens == 0);
    CHECK(rep.complex_word_ratio == 0.0);
    CHECK(rep.bpe_tokens == 5);
    CHECK(rep.words == 5);
    CHECK(rep.sentences == 2);

    auto marsh = lcmt::tokenize_lines({"mar@@ shm@@ allow"});
    auto rep2 = lcmt::complexity_report(marsh);
    CHECK(rep2.bpe_tokens == 3);
    CHECK(rep2.words == 1);
    CHECK(rep2.continuation_tokens == 2);
    CHECK(rep2.complex_word_ratio == doctest::Approx(1.0));

    // fewer pieces and shorter words read "easier"
    auto simple = lcmt::tokenize_lines({"we go now", "it is fine"});
    auto complex_c = lcmt::tokenize_lines({"ins@@ titu@@ tional over@@ sight", "per@@ petual"});
    CHECK(lcmt::complexity_report(simple).fre > lcmt::complexity_report(complex_c).fre);

    CHECK_THROWS_AS(lcmt::complexity_report({}), lcmt::DataError);
}
