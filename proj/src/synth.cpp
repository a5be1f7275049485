#include "lcmt/synth.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "lcmt/bpe.hpp"
#include "lcmt/vocab.hpp"

namespace lcmt {

void SyntheticSpec::validate() const {
    if (alphabet_size < 2) throw DataError("synthetic spec: alphabet_size must be >= 2");
    if (min_symbols < 1 || max_symbols < min_symbols)
        throw DataError("synthetic spec: bad sentence length range");
    if (n_satellites < 1 || n_satellites > 9)
        throw DataError("synthetic spec: n_satellites must be in [1, 9]");
    if (p_short < 0.0 || p_short > 1.0 || p_drop < 0.0 || p_drop >= 1.0)
        throw DataError("synthetic spec: probabilities out of range");
}

void SyntheticSpec::save(const std::string& path) const {
    nlohmann::json j{{"alphabet_size", alphabet_size}, {"min_symbols", min_symbols},
                     {"max_symbols", max_symbols},     {"n_satellites", n_satellites},
                     {"p_short", p_short},             {"p_drop", p_drop},
                     {"seed", seed}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write synthetic spec: " + path);
    os << j.dump(2) << "\n";
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read synthetic spec: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw DataError("bad synthetic spec json: " + std::string(e.what()));
    }
    SyntheticSpec s;
    s.alphabet_size = j.value("alphabet_size", s.alphabet_size);
    s.min_symbols = j.value("min_symbols", s.min_symbols);
    s.max_symbols = j.value("max_symbols", s.max_symbols);
    s.n_satellites = j.value("n_satellites", s.n_satellites);
    s.p_short = j.value("p_short", s.p_short);
    s.p_drop = j.value("p_drop", s.p_drop);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

namespace synth {

std::string satellite_lang(int i) { return "l" + std::to_string(i); }

bool is_pivot(const std::string& lang) { return lang == "e"; }

bool is_known_lang(const SyntheticSpec& spec, const std::string& lang) {
    if (is_pivot(lang)) return true;
    for (int i = 1; i <= spec.n_satellites; ++i)
        if (lang == satellite_lang(i)) return true;
    return false;
}

std::string satellite_token(int lang_index, int symbol) {
    return "l" + std::to_string(lang_index) + "w" + std::to_string(symbol);
}
std::string pivot_short_token(int symbol) { return "e" + std::to_string(symbol); }
std::string pivot_long_first(int symbol) { return "e" + std::to_string(symbol) + "a@@"; }
std::string pivot_long_second(int symbol) { return "e" + std::to_string(symbol) + "b"; }
std::string pivot_long_word(int symbol) {
    return "e" + std::to_string(symbol) + "a" + "e" + std::to_string(symbol) + "b";
}

std::vector<std::string> language_tokens(const SyntheticSpec& spec, const std::string& lang) {
    if (!is_known_lang(spec, lang)) throw DataError("unknown synthetic language: " + lang);
    std::vector<std::string> out;
    if (is_pivot(lang)) {
        for (int c = 0; c < spec.alphabet_size; ++c) {
            out.push_back(pivot_short_token(c));
            out.push_back(pivot_long_first(c));
            out.push_back(pivot_long_second(c));
        }
    } else {
        const int idx = lang[1] - '0';
        for (int c = 0; c < spec.alphabet_size; ++c) out.push_back(satellite_token(idx, c));
    }
    return out;
}

bool token_in_language(const SyntheticSpec& spec, const std::string& lang,
                       const std::string& token) {
    if (is_pivot(lang)) {
        for (int c = 0; c < spec.alphabet_size; ++c)
            if (token == pivot_short_token(c) || token == pivot_long_first(c) ||
                token == pivot_long_second(c))
                return true;
        return false;
    }
    const int idx = lang.size() == 2 ? lang[1] - '0' : -1;
    if (idx < 1 || idx > spec.n_satellites) return false;
    for (int c = 0; c < spec.alphabet_size; ++c)
        if (token == satellite_token(idx, c)) return true;
    return false;
}

std::vector<std::string> render_pivot(const std::vector<int>& symbols,
                                      const std::vector<bool>& short_form) {
    if (symbols.size() != short_form.size())
        throw DataError("render_pivot: form choices do not align with symbols");
    std::vector<std::string> out;
    out.reserve(symbols.size() * 2);
    for (size_t i = 0; i < symbols.size(); ++i) {
        if (short_form[i]) {
            out.push_back(pivot_short_token(symbols[i]));
        } else {
            out.push_back(pivot_long_first(symbols[i]));
            out.push_back(pivot_long_second(symbols[i]));
        }
    }
    return out;
}

std::vector<std::string> render(const SyntheticSpec& spec, const std::string& lang,
                                const std::vector<int>& symbols, Rng* rng) {
    for (int c : symbols)
        if (c < 0 || c >= spec.alphabet_size)
            throw DataError("render: symbol out of alphabet: " + std::to_string(c));
    if (is_pivot(lang)) {
        if (!rng) throw DataError("render: pivot rendering needs an rng for form choices");
        std::vector<bool> short_form(symbols.size());
        for (size_t i = 0; i < symbols.size(); ++i) short_form[i] = rng->bernoulli(spec.p_short);
        return render_pivot(symbols, short_form);
    }
    if (!is_known_lang(spec, lang)) throw DataError("unknown synthetic language: " + lang);
    const int idx = lang[1] - '0';
    std::vector<std::string> out;
    out.reserve(symbols.size());
    for (int c : symbols) out.push_back(satellite_token(idx, c));
    return out;
}

DecodeOutcome content_decode(const SyntheticSpec& spec, const std::string& lang,
                             const std::vector<std::string>& tokens) {
    DecodeOutcome out;
    if (tokens.empty()) {
        out.status = DecodeOutcome::Status::kEmpty;
        return out;
    }
    for (const auto& t : tokens)
        if (!token_in_language(spec, lang, t)) {
            out.status = DecodeOutcome::Status::kForeignToken;
            return out;
        }
    // word-level lexicon after undoing continuation markers
    std::unordered_map<std::string, int> lexicon;
    if (is_pivot(lang)) {
        for (int c = 0; c < spec.alphabet_size; ++c) {
            lexicon.emplace(pivot_short_token(c), c);
            lexicon.emplace(pivot_long_word(c), c);
        }
    } else {
        const int idx = lang[1] - '0';
        for (int c = 0; c < spec.alphabet_size; ++c) lexicon.emplace(satellite_token(idx, c), c);
    }
    for (const auto& word : bpe_undo(tokens)) {
        auto it = lexicon.find(word);
        if (it == lexicon.end()) {
            out.status = DecodeOutcome::Status::kBadWord;
            out.symbols.clear();
            return out;
        }
        out.symbols.push_back(it->second);
    }
    out.status = DecodeOutcome::Status::kOk;
    return out;
}

std::vector<int> occurrence_salience(const std::vector<int>& symbols) {
    std::unordered_map<int, int> first;
    std::vector<int> sal(symbols.size());
    for (size_t i = 0; i < symbols.size(); ++i) {
        auto it = first.find(symbols[i]);
        if (it == first.end()) {
            first.emplace(symbols[i], static_cast<int>(i));
            sal[i] = static_cast<int>(i);
        } else {
            sal[i] = it->second;
        }
    }
    return sal;
}

std::vector<int> drop_lowest_salience(const std::vector<int>& symbols, int d) {
    const int k = static_cast<int>(symbols.size());
    if (d <= 0) return symbols;
    if (d >= k) d = k - 1;  // always keep at least one occurrence
    auto sal = occurrence_salience(symbols);
    std::vector<int> idx(symbols.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&sal](int a, int b) { return sal[a] < sal[b]; });
    std::vector<bool> dropped(symbols.size(), false);
    for (int i = 0; i < d; ++i) dropped[idx[i]] = true;
    std::vector<int> out;
    out.reserve(symbols.size() - d);
    for (size_t i = 0; i < symbols.size(); ++i)
        if (!dropped[i]) out.push_back(symbols[i]);
    return out;
}

std::vector<int> canonical_compress(const std::vector<int>& symbols, int budget) {
    const int k = static_cast<int>(symbols.size());
    if (budget >= k) return symbols;
    return drop_lowest_salience(symbols, k - std::max(1, budget));
}

ParallelCorpus generate(const SyntheticSpec& spec, int n_sentences, const std::string& src_lang,
                        const std::string& tgt_lang, const std::string& label) {
    spec.validate();
    if (!is_known_lang(spec, src_lang) || !is_known_lang(spec, tgt_lang))
        throw DataError("generate: unknown direction " + src_lang + "-" + tgt_lang);
    if (n_sentences < 1) throw DataError("generate: n_sentences must be >= 1");

    Rng rng = Rng(spec.seed).derive("synth/" + label + "/" + src_lang + "-" + tgt_lang);
    ParallelCorpus out;
    out.src_lines.reserve(n_sentences);
    out.tgt_lines.reserve(n_sentences);
    for (int i = 0; i < n_sentences; ++i) {
        const int k = spec.min_symbols + rng.uniform_int(spec.max_symbols - spec.min_symbols + 1);
        std::vector<int> symbols(k);
        for (auto& c : symbols) c = rng.uniform_int(spec.alphabet_size);
        int drops = 0;
        for (int s = 0; s < k; ++s)
            if (rng.bernoulli(spec.p_drop)) ++drops;
        auto kept = drop_lowest_salience(symbols, drops);

        out.src_lines.push_back(join_tokens(render(spec, src_lang, symbols, &rng)));
        out.tgt_lines.push_back(join_tokens(render(spec, tgt_lang, kept, &rng)));
    }
    return out;
}

}  // namespace synth
}  // namespace lcmt
