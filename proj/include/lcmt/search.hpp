#pragma once

// Constrained decoding. The hard length constraint never trusts the model:
// EOS probability is zeroed (and the rest renormalized) until exactly J
// tokens exist, then forced to one. The complexity constraint zeroes
// continuation ("...@@") tokens once the budget is spent and can also
// down-weight them every step by exp(-gamma). Every distribution handed to
// argmax/topk sums to 1 after any mask combination.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lcmt/error.hpp"
#include "lcmt/model.hpp"
#include "lcmt/vocab.hpp"

namespace lcmt {

struct Constraint {
    enum class Length { kNone, kSoft, kHard };
    Length length = Length::kNone;
    int target_len = 0;  // J, resolved per sentence
    bool has_complexity = false;
    long long budget = -1;  // B; < 0 means unlimited
    double gamma = 0.0;     // soft per-step penalty on continuation tokens

    static Constraint none() { return {}; }
    static Constraint soft(int j) { return {Length::kSoft, j, false, -1, 0.0}; }
    static Constraint hard(int j) { return {Length::kHard, j, false, -1, 0.0}; }
    Constraint& complexity(long long b, double g = 0.0) {
        has_complexity = true;
        budget = b;
        gamma = g;
        return *this;
    }
    std::string describe() const;
};

inline std::string Constraint::describe() const {
    std::string s = length == Length::kNone   ? "length=none"
                    : length == Length::kSoft ? "length=soft:" + std::to_string(target_len)
                                              : "length=hard:" + std::to_string(target_len);
    if (has_complexity)
        s += " complexity(budget=" + (budget < 0 ? std::string("inf") : std::to_string(budget)) +
             ", gamma=" + std::to_string(gamma) + ")";
    return s;
}

struct DecodeStats {
    long long degenerate_renorm = 0;   // p(EOS) was 1 before the length was reached
    long long complexity_fallback = 0; // all mass sat on continuation tokens
    long long cap_hits = 0;            // soft decode hit max_seq_len
};

struct Hypothesis {
    std::vector<int> tokens;  // no BOS; ends with EOS iff finished
    double log_prob = 0.0;
    long long continuation_count = 0;
    bool finished = false;

    int surface_len() const {  // tokens excluding EOS
        return static_cast<int>(tokens.size()) - (finished ? 1 : 0);
    }
};

namespace search_detail {

inline void renormalize(std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) sum += v;
    if (sum > 0.0)
        for (double& v : p) v /= sum;
}

inline double mass(const std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) sum += v;
    return sum;
}

}  // namespace search_detail

// §-style EOS manipulation. n_generated = tokens emitted so far; while
// n_generated < J the EOS mass is zeroed and the remainder renormalized;
// once n_generated >= J the distribution collapses onto EOS. `eligible`
// (optional) restricts the degenerate-case uniform fallback.
inline void eos_mask_renormalize(std::vector<double>& p, int n_generated, int target_len,
                                 int eos_id, const std::vector<uint8_t>* eligible = nullptr,
                                 DecodeStats* stats = nullptr) {
    if (eos_id < 0 || eos_id >= static_cast<int>(p.size()))
        throw Error("eos_mask_renormalize: bad EOS id");
    if (n_generated >= target_len) {
        std::fill(p.begin(), p.end(), 0.0);
        p[static_cast<size_t>(eos_id)] = 1.0;
        return;
    }
    const double eos_mass = p[static_cast<size_t>(eos_id)];
    p[static_cast<size_t>(eos_id)] = 0.0;
    const double denom = 1.0 - eos_mass;
    if (denom <= 1e-12) {
        // degenerate: the model put everything on EOS too early
        if (stats) ++stats->degenerate_renorm;
        long long n = 0;
        for (size_t i = 0; i < p.size(); ++i)
            if (static_cast<int>(i) != eos_id && (!eligible || (*eligible)[i])) ++n;
        if (n == 0) throw ConstraintConflict("no token eligible before the length target");
        const double u = 1.0 / static_cast<double>(n);
        for (size_t i = 0; i < p.size(); ++i)
            p[i] = (static_cast<int>(i) != eos_id && (!eligible || (*eligible)[i])) ? u : 0.0;
        return;
    }
    const double remaining = search_detail::mass(p);
    if (remaining <= 0.0) throw ConstraintConflict("no probability mass left before EOS");
    for (double& v : p) v /= remaining;  // exact renormalization of the non-EOS mass
}

// continuation-token budget: once `used` >= `budget` every token whose
// surface form ends in "@@" is zeroed; gamma > 0 additionally multiplies
// continuation-token mass by exp(-gamma) every step before renormalizing.
inline void complexity_mask(std::vector<double>& p, long long used, long long budget,
                            double gamma, const std::vector<uint8_t>& is_continuation,
                            int eos_id, const std::vector<uint8_t>* eligible = nullptr,
                            DecodeStats* stats = nullptr) {
    if (is_continuation.size() != p.size())
        throw Error("complexity_mask: continuation table size mismatch");
    if (gamma > 0.0) {
        const double w = std::exp(-gamma);
        for (size_t i = 0; i < p.size(); ++i)
            if (is_continuation[i]) p[i] *= w;
    }
    const bool exhausted = budget >= 0 && used >= budget;
    if (exhausted)
        for (size_t i = 0; i < p.size(); ++i)
            if (is_continuation[i]) p[i] = 0.0;
    const double sum = search_detail::mass(p);
    if (sum <= 1e-300) {
        // everything sat on continuation tokens: uniform over word-final
        // tokens, EOS excluded
        if (stats) ++stats->complexity_fallback;
        long long n = 0;
        for (size_t i = 0; i < p.size(); ++i)
            if (!is_continuation[i] && static_cast<int>(i) != eos_id &&
                (!eligible || (*eligible)[i]))
                ++n;
        if (n == 0)
            throw ConstraintConflict("complexity budget leaves no word-final token eligible");
        const double u = 1.0 / static_cast<double>(n);
        for (size_t i = 0; i < p.size(); ++i)
            p[i] = (!is_continuation[i] && static_cast<int>(i) != eos_id &&
                    (!eligible || (*eligible)[i]))
                       ? u
                       : 0.0;
        return;
    }
    for (double& v : p) v /= sum;
}

inline int count_continuation(const std::vector<int>& ids, const Vocabulary& vocab) {
    int n = 0;
    for (int id : ids)
        if (vocab.is_continuation(id)) ++n;
    return n;
}

namespace search_detail {

// tokens the search may emit at all: content tokens and EOS
inline std::vector<uint8_t> generation_mask(const Vocabulary& vocab) {
    std::vector<uint8_t> ok(static_cast<size_t>(vocab.size()), 0);
    for (int id = vocab.first_content_id(); id < vocab.size(); ++id) ok[id] = 1;
    ok[Vocabulary::kEos] = 1;
    return ok;
}

inline std::vector<uint8_t> continuation_table(const Vocabulary& vocab) {
    std::vector<uint8_t> cont(static_cast<size_t>(vocab.size()), 0);
    for (int id = 0; id < vocab.size(); ++id) cont[id] = vocab.is_continuation(id) ? 1 : 0;
    return cont;
}

template <class S>
void validate_constraint(const Transformer<S>& model, const Constraint& c) {
    if (c.length != Constraint::Length::kNone && c.target_len < 1)
        throw ConstraintConflict("length constraint without a positive target length");
    if (c.length == Constraint::Length::kHard &&
        c.target_len + 1 > model.config().max_seq_len)
        throw ConstraintConflict("hard length " + std::to_string(c.target_len) +
                                 " exceeds max_seq_len " +
                                 std::to_string(model.config().max_seq_len));
    if (model.needs_length() && c.length == Constraint::Length::kNone)
        throw ConstraintConflict("model mode " + to_string(model.config().length_mode) +
                                 " needs a length constraint (soft or hard)");
}

// one masked step distribution for a hypothesis
template <class S>
std::vector<double> step_distribution(const Transformer<S>& model, const Tensor<S>& memory,
                                      const Hypothesis& hyp, const Constraint& c,
                                      const std::vector<uint8_t>& gen_mask,
                                      const std::vector<uint8_t>& cont, DecodeStats* stats) {
    DecoderState<S> state;
    state.memory = memory;
    state.prefix = hyp.tokens;
    state.target_len = c.length == Constraint::Length::kNone ? 0 : c.target_len;
    auto logp = model.decode_step(state);
    std::vector<double> p(logp.size());
    for (size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logp[i]);

    // never emit PAD/BOS/UNK/tags/length tokens
    for (size_t i = 0; i < p.size(); ++i)
        if (!gen_mask[i]) p[i] = 0.0;
    renormalize(p);

    std::vector<uint8_t> eligible = gen_mask;
    try {
        if (c.has_complexity) {
            complexity_mask(p, hyp.continuation_count, c.budget, c.gamma, cont, Vocabulary::kEos,
                            &eligible, stats);
            if (c.budget >= 0 && hyp.continuation_count >= c.budget)
                for (size_t i = 0; i < p.size(); ++i)
                    if (cont[i]) eligible[i] = 0;
        }
        if (c.length == Constraint::Length::kHard)
            eos_mask_renormalize(p, static_cast<int>(hyp.tokens.size()), c.target_len,
                                 Vocabulary::kEos, &eligible, stats);
    } catch (const ConstraintConflict& e) {
        throw ConstraintConflict(std::string(e.what()) + " [" + c.describe() + "]");
    }
    if (mass(p) <= 0.0)
        throw ConstraintConflict("all hypotheses pruned by masks under " + c.describe());
    return p;
}

}  // namespace search_detail

template <class S>
Hypothesis greedy_decode(const Transformer<S>& model, const std::vector<int>& src_ids,
                         const Constraint& constraint, const Vocabulary& vocab,
                         DecodeStats* stats = nullptr) {
    search_detail::validate_constraint(model, constraint);
    const auto gen_mask = search_detail::generation_mask(vocab);
    const auto cont = search_detail::continuation_table(vocab);
    auto memory = model.encode(src_ids);

    Hypothesis hyp;
    const int max_steps = model.config().max_seq_len - 1;
    while (static_cast<int>(hyp.tokens.size()) < max_steps) {
        auto p = search_detail::step_distribution(model, memory, hyp, constraint, gen_mask, cont,
                                                  stats);
        int best = 0;
        for (int i = 1; i < static_cast<int>(p.size()); ++i)
            if (p[i] > p[best]) best = i;  // ties keep the lowest id
        hyp.log_prob += std::log(p[best]);
        hyp.tokens.push_back(best);
        if (cont[best]) ++hyp.continuation_count;
        if (best == Vocabulary::kEos) {
            hyp.finished = true;
            break;
        }
    }
    if (!hyp.finished && stats) ++stats->cap_hits;
    return hyp;
}

template <class S>
std::vector<Hypothesis> beam_search(const Transformer<S>& model, const std::vector<int>& src_ids,
                                    const Constraint& constraint, int beam_size,
                                    const Vocabulary& vocab, DecodeStats* stats = nullptr) {
    if (beam_size < 1) throw UsageError("beam size must be >= 1");
    search_detail::validate_constraint(model, constraint);
    const auto gen_mask = search_detail::generation_mask(vocab);
    const auto cont = search_detail::continuation_table(vocab);
    auto memory = model.encode(src_ids);

    const bool hard = constraint.length == Constraint::Length::kHard;
    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> done;
    const int max_steps = model.config().max_seq_len - 1;

    for (int step = 0; step < max_steps && !live.empty() &&
                       static_cast<int>(done.size()) < beam_size;
         ++step) {
        struct Cand {
            double score;
            int from;
            int token;
            double token_logp;
        };
        std::vector<Cand> cands;
        for (int h = 0; h < static_cast<int>(live.size()); ++h) {
            auto p = search_detail::step_distribution(model, memory, live[h], constraint,
                                                      gen_mask, cont, stats);
            for (int t = 0; t < static_cast<int>(p.size()); ++t)
                if (p[t] > 0.0)
                    cands.push_back({live[h].log_prob + std::log(p[t]), h, t, std::log(p[t])});
        }
        if (cands.empty())
            throw ConstraintConflict("beam collapse under " + constraint.describe());
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.token != b.token) return a.token < b.token;  // ties: lowest token id
            return a.from < b.from;
        });
        // top-2K window (top-1 at K=1 so beam_size 1 reproduces greedy exactly)
        const int consider = beam_size == 1 ? 1 : 2 * beam_size;
        std::vector<Hypothesis> next;
        int looked = 0;
        for (const auto& c : cands) {
            if (++looked > consider) break;
            Hypothesis h = live[c.from];
            h.log_prob = c.score;
            h.tokens.push_back(c.token);
            if (cont[c.token]) ++h.continuation_count;
            if (c.token == Vocabulary::kEos) {
                h.finished = true;
                done.push_back(std::move(h));
            } else if (static_cast<int>(next.size()) < beam_size) {
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
    }
    if (done.empty()) {
        // soft decode ran into the cap: return the live beams as-is
        if (stats) stats->cap_hits += static_cast<long long>(live.size());
        done = std::move(live);
    }
    // hard length: all candidates share length J, rank by raw log prob;
    // otherwise normalize by surface length
    auto rank = [hard](const Hypothesis& h) {
        const int len = std::max(1, h.surface_len());
        return hard ? h.log_prob : h.log_prob / static_cast<double>(len);
    };
    std::stable_sort(done.begin(), done.end(), [&rank](const Hypothesis& a, const Hypothesis& b) {
        return rank(a) > rank(b);
    });
    if (static_cast<int>(done.size()) > beam_size) done.resize(beam_size);
    return done;
}

}  // namespace lcmt
