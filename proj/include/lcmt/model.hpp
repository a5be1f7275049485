#pragma once

// Transformer encoder-decoder with a pluggable length representation.
// Pre-norm blocks with final layer norms; sentences run through the graph
// one at a time (no padding inside the model), so batches only amortize the
// optimizer step. The three length modes differ solely in how the decoder's
// first hidden representation is built:
//   none / source_token:  h0 = emb(y_{j-1}) * sqrt(d) + pe(j)
//   reverse_positional:   h0 = emb(y_{j-1}) * sqrt(d) + pe(max(0, J-j))
//   decoder_embedding:    h0' = relu(W_len . cat(h0, lenEmb(clip(J-j))) + b)
// source_token needs no model support at all; the data side prepends the
// <len_J> token to the source.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lcmt/config.hpp"
#include "lcmt/example.hpp"
#include "lcmt/ops.hpp"
#include "lcmt/rng.hpp"
#include "lcmt/tensor.hpp"
#include "lcmt/vocab.hpp"

namespace lcmt {

// standard sinusoidal vector; position 0 is [0,1,0,1,...]
template <class S>
std::vector<S> positional_encoding(int position, int d_model) {
    if (position < 0) throw Error("positional_encoding: negative position");
    std::vector<S> pe(d_model);
    for (int i = 0; i + 1 < d_model; i += 2) {
        const double freq = std::pow(10000.0, static_cast<double>(i) / d_model);
        pe[i] = static_cast<S>(std::sin(position / freq));
        pe[i + 1] = static_cast<S>(std::cos(position / freq));
    }
    return pe;
}

template <class S>
struct DecoderState {
    Tensor<S> memory;          // encoder output, [T_src, d_model]
    std::vector<int> prefix;   // y_1..y_{j-1}, no BOS
    int target_len = 0;        // J; 0 when the mode ignores length
    int step() const { return static_cast<int>(prefix.size()) + 1; }  // j
};

template <class S>
class Transformer {
  public:
    Transformer() = default;

    Transformer(ModelConfig cfg, Rng init_rng) : cfg_(cfg) {
        cfg_.validate();
        build_params();
        init_params(init_rng);
        build_pe_table();
    }

    Transformer(ModelConfig cfg, std::map<std::string, Tensor<S>> params)
        : cfg_(cfg), params_(std::move(params)) {
        cfg_.validate();
        check_params();
        build_pe_table();
    }

    const ModelConfig& config() const { return cfg_; }
    std::map<std::string, Tensor<S>>& params() { return params_; }
    const std::map<std::string, Tensor<S>>& params() const { return params_; }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& [name, p] : params_) n += p.numel();
        return n;
    }

    // --- forward -----------------------------------------------------------

    Tensor<S> encode(const std::vector<int>& src_ids, bool training = false,
                     Rng* rng = nullptr) const {
        if (src_ids.empty()) throw DataError("encode: empty source");
        if (static_cast<int>(src_ids.size()) > cfg_.max_seq_len)
            throw DataError("encode: source longer than max_seq_len");
        const int t = static_cast<int>(src_ids.size());
        auto x = ops::scale(ops::embedding_lookup(p("tok_emb"), src_ids),
                            static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model))));
        x = ops::add(x, pe_rows_for(absolute_positions(t)));
        x = drop(x, training, rng);
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string base = "enc." + std::to_string(l) + ".";
            auto a = ops::layer_norm(x, p(base + "ln1.g"), p(base + "ln1.b"));
            x = ops::add(x, drop(attention(base + "attn.", a, a, nullptr, training, rng),
                                 training, rng));
            auto f = ops::layer_norm(x, p(base + "ln2.g"), p(base + "ln2.b"));
            x = ops::add(x, drop(feed_forward(base + "ff.", f), training, rng));
        }
        return ops::layer_norm(x, p("enc.final.g"), p("enc.final.b"));
    }

    // decoder hidden states for teacher-forced input [BOS, y_1..y_J];
    // row r corresponds to step j = r + 1
    Tensor<S> decoder_hidden(const Tensor<S>& memory, const std::vector<int>& tgt_in,
                             int target_len, bool training = false, Rng* rng = nullptr) const {
        if (tgt_in.empty()) throw DataError("decoder_hidden: empty target input");
        if (static_cast<int>(tgt_in.size()) > cfg_.max_seq_len)
            throw DataError("decoder_hidden: target longer than max_seq_len");
        if (needs_length() && target_len < 1)
            throw DataError("missing target length annotation under length mode " +
                            to_string(cfg_.length_mode));
        const int t = static_cast<int>(tgt_in.size());

        auto x = decoder_input_rows(tgt_in, target_len);
        x = drop(x, training, rng);

        auto mask = causal_mask(t);
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string base = "dec." + std::to_string(l) + ".";
            auto a = ops::layer_norm(x, p(base + "ln1.g"), p(base + "ln1.b"));
            x = ops::add(x, drop(attention(base + "self.", a, a, &mask, training, rng),
                                 training, rng));
            auto c = ops::layer_norm(x, p(base + "ln2.g"), p(base + "ln2.b"));
            x = ops::add(x, drop(attention(base + "cross.", c, memory, nullptr, training, rng),
                                 training, rng));
            auto f = ops::layer_norm(x, p(base + "ln3.g"), p(base + "ln3.b"));
            x = ops::add(x, drop(feed_forward(base + "ff.", f), training, rng));
        }
        return ops::layer_norm(x, p("dec.final.g"), p("dec.final.b"));
    }

    Tensor<S> output_logits(const Tensor<S>& hidden) const {
        return ops::linear(hidden, p("out.w"), p("out.b"));
    }

    // mean token-level cross entropy with teacher forcing over a batch;
    // word dropout swaps input tokens >= content_floor_id for UNK
    Tensor<S> forward_loss(const std::vector<Example>& batch, bool training, Rng& rng,
                           int content_floor_id = 4) const {
        if (batch.empty()) throw DataError("forward_loss: empty batch");
        Tensor<S> total;
        int64_t n_tokens = 0;
        for (const auto& ex : batch) {
            if (ex.tgt_ids.empty()) throw DataError("forward_loss: empty target");
            if (needs_length() && ex.target_len < 1)
                throw DataError("missing J annotation under length mode " +
                                to_string(cfg_.length_mode));
            std::vector<int> src = ex.src_ids;
            std::vector<int> tgt_in;
            tgt_in.reserve(ex.tgt_ids.size() + 1);
            tgt_in.push_back(Vocabulary::kBos);
            tgt_in.insert(tgt_in.end(), ex.tgt_ids.begin(), ex.tgt_ids.end());
            if (training && cfg_.word_dropout > 0.0) {
                word_dropout(src, rng, cfg_.word_dropout, content_floor_id);
                word_dropout(tgt_in, rng, cfg_.word_dropout, content_floor_id);
            }
            std::vector<int> tgt_out = ex.tgt_ids;
            tgt_out.push_back(Vocabulary::kEos);

            auto memory = encode(src, training, &rng);
            auto hidden = decoder_hidden(memory, tgt_in, ex.target_len, training, &rng);
            auto ce = ops::cross_entropy(output_logits(hidden), tgt_out);
            total = total.defined() ? ops::add(total, ce) : ce;
            n_tokens += static_cast<int64_t>(tgt_out.size());
        }
        return ops::scale(total, static_cast<S>(1.0 / static_cast<double>(n_tokens)));
    }

    // log probabilities over the vocabulary for the next token
    std::vector<double> decode_step(const DecoderState<S>& state) const {
        NoGradGuard guard;
        std::vector<int> tgt_in;
        tgt_in.reserve(state.prefix.size() + 1);
        tgt_in.push_back(Vocabulary::kBos);
        tgt_in.insert(tgt_in.end(), state.prefix.begin(), state.prefix.end());
        auto hidden = decoder_hidden(state.memory, tgt_in, state.target_len, false, nullptr);
        const int t = hidden.shape()[0];
        auto last = ops::slice_last_dim(ops::transpose(hidden), t - 1, 1);  // [d, 1]
        auto logits = output_logits(ops::transpose(last));                  // [1, V]
        auto logp = ops::log_softmax(logits);
        std::vector<double> out(logp.value().size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(logp.value()[i]);
        return out;
    }

    // single decoder-input row for step j of a J-token target (test hook)
    Tensor<S> decoder_input(int prev_token, int j, int target_len) const {
        if (j < 1 || (needs_length() && target_len < 1))
            throw DataError("decoder_input: j and J must be >= 1");
        NoGradGuard guard;
        return decoder_input_row(prev_token, j, target_len);
    }

    bool needs_length() const {
        return cfg_.length_mode == LengthMode::kDecoderEmbedding ||
               cfg_.length_mode == LengthMode::kReversePositional;
    }

    int remaining_index(int j, int target_len) const {
        const int r = target_len - j;
        return std::min(cfg_.max_len_index, std::max(0, r));
    }

  private:
    // --- parameters ---------------------------------------------------------

    void build_params() {
        auto mat = [&](const std::string& name, int r, int c) {
            params_.emplace(name, Tensor<S>::zeros({r, c}, true));
        };
        auto vec = [&](const std::string& name, int n) {
            params_.emplace(name, Tensor<S>::zeros({n}, true));
        };
        const int d = cfg_.d_model, f = cfg_.d_ff, v = cfg_.vocab_size;
        mat("tok_emb", v, d);
        mat("out.w", d, v);
        vec("out.b", v);
        auto attn = [&](const std::string& base) {
            for (const char* w : {"wq", "wk", "wv", "wo"}) mat(base + w, d, d);
            for (const char* b : {"bq", "bk", "bv", "bo"}) vec(base + b, d);
        };
        auto norm = [&](const std::string& base) {
            vec(base + "g", d);
            vec(base + "b", d);
        };
        for (int l = 0; l < cfg_.n_layers; ++l) {
            const std::string e = "enc." + std::to_string(l) + ".";
            norm(e + "ln1.");
            attn(e + "attn.");
            norm(e + "ln2.");
            mat(e + "ff.w1", d, f);
            vec(e + "ff.b1", f);
            mat(e + "ff.w2", f, d);
            vec(e + "ff.b2", d);
            const std::string dd = "dec." + std::to_string(l) + ".";
            norm(dd + "ln1.");
            attn(dd + "self.");
            norm(dd + "ln2.");
            attn(dd + "cross.");
            norm(dd + "ln3.");
            mat(dd + "ff.w1", d, f);
            vec(dd + "ff.b1", f);
            mat(dd + "ff.w2", f, d);
            vec(dd + "ff.b2", d);
        }
        norm("enc.final.");
        norm("dec.final.");
        if (cfg_.length_mode == LengthMode::kDecoderEmbedding) {
            mat("len_emb", cfg_.max_len_index + 1, cfg_.d_len);
            mat("len_proj.w", d + cfg_.d_len, d);
            vec("len_proj.b", d);
        }
    }

    void init_params(const Rng& root) {
        for (auto& [name, t] : params_) {
            Rng rng = root.derive("init/" + name);
            const bool is_gain = name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0;
            const bool is_embedding = name == "tok_emb" || name == "len_emb";
            if (t.rank() == 1) {
                const S fill = is_gain ? S(1) : S(0);
                for (auto& v : t.value()) v = fill;
            } else if (is_embedding) {
                const double sd = 1.0 / std::sqrt(static_cast<double>(t.shape()[1]));
                for (auto& v : t.value()) v = static_cast<S>(rng.gaussian() * sd);
            } else {
                const double span =
                    std::sqrt(6.0 / static_cast<double>(t.shape()[0] + t.shape()[1]));
                for (auto& v : t.value()) v = static_cast<S>(rng.uniform(-span, span));
            }
        }
    }

    void check_params() const {
        Transformer<S> ref;
        ref.cfg_ = cfg_;
        ref.build_params();
        if (ref.params_.size() != params_.size())
            throw DataError("parameter map does not match config (count)");
        auto it = params_.begin();
        for (const auto& [name, t] : ref.params_) {
            if (it->first != name)
                throw DataError("parameter map does not match config: expected " + name +
                                ", found " + it->first);
            if (it->second.shape() != t.shape())
                throw DataError("parameter " + name + " has shape " +
                                shape_str(it->second.shape()) + ", expected " +
                                shape_str(t.shape()));
            ++it;
        }
    }

    const Tensor<S>& p(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw Error("missing parameter: " + name);
        return it->second;
    }

    // --- blocks --------------------------------------------------------------

    Tensor<S> attention(const std::string& base, const Tensor<S>& q_in, const Tensor<S>& kv_in,
                        const Tensor<S>* mask, bool training, Rng* rng) const {
        const int dk = cfg_.d_model / cfg_.n_heads;
        auto q = ops::linear(q_in, p(base + "wq"), p(base + "bq"));
        auto k = ops::linear(kv_in, p(base + "wk"), p(base + "bk"));
        auto v = ops::linear(kv_in, p(base + "wv"), p(base + "bv"));
        std::vector<Tensor<S>> heads;
        heads.reserve(cfg_.n_heads);
        const S inv_sqrt_dk = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
        for (int h = 0; h < cfg_.n_heads; ++h) {
            auto qh = ops::slice_last_dim(q, h * dk, dk);
            auto kh = ops::slice_last_dim(k, h * dk, dk);
            auto vh = ops::slice_last_dim(v, h * dk, dk);
            auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt_dk);
            if (mask) scores = ops::add(scores, *mask);
            auto probs = drop(ops::softmax(scores), training, rng);
            heads.push_back(ops::matmul(probs, vh));
        }
        return ops::linear(ops::concat_last_dim(heads), p(base + "wo"), p(base + "bo"));
    }

    Tensor<S> feed_forward(const std::string& base, const Tensor<S>& x) const {
        auto h = ops::relu(ops::linear(x, p(base + "w1"), p(base + "b1")));
        return ops::linear(h, p(base + "w2"), p(base + "b2"));
    }

    Tensor<S> drop(const Tensor<S>& x, bool training, Rng* rng) const {
        if (!training || cfg_.dropout == 0.0 || rng == nullptr) return x;
        return ops::dropout(x, cfg_.dropout, *rng, true);
    }

    static void word_dropout(std::vector<int>& ids, Rng& rng, double rate, int floor_id) {
        for (auto& id : ids)
            if (id >= floor_id && rng.bernoulli(rate)) id = Vocabulary::kUnk;
    }

    // --- decoder input construction -----------------------------------------

    std::vector<int> absolute_positions(int t) const {
        std::vector<int> pos(t);
        for (int i = 0; i < t; ++i) pos[i] = std::min(i + 1, cfg_.max_len_index);
        return pos;
    }

    Tensor<S> pe_rows_for(const std::vector<int>& positions) const {
        const int d = cfg_.d_model;
        std::vector<S> rows(positions.size() * static_cast<size_t>(d));
        for (size_t r = 0; r < positions.size(); ++r)
            std::copy_n(pe_table_.data() + static_cast<size_t>(positions[r]) * d, d,
                        rows.data() + r * d);
        return Tensor<S>::from({static_cast<int>(positions.size()), d}, std::move(rows));
    }

    Tensor<S> decoder_input_rows(const std::vector<int>& tgt_in, int target_len) const {
        const int t = static_cast<int>(tgt_in.size());
        auto base = ops::scale(ops::embedding_lookup(p("tok_emb"), tgt_in),
                               static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model))));
        switch (cfg_.length_mode) {
            case LengthMode::kNone:
            case LengthMode::kSourceToken:
                return ops::add(base, pe_rows_for(absolute_positions(t)));
            case LengthMode::kReversePositional: {
                std::vector<int> pos(t);
                for (int r = 0; r < t; ++r) pos[r] = remaining_index(r + 1, target_len);
                return ops::add(base, pe_rows_for(pos));
            }
            case LengthMode::kDecoderEmbedding: {
                auto h0 = ops::add(base, pe_rows_for(absolute_positions(t)));
                std::vector<int> rem(t);
                for (int r = 0; r < t; ++r) rem[r] = remaining_index(r + 1, target_len);
                auto len_rows = ops::embedding_lookup(p("len_emb"), rem);
                auto cat = ops::concat_last_dim<S>({h0, len_rows});
                return ops::relu(ops::linear(cat, p("len_proj.w"), p("len_proj.b")));
            }
        }
        throw Error("unreachable length mode");
    }

    Tensor<S> decoder_input_row(int prev_token, int j, int target_len) const {
        return decoder_input_rows_at(prev_token, j, target_len);
    }

    Tensor<S> decoder_input_rows_at(int prev_token, int j, int target_len) const {
        // single row built through the same machinery: fake a prefix of length j
        // whose last token is prev_token, then keep the last row
        auto base = ops::scale(ops::embedding_lookup(p("tok_emb"), {prev_token}),
                               static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model))));
        switch (cfg_.length_mode) {
            case LengthMode::kNone:
            case LengthMode::kSourceToken:
                return ops::add(base, pe_rows_for({std::min(j, cfg_.max_len_index)}));
            case LengthMode::kReversePositional:
                return ops::add(base, pe_rows_for({remaining_index(j, target_len)}));
            case LengthMode::kDecoderEmbedding: {
                auto h0 = ops::add(base, pe_rows_for({std::min(j, cfg_.max_len_index)}));
                auto len_rows =
                    ops::embedding_lookup(p("len_emb"), {remaining_index(j, target_len)});
                auto cat = ops::concat_last_dim<S>({h0, len_rows});
                return ops::relu(ops::linear(cat, p("len_proj.w"), p("len_proj.b")));
            }
        }
        throw Error("unreachable length mode");
    }

    Tensor<S> causal_mask(int t) const {
        std::vector<S> m(static_cast<size_t>(t) * t, S(0));
        for (int r = 0; r < t; ++r)
            for (int c = r + 1; c < t; ++c) m[static_cast<size_t>(r) * t + c] = S(-1e9);
        return Tensor<S>::from({t, t}, std::move(m));
    }

    void build_pe_table() {
        const int d = cfg_.d_model;
        pe_table_.assign(static_cast<size_t>(cfg_.max_len_index + 1) * d, S(0));
        for (int pos = 0; pos <= cfg_.max_len_index; ++pos) {
            auto row = positional_encoding<S>(pos, d);
            std::copy(row.begin(), row.end(), pe_table_.begin() + static_cast<size_t>(pos) * d);
        }
    }

    ModelConfig cfg_;
    std::map<std::string, Tensor<S>> params_;
    std::vector<S> pe_table_;
};

// element-wise arithmetic mean of named parameter maps
template <class S>
std::map<std::string, Tensor<S>> average_checkpoints(
    const std::vector<std::map<std::string, Tensor<S>>>& checkpoints) {
    if (checkpoints.empty()) throw DataError("average_checkpoints: no checkpoints");
    const auto& first = checkpoints.front();
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, t] : first) {
        std::vector<double> acc(t.numel(), 0.0);
        for (const auto& ck : checkpoints) {
            auto it = ck.find(name);
            if (it == ck.end())
                throw DataError("average_checkpoints: parameter " + name + " missing");
            if (it->second.shape() != t.shape())
                throw DataError("average_checkpoints: shape mismatch for " + name);
            if (ck.size() != first.size())
                throw DataError("average_checkpoints: parameter name sets differ");
            for (size_t i = 0; i < acc.size(); ++i)
                acc[i] += static_cast<double>(it->second.value()[i]);
        }
        std::vector<S> mean(acc.size());
        const double inv = 1.0 / static_cast<double>(checkpoints.size());
        for (size_t i = 0; i < acc.size(); ++i) mean[i] = static_cast<S>(acc[i] * inv);
        out.emplace(name, Tensor<S>::from(t.shape(), std::move(mean), true));
    }
    return out;
}

}  // namespace lcmt
