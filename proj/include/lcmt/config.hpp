#pragma once

#include <string>

#include "lcmt/error.hpp"

namespace lcmt {

// how the target length reaches the model
enum class LengthMode {
    kNone = 0,              // length ignored by the model
    kSourceToken = 1,       // <len_J> token prepended to the source (data-side)
    kDecoderEmbedding = 2,  // remaining-length embedding mixed into decoder input
    kReversePositional = 3  // positional encoding indexes remaining length
};

inline std::string to_string(LengthMode m) {
    switch (m) {
        case LengthMode::kNone: return "none";
        case LengthMode::kSourceToken: return "source_token";
        case LengthMode::kDecoderEmbedding: return "decoder_embedding";
        case LengthMode::kReversePositional: return "reverse_positional";
    }
    return "none";
}

inline LengthMode length_mode_from_string(const std::string& s) {
    if (s == "none") return LengthMode::kNone;
    if (s == "source_token") return LengthMode::kSourceToken;
    if (s == "decoder_embedding") return LengthMode::kDecoderEmbedding;
    if (s == "reverse_positional") return LengthMode::kReversePositional;
    throw UsageError("unknown length mode: " + s);
}

struct ModelConfig {
    int n_layers = 2;
    int d_model = 64;
    int d_ff = 256;
    int n_heads = 4;
    double dropout = 0.2;
    double word_dropout = 0.1;
    int max_seq_len = 48;
    int max_len_index = 48;  // L_max: remaining lengths and <len_J> clip here
    int d_len = 8;           // length-embedding width
    int vocab_size = 0;
    LengthMode length_mode = LengthMode::kNone;
    int precision_bits = 32;

    void validate() const {
        if (d_model <= 0 || n_layers <= 0 || d_ff <= 0 || n_heads <= 0)
            throw UsageError("model dimensions must be positive");
        if (d_model % n_heads != 0)
            throw UsageError("d_model (" + std::to_string(d_model) +
                             ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
        if (max_len_index < max_seq_len)
            throw UsageError("max_len_index must be >= max_seq_len");
        if (d_len <= 0) throw UsageError("d_len must be positive");
        if (vocab_size <= 4) throw UsageError("vocab_size not set");
        if (precision_bits != 32 && precision_bits != 64)
            throw UsageError("precision must be 32 or 64 bits");
        if (dropout < 0.0 || dropout >= 1.0 || word_dropout < 0.0 || word_dropout >= 1.0)
            throw UsageError("dropout rates must be in [0, 1)");
    }
};

}  // namespace lcmt
