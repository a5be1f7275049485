#pragma once

// End-to-end pipeline entry points shared by the CLI and the experiment
// drivers: corpus generation, training with validation-checkpoint
// averaging, constrained translation over files, and metric evaluation.
// Every function is deterministic under its seed; reruns produce
// byte-identical primary outputs.
//
// Randomness streams, all derived from the run's root seed:
//   init/<param>   parameter initialization
//   shuffle@epoch  batching order
//   step@n         dropout + word dropout inside training step n
//   synth/<label>  corpus generation

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lcmt/config.hpp"
#include "lcmt/optim.hpp"
#include "lcmt/search.hpp"
#include "lcmt/synth.hpp"

namespace lcmt {

struct GenDataOptions {
    std::string out_dir;
    SyntheticSpec spec;
    std::vector<std::pair<std::string, std::string>> directions;  // (src, tgt)
    int train_pairs = 20000;
    int valid_pairs = 1000;
    int test_pairs = 500;
};

// writes spec.json and {train,valid,test}.<src>-<tgt>.{src,tgt}
void generate_data(const GenDataOptions& opts);

struct DirectionFiles {
    std::string src_lang;
    std::string tgt_lang;
    std::string src_file;
    std::string tgt_file;
};

struct TrainOptions {
    std::vector<DirectionFiles> train;
    std::vector<DirectionFiles> valid;
    std::string out_dir;
    ModelConfig model;  // vocab_size is filled in from the data
    bool use_tags = false;
    int steps = 1500;
    int batch_max_tokens = 3000;
    int save_every = 250;
    int average_k = 3;
    uint64_t seed = 1;
    double lr = 2.0;  // schedule factor
    int warmup_steps = 300;
    // synthetic spec whose language token lists complete the vocabulary;
    // empty spec_path means corpus tokens only
    std::string spec_path;
    bool resume = false;
    bool quiet = false;
};

struct TrainResult {
    std::string model_path;
    std::string vocab_path;
    std::string out_dir;
    std::vector<std::pair<int, float>> val_log;  // (step, validation loss)
    float final_train_loss = 0.0f;
    int dropped_examples = 0;
};

TrainResult train_model(const TrainOptions& opts);

struct TranslateOptions {
    std::string model_path;
    std::string vocab_path;
    std::string src_file;
    std::string out_file;
    // none | soft | hard | oracle (oracle = hard with J from refs_file)
    std::string constraint = "none";
    double ratio = 0.8;
    std::string refs_file;     // oracle lengths
    std::string lengths_file;  // explicit per-sentence J (overrides ratio)
    long long complexity_budget = -1;
    std::string budget_file;   // per-sentence budgets
    double gamma = 0.0;
    int beam = 1;
    std::string target_lang;   // language tag for tagged models
    int precision_bits = 0;    // 0 = follow checkpoint
    bool quiet = false;
};

struct TranslateResult {
    DecodeStats stats;
    std::vector<int> target_lens;  // resolved J per sentence (0 when unconstrained)
    int sentences = 0;
};

TranslateResult translate_file(const TranslateOptions& opts);

struct EvaluateOptions {
    std::string hyp_file;
    std::string ref_file;
    std::string src_file;
    std::string spec_file;
    std::string lengths_file;
    std::vector<std::string> metrics;  // bleu, length, content, complexity
    std::string hyp_lang = "e";
    std::string src_lang = "l1";
    std::string out_json;  // structured summary, optional
};

// returns (metric, value) lines in a stable order
std::vector<std::pair<std::string, double>> evaluate_files(const EvaluateOptions& opts);

// key = value file with # comments; later keys win
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace lcmt
