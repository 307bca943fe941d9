#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mohe/data.hpp"
#include "mohe/model.hpp"
#include "mohe/text.hpp"

namespace mohe {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    AdamConfig adam;
    bool shuffle = true;
    std::size_t eval_every = 0; // 0: no mid-training evaluation
};

struct EpochStats {
    std::size_t epoch = 0; // 1-based
    double mean_loss = 0.0;
    std::optional<double> macro_f1;
    std::optional<double> micro_f1;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

struct VocabConfig {
    std::size_t min_freq = 1;
    std::size_t max_size = 100000;
};

// Per-mode vocabularies shared by the threads that use the mode, plus one
// vocabulary per metadata thread.
struct VocabSet {
    std::map<std::string, Vocab> by_key; // word / char / bigram / meta0, meta1, ...

    const Vocab& for_mode(TokenMode mode) const;
    const Vocab& for_meta(std::size_t index) const;
};

// Tokens a metadata thread reads from one item, in source order; field
// values are prefixed with their field name ("shop:...", "tag:...").
std::vector<std::string> meta_tokens(const ItemRecord& item,
                                     const MetaThreadSpec& spec);

VocabSet build_vocabs(const std::vector<ItemRecord>& items,
                      const ModelConfig& cfg, const VocabConfig& vc);

// Sorted class-label table (genre paths joined with '>', truncated to
// `level` when level > 0).
std::vector<std::string> build_label_table(const std::vector<ItemRecord>& items,
                                           std::size_t level);

struct EncodedDataset {
    std::vector<ItemInputs> items;
    std::vector<std::string> ids; // aligned with items
    std::size_t classes = 0;
};

// Encodes every item for every thread of the model. Items whose label is
// absent from the table get label -1 (they can be scored but not trained).
EncodedDataset prepare_dataset(const std::vector<ItemRecord>& items,
                               const ModelConfig& cfg, const VocabSet& vocabs,
                               const std::vector<std::string>& labels,
                               std::size_t level);

// Seeded batching: when shuffling, the index permutation comes from a
// Fisher-Yates pass over [0, n) using Rng(seed); batches are consecutive
// slices and the last one may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   bool shuffle);

// Mini-batch training. Per-batch loss is the arithmetic mean of Eq-style
// per-item losses; gradients accumulate in item order before one Adam step.
// Dropout draws for item i in epoch e come from the stream
// mix_seed(seed, "dropout", e, i), so results are independent of batching
// internals and bit-reproducible for a fixed config.
TrainHistory train(Model& model, const EncodedDataset& data,
                   const EncodedDataset* eval_data, const TrainConfig& tc);

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path);

} // namespace mohe
