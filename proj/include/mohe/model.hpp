#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mohe/optimizer.hpp"
#include "mohe/tensor.hpp"
#include "mohe/text.hpp"

namespace mohe {

enum class Framework { ensemble, moe, aggregator, mohe1, mohe2 };

Framework framework_from_string(std::string_view s);
std::string to_string(Framework f);
std::vector<std::string> framework_names();

// min(ceil(C/2), 100)
std::size_t embedding_dim_rule(std::size_t classes);

struct ThreadSpec {
    TokenMode mode = TokenMode::word;
    std::size_t kernel = 3;
    std::size_t filters = 100;
    std::size_t length = 60;
    std::size_t embed_dim = 0; // 0: use embedding_dim_rule(classes)
};

// Metadata estimator thread; the encoder kernel size is fixed to one so the
// thread acts as a keyword finder.
struct MetaThreadSpec {
    std::vector<std::string> sources; // of: shop_id, tag_ids, description
    std::size_t filters = 100;
    std::size_t length = 10;
    std::size_t embed_dim = 0;
};

struct ModelConfig {
    Framework framework = Framework::mohe2;
    std::size_t classes = 0;
    double dropout = 0.1;
    std::vector<ThreadSpec> threads;         // empty: default_thread_specs()
    std::vector<MetaThreadSpec> meta_threads;
    int meta_method = 1;                     // 1 or 2
    std::vector<double> gammas;              // empty: equal over all heads
    std::size_t slp_dim = 0;                 // 0: per-thread filter count

    void validate() const;
    bool has_thread_heads() const;
    bool has_aggregator() const;
};

// The seven baseline threads: word kernels 3/4/5, char kernels 5/15/25,
// token-bigram kernel 3; filters 100/100/100/300/300/300/100; input lengths
// 60 for word/bigram and 100 for char.
std::vector<ThreadSpec> default_thread_specs();

// Default metadata layout: shop and tag ids share one thread, description
// gets its own.
std::vector<MetaThreadSpec> default_meta_thread_specs();

struct ItemInputs {
    std::vector<EncodedSequence> threads; // per thread; a single shared entry for moe
    std::vector<EncodedSequence> meta;    // per meta thread
    std::int32_t label = -1;              // -1: unlabeled
};

struct HeadOutputs {
    std::vector<Tensor> thread_probs;         // g_1..g_T
    std::optional<Tensor> aggregator_probs;   // g_{T+1}
    std::vector<Tensor> embedded;             // V_t
    std::vector<Tensor> pooled;               // u_t
    std::vector<Tensor> slp;                  // s_t (mohe2)
    std::vector<Tensor> meta_pooled;          // u_meta
    std::optional<Tensor> gate;               // moe gate probabilities
    std::optional<Tensor> mixture;            // moe mixture
    std::optional<Tensor> loss;               // present when a label was given
};

class Model {
public:
    Model(ModelConfig cfg, std::vector<std::size_t> thread_vocab_sizes,
          std::vector<std::size_t> meta_vocab_sizes, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::size_t thread_count() const { return cfg_.threads.size(); }
    const std::vector<std::size_t>& thread_vocab_sizes() const { return thread_vocabs_; }
    const std::vector<std::size_t>& meta_vocab_sizes() const { return meta_vocabs_; }

    // Builds the forward graph for one item. Dropout draws come from `rng`
    // in train mode (two masks per thread, meta threads first, then
    // estimator threads, then moe gate). A label >= 0 adds the framework
    // loss to the graph.
    HeadOutputs forward(Tape& tape, const ItemInputs& x, RunMode mode,
                        Rng* rng) const;

    // Inference distribution for one item (fresh gradient-free tape).
    std::vector<double> predict(const ItemInputs& x) const;

    // Per-head gammas in head order g_1..g_T, g_{T+1}, after framework
    // adjustment. Not meaningful for moe.
    std::vector<double> effective_gammas() const;

private:
    ModelConfig cfg_;
    std::vector<std::size_t> thread_vocabs_;
    std::vector<std::size_t> meta_vocabs_;
    ParamStore params_;

    std::size_t embed_dim(std::size_t declared) const;
    std::size_t slp_out_dim(std::size_t t) const;
    std::size_t meta_width() const;
    void build_params(std::uint64_t seed);

    Tensor encoder_stack(Tape& tape, const std::string& prefix,
                         const EncodedSequence& x, RunMode mode, Rng* rng,
                         Tensor* embedded_out) const;
};

// Eq.-style weighted sum of per-head cross entropies on explicit
// distributions; heads are ordered g_1..g_T, g_{T+1}.
double combined_loss_value(std::size_t target,
                           const std::vector<std::vector<double>>& heads,
                           const std::vector<double>& gammas);

// Head-averaged class posterior per framework. argmax ties resolve to the
// lowest class index (argmax_lowest).
std::vector<double> predict_distribution(const HeadOutputs& heads, Framework fw);

} // namespace mohe
