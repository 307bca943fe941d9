#include "mohe/model.hpp"

#include <algorithm>
#include <cmath>

namespace mohe {

Framework framework_from_string(std::string_view s) {
    if (s == "ensemble") return Framework::ensemble;
    if (s == "moe") return Framework::moe;
    if (s == "aggregator") return Framework::aggregator;
    if (s == "mohe1") return Framework::mohe1;
    if (s == "mohe2") return Framework::mohe2;
    throw UsageError("unknown framework: " + std::string(s) +
                     " (valid: ensemble, moe, aggregator, mohe1, mohe2)");
}

std::string to_string(Framework f) {
    switch (f) {
        case Framework::ensemble: return "ensemble";
        case Framework::moe: return "moe";
        case Framework::aggregator: return "aggregator";
        case Framework::mohe1: return "mohe1";
        case Framework::mohe2: return "mohe2";
    }
    return "mohe2";
}

std::vector<std::string> framework_names() {
    return {"ensemble", "moe", "aggregator", "mohe1", "mohe2"};
}

std::size_t embedding_dim_rule(std::size_t classes) {
    if (classes == 0) throw ConfigError("embedding_dim_rule: class count must be >= 1");
    return std::min<std::size_t>((classes + 1) / 2, 100);
}

std::vector<ThreadSpec> default_thread_specs() {
    return {
        {TokenMode::word, 3, 100, 60, 0},  {TokenMode::word, 4, 100, 60, 0},
        {TokenMode::word, 5, 100, 60, 0},  {TokenMode::character, 5, 300, 100, 0},
        {TokenMode::character, 15, 300, 100, 0},
        {TokenMode::character, 25, 300, 100, 0},
        {TokenMode::bigram, 3, 100, 60, 0},
    };
}

std::vector<MetaThreadSpec> default_meta_thread_specs() {
    return {
        {{"shop_id", "tag_ids"}, 100, 10, 0},
        {{"description"}, 100, kDescriptionMaxLength, 0},
    };
}

bool ModelConfig::has_thread_heads() const {
    return framework == Framework::ensemble || framework == Framework::mohe1 ||
           framework == Framework::mohe2;
}

bool ModelConfig::has_aggregator() const {
    return framework == Framework::aggregator || framework == Framework::mohe1 ||
           framework == Framework::mohe2;
}

void ModelConfig::validate() const {
    if (classes < 2) throw ConfigError("model: class count must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("model: dropout rate must lie in [0, 1)");
    if (threads.empty()) throw ConfigError("model: at least one thread required");
    for (const ThreadSpec& t : threads) {
        if (t.kernel < 1 || t.filters < 1 || t.length < 1)
            throw ConfigError("model: thread kernel/filters/length must be >= 1");
    }
    if (meta_method != 1 && meta_method != 2)
        throw ConfigError("model: meta_method must be 1 or 2");
    if (!meta_threads.empty()) {
        if (framework == Framework::moe)
            throw ConfigError("model: metadata threads are not supported for moe");
        if (meta_method == 2 && framework != Framework::mohe2)
            throw ConfigError("model: meta_method 2 requires the mohe2 framework");
        for (const MetaThreadSpec& m : meta_threads) {
            if (m.sources.empty())
                throw ConfigError("model: metadata thread without sources");
            for (const std::string& s : m.sources)
                if (s != "shop_id" && s != "tag_ids" && s != "description")
                    throw ConfigError("model: unknown metadata source: " + s);
            if (m.filters < 1 || m.length < 1)
                throw ConfigError("model: metadata filters/length must be >= 1");
        }
    }
    if (!gammas.empty() &&
        (framework == Framework::mohe1 || framework == Framework::mohe2)) {
        if (gammas.size() != threads.size() + 1)
            throw ConfigError("model: gammas must have one entry per head");
        double sum = 0.0;
        for (double g : gammas) {
            if (g < 0.0) throw ConfigError("model: gammas must be non-negative");
            sum += g;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("model: gammas must sum to 1");
    }
}

Model::Model(ModelConfig cfg, std::vector<std::size_t> thread_vocab_sizes,
             std::vector<std::size_t> meta_vocab_sizes, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      thread_vocabs_(std::move(thread_vocab_sizes)),
      meta_vocabs_(std::move(meta_vocab_sizes)) {
    if (cfg_.threads.empty()) cfg_.threads = default_thread_specs();
    cfg_.validate();
    const std::size_t need =
        cfg_.framework == Framework::moe ? 1 : cfg_.threads.size();
    if (thread_vocabs_.size() < need)
        throw ConfigError("model: vocabulary size missing for a thread");
    if (meta_vocabs_.size() != cfg_.meta_threads.size())
        throw ConfigError("model: vocabulary size missing for a metadata thread");
    for (std::size_t v : thread_vocabs_)
        if (v < 2) throw ConfigError("model: vocabulary must include PAD and UNK");
    build_params(seed);
}

std::size_t Model::embed_dim(std::size_t declared) const {
    return declared ? declared : embedding_dim_rule(cfg_.classes);
}

std::size_t Model::slp_out_dim(std::size_t t) const {
    return cfg_.slp_dim ? cfg_.slp_dim : cfg_.threads[t].filters;
}

std::size_t Model::meta_width() const {
    std::size_t w = 0;
    for (const MetaThreadSpec& m : cfg_.meta_threads) w += m.filters;
    return w;
}

void Model::build_params(std::uint64_t seed) {
    const std::size_t C = cfg_.classes;
    auto add_encoder = [&](const std::string& prefix, std::size_t vocab,
                           std::size_t kernel, std::size_t filters,
                           std::size_t dim) {
        params_.add_uniform(prefix + ".embedding", {vocab, dim}, -0.05, 0.05, seed);
        params_.add_glorot(prefix + ".conv.kernel", {kernel, dim, filters},
                           kernel * dim, kernel * filters, seed);
        params_.add_zeros(prefix + ".conv.bias", {filters});
        params_.add_constant(prefix + ".ln.gain", {filters}, 1.0);
        params_.add_zeros(prefix + ".ln.offset", {filters});
    };

    if (cfg_.framework == Framework::moe) {
        const ThreadSpec& spec = cfg_.threads.front();
        const std::size_t D = embed_dim(spec.embed_dim);
        const std::size_t T = cfg_.threads.size();
        for (std::size_t t = 0; t < T; ++t) {
            const std::string prefix = "expert" + std::to_string(t);
            add_encoder(prefix, thread_vocabs_[0], spec.kernel, spec.filters, D);
            params_.add_glorot(prefix + ".clf.weight", {C, spec.filters},
                               spec.filters, C, seed);
            params_.add_zeros(prefix + ".clf.bias", {C});
        }
        add_encoder("gate", thread_vocabs_[0], spec.kernel, spec.filters, D);
        params_.add_glorot("gate.clf.weight", {T, spec.filters}, spec.filters, T,
                           seed);
        params_.add_zeros("gate.clf.bias", {T});
        return;
    }

    const std::size_t mw = meta_width();
    std::size_t agg_in = 0;
    for (std::size_t t = 0; t < cfg_.threads.size(); ++t) {
        const ThreadSpec& spec = cfg_.threads[t];
        const std::size_t D = embed_dim(spec.embed_dim);
        const std::string prefix = "thread" + std::to_string(t);
        add_encoder(prefix, thread_vocabs_[t], spec.kernel, spec.filters, D);

        std::size_t head_in = spec.filters;
        if (cfg_.framework == Framework::mohe2) {
            std::size_t slp_in = spec.filters + D;
            if (cfg_.meta_method == 2) slp_in += mw;
            const std::size_t S = slp_out_dim(t);
            params_.add_glorot(prefix + ".slp.weight", {S, slp_in}, slp_in, S, seed);
            params_.add_zeros(prefix + ".slp.bias", {S});
            head_in = S;
        }
        agg_in += head_in;

        if (cfg_.has_thread_heads()) {
            std::size_t clf_in = head_in;
            if (cfg_.meta_method == 1) clf_in += mw;
            params_.add_glorot(prefix + ".clf.weight", {C, clf_in}, clf_in, C, seed);
            params_.add_zeros(prefix + ".clf.bias", {C});
        }
    }

    if (cfg_.has_aggregator()) {
        if (cfg_.meta_method == 1) agg_in += mw;
        params_.add_glorot("aggregator.clf.weight", {C, agg_in}, agg_in, C, seed);
        params_.add_zeros("aggregator.clf.bias", {C});
    }

    for (std::size_t m = 0; m < cfg_.meta_threads.size(); ++m) {
        const MetaThreadSpec& spec = cfg_.meta_threads[m];
        add_encoder("meta" + std::to_string(m), meta_vocabs_[m], 1, spec.filters,
                    embed_dim(spec.embed_dim));
    }
}

Tensor Model::encoder_stack(Tape& tape, const std::string& prefix,
                            const EncodedSequence& x, RunMode mode, Rng* rng,
                            Tensor* embedded_out) const {
    Rng dummy(0);
    Rng& r = rng ? *rng : dummy;
    if (mode == RunMode::train && !rng && cfg_.dropout > 0.0)
        throw UsageError("train-mode forward needs a dropout rng");

    Tensor emb = params_.use(tape, params_.id_of(prefix + ".embedding"));
    Tensor looked = tape.embedding_lookup(emb, x.ids);
    Tensor V = tape.dropout(looked, cfg_.dropout, mode, r);
    if (embedded_out) *embedded_out = V;
    Tensor kern = params_.use(tape, params_.id_of(prefix + ".conv.kernel"));
    Tensor bias = params_.use(tape, params_.id_of(prefix + ".conv.bias"));
    Tensor conv = tape.conv1d_same(V, kern, bias);
    Tensor pooled = tape.global_max_pool(conv);
    Tensor gain = params_.use(tape, params_.id_of(prefix + ".ln.gain"));
    Tensor offset = params_.use(tape, params_.id_of(prefix + ".ln.offset"));
    Tensor normed = tape.layer_norm(pooled, gain, offset);
    return tape.dropout(normed, cfg_.dropout, mode, r);
}

HeadOutputs Model::forward(Tape& tape, const ItemInputs& x, RunMode mode,
                           Rng* rng) const {
    HeadOutputs out;
    const std::size_t C = cfg_.classes;
    const bool with_loss = x.label >= 0;
    if (with_loss && static_cast<std::size_t>(x.label) >= C)
        throw InputError("forward: label out of range");
    if (x.meta.size() != cfg_.meta_threads.size())
        throw UsageError("forward: metadata input count mismatch");

    auto dense_named = [&](Tensor in, const std::string& w, const std::string& b) {
        return tape.dense(in, params_.use(tape, params_.id_of(w)),
                          params_.use(tape, params_.id_of(b)));
    };

    for (std::size_t m = 0; m < cfg_.meta_threads.size(); ++m)
        out.meta_pooled.push_back(encoder_stack(
            tape, "meta" + std::to_string(m), x.meta[m], mode, rng, nullptr));

    if (cfg_.framework == Framework::moe) {
        if (x.threads.empty())
            throw UsageError("forward: moe expects one shared input");
        const std::size_t T = cfg_.threads.size();
        std::vector<Tensor> expert_probs;
        for (std::size_t t = 0; t < T; ++t) {
            const std::string prefix = "expert" + std::to_string(t);
            Tensor V;
            Tensor u = encoder_stack(tape, prefix, x.threads[0], mode, rng, &V);
            out.embedded.push_back(V);
            out.pooled.push_back(u);
            Tensor logits =
                dense_named(u, prefix + ".clf.weight", prefix + ".clf.bias");
            expert_probs.push_back(tape.softmax(logits));
        }
        Tensor gate_u =
            encoder_stack(tape, "gate", x.threads[0], mode, rng, nullptr);
        Tensor gate_logits = dense_named(gate_u, "gate.clf.weight", "gate.clf.bias");
        Tensor gate = tape.softmax(gate_logits);
        Tensor mixture = tape.mix(gate, expert_probs);
        out.thread_probs = std::move(expert_probs);
        out.gate = gate;
        out.mixture = mixture;
        if (with_loss)
            out.loss = tape.nll_from_probs(mixture,
                                           static_cast<std::size_t>(x.label));
        return out;
    }

    if (x.threads.size() != cfg_.threads.size())
        throw UsageError("forward: thread input count mismatch");

    const std::size_t T = cfg_.threads.size();
    std::vector<Tensor> head_inputs; // u_t or s_t per thread
    for (std::size_t t = 0; t < T; ++t) {
        const std::string prefix = "thread" + std::to_string(t);
        Tensor V;
        Tensor u = encoder_stack(tape, prefix, x.threads[t], mode, rng, &V);
        out.embedded.push_back(V);
        out.pooled.push_back(u);
        if (cfg_.framework == Framework::mohe2) {
            Tensor vbar = tape.mean_rows(V);
            std::vector<Tensor> slp_parts{u, vbar};
            if (cfg_.meta_method == 2)
                for (Tensor um : out.meta_pooled) slp_parts.push_back(um);
            Tensor slp_in = slp_parts.size() == 1
                                ? slp_parts[0]
                                : tape.concat(slp_parts);
            Tensor s = tape.tanh(dense_named(slp_in, prefix + ".slp.weight",
                                             prefix + ".slp.bias"));
            out.slp.push_back(s);
            head_inputs.push_back(s);
        } else {
            head_inputs.push_back(u);
        }
    }

    std::vector<Tensor> head_logits; // thread heads then aggregator
    if (cfg_.has_thread_heads()) {
        for (std::size_t t = 0; t < T; ++t) {
            const std::string prefix = "thread" + std::to_string(t);
            Tensor clf_in = head_inputs[t];
            if (cfg_.meta_method == 1 && !out.meta_pooled.empty()) {
                std::vector<Tensor> parts{clf_in};
                for (Tensor um : out.meta_pooled) parts.push_back(um);
                clf_in = tape.concat(parts);
            }
            head_logits.push_back(
                dense_named(clf_in, prefix + ".clf.weight", prefix + ".clf.bias"));
        }
    }
    bool has_agg = cfg_.has_aggregator();
    if (has_agg) {
        std::vector<Tensor> parts = head_inputs;
        if (cfg_.meta_method == 1)
            for (Tensor um : out.meta_pooled) parts.push_back(um);
        Tensor agg_in = parts.size() == 1 ? parts[0] : tape.concat(parts);
        head_logits.push_back(
            dense_named(agg_in, "aggregator.clf.weight", "aggregator.clf.bias"));
    }

    if (with_loss) {
        const std::vector<double> gammas = effective_gammas();
        std::vector<Tensor> losses;
        std::vector<double> coeffs;
        std::vector<Tensor> probs;
        const std::size_t y = static_cast<std::size_t>(x.label);
        for (std::size_t h = 0; h < head_logits.size(); ++h) {
            auto [ce, p] = tape.softmax_cross_entropy(head_logits[h], y);
            losses.push_back(ce);
            probs.push_back(p);
        }
        if (cfg_.has_thread_heads())
            for (std::size_t t = 0; t < T; ++t) coeffs.push_back(gammas[t]);
        if (has_agg) coeffs.push_back(gammas[T]);
        out.loss = tape.scaled_sum(losses, coeffs);
        std::size_t at = 0;
        if (cfg_.has_thread_heads())
            for (std::size_t t = 0; t < T; ++t) out.thread_probs.push_back(probs[at++]);
        if (has_agg) out.aggregator_probs = probs[at];
    } else {
        std::size_t at = 0;
        if (cfg_.has_thread_heads())
            for (std::size_t t = 0; t < T; ++t)
                out.thread_probs.push_back(tape.softmax(head_logits[at++]));
        if (has_agg) out.aggregator_probs = tape.softmax(head_logits[at]);
    }
    return out;
}

std::vector<double> Model::predict(const ItemInputs& x) const {
    Tape tape(false);
    ItemInputs unlabeled = x;
    unlabeled.label = -1;
    HeadOutputs heads = forward(tape, unlabeled, RunMode::infer, nullptr);
    return predict_distribution(heads, cfg_.framework);
}

std::vector<double> Model::effective_gammas() const {
    const std::size_t T = cfg_.threads.size();
    std::vector<double> g(T + 1, 0.0);
    switch (cfg_.framework) {
        case Framework::ensemble:
            for (std::size_t t = 0; t < T; ++t) g[t] = 1.0 / static_cast<double>(T);
            g[T] = 0.0;
            break;
        case Framework::aggregator:
            g[T] = 1.0;
            break;
        case Framework::mohe1:
        case Framework::mohe2:
            if (!cfg_.gammas.empty()) {
                g = cfg_.gammas;
            } else {
                std::fill(g.begin(), g.end(), 1.0 / static_cast<double>(T + 1));
            }
            break;
        case Framework::moe:
            throw UsageError("moe has a single mixture loss; gammas do not apply");
    }
    return g;
}

double combined_loss_value(std::size_t target,
                           const std::vector<std::vector<double>>& heads,
                           const std::vector<double>& gammas) {
    if (heads.empty() || heads.size() != gammas.size())
        throw ConfigError("combined_loss: one gamma per head required");
    double sum = 0.0;
    for (double g : gammas) {
        if (g < 0.0) throw ConfigError("combined_loss: gammas must be non-negative");
        sum += g;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("combined_loss: gammas must sum to 1");
    double loss = 0.0;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        if (target >= heads[h].size())
            throw InputError("combined_loss: target out of range");
        loss += gammas[h] * -std::log(heads[h][target]);
    }
    return loss;
}

std::vector<double> predict_distribution(const HeadOutputs& heads, Framework fw) {
    auto average = [](const std::vector<std::span<const double>>& dists) {
        std::vector<double> out(dists.front().size(), 0.0);
        for (const auto& d : dists)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
        const double inv = 1.0 / static_cast<double>(dists.size());
        for (double& v : out) v *= inv;
        return out;
    };
    switch (fw) {
        case Framework::ensemble: {
            std::vector<std::span<const double>> ds;
            for (const Tensor& t : heads.thread_probs) ds.push_back(t.value());
            if (ds.empty()) throw UsageError("predict: no thread heads present");
            return average(ds);
        }
        case Framework::mohe1:
        case Framework::mohe2: {
            std::vector<std::span<const double>> ds;
            for (const Tensor& t : heads.thread_probs) ds.push_back(t.value());
            if (!heads.aggregator_probs)
                throw UsageError("predict: aggregator head missing");
            ds.push_back(heads.aggregator_probs->value());
            return average(ds);
        }
        case Framework::aggregator: {
            if (!heads.aggregator_probs)
                throw UsageError("predict: aggregator head missing");
            auto v = heads.aggregator_probs->value();
            return {v.begin(), v.end()};
        }
        case Framework::moe: {
            if (!heads.mixture) throw UsageError("predict: moe mixture missing");
            auto v = heads.mixture->value();
            return {v.begin(), v.end()};
        }
    }
    throw UsageError("predict: unknown framework");
}

} // namespace mohe
