#include "mohe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mohe/metrics.hpp"

namespace mohe {

const Vocab& VocabSet::for_mode(TokenMode mode) const {
    auto it = by_key.find(to_string(mode));
    if (it == by_key.end())
        throw ConfigError("vocabulary missing for mode " + to_string(mode));
    return it->second;
}

const Vocab& VocabSet::for_meta(std::size_t index) const {
    auto it = by_key.find("meta" + std::to_string(index));
    if (it == by_key.end())
        throw ConfigError("vocabulary missing for metadata thread " +
                          std::to_string(index));
    return it->second;
}

std::vector<std::string> meta_tokens(const ItemRecord& item,
                                     const MetaThreadSpec& spec) {
    std::vector<std::string> out;
    for (const std::string& source : spec.sources) {
        if (source == "shop_id") {
            if (item.shop_id) out.push_back("shop:" + *item.shop_id);
        } else if (source == "tag_ids") {
            for (const std::string& t : item.tag_ids) out.push_back("tag:" + t);
        } else if (source == "description") {
            for (std::string& t : prepare_description(item.description_tokens))
                out.push_back(std::move(t));
        }
    }
    return out;
}

VocabSet build_vocabs(const std::vector<ItemRecord>& items,
                      const ModelConfig& cfg, const VocabConfig& vc) {
    VocabSet set;
    std::vector<TokenMode> modes;
    const auto& threads =
        cfg.framework == Framework::moe
            ? std::vector<ThreadSpec>{cfg.threads.front()}
            : cfg.threads;
    for (const ThreadSpec& t : threads)
        if (std::find(modes.begin(), modes.end(), t.mode) == modes.end())
            modes.push_back(t.mode);

    for (TokenMode mode : modes) {
        std::vector<std::vector<std::string>> corpus;
        corpus.reserve(items.size());
        for (const ItemRecord& item : items)
            corpus.push_back(tokenize(item.title, mode));
        set.by_key.emplace(to_string(mode),
                           build_vocab(corpus, vc.min_freq, vc.max_size));
    }
    for (std::size_t m = 0; m < cfg.meta_threads.size(); ++m) {
        std::vector<std::vector<std::string>> corpus;
        corpus.reserve(items.size());
        for (const ItemRecord& item : items)
            corpus.push_back(meta_tokens(item, cfg.meta_threads[m]));
        set.by_key.emplace("meta" + std::to_string(m),
                           build_vocab(corpus, vc.min_freq, vc.max_size));
    }
    return set;
}

std::vector<std::string> build_label_table(const std::vector<ItemRecord>& items,
                                           std::size_t level) {
    std::vector<std::string> labels;
    for (const ItemRecord& item : items) {
        std::string label = join_path(
            level ? truncate_path(item.genre_path, level) : item.genre_path);
        labels.push_back(std::move(label));
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

EncodedDataset prepare_dataset(const std::vector<ItemRecord>& items,
                               const ModelConfig& cfg, const VocabSet& vocabs,
                               const std::vector<std::string>& labels,
                               std::size_t level) {
    EncodedDataset ds;
    ds.classes = labels.size();
    const auto& threads =
        cfg.framework == Framework::moe
            ? std::vector<ThreadSpec>{cfg.threads.front()}
            : cfg.threads;
    for (const ItemRecord& item : items) {
        ItemInputs in;
        for (const ThreadSpec& spec : threads)
            in.threads.push_back(encode(tokenize(item.title, spec.mode),
                                        vocabs.for_mode(spec.mode), spec.length));
        for (std::size_t m = 0; m < cfg.meta_threads.size(); ++m)
            in.meta.push_back(encode(meta_tokens(item, cfg.meta_threads[m]),
                                     vocabs.for_meta(m),
                                     cfg.meta_threads[m].length));
        const std::string label = join_path(
            level ? truncate_path(item.genre_path, level) : item.genre_path);
        auto it = std::lower_bound(labels.begin(), labels.end(), label);
        in.label = (it != labels.end() && *it == label)
                       ? static_cast<std::int32_t>(it - labels.begin())
                       : -1;
        ds.items.push_back(std::move(in));
        ds.ids.push_back(item.id);
    }
    return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   bool do_shuffle) {
    if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (do_shuffle) {
        Rng rng(seed);
        shuffle(order, rng);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < n; at += batch_size) {
        const std::size_t end = std::min(n, at + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

namespace {

std::pair<double, double> evaluate(const Model& model,
                                   const EncodedDataset& data) {
    std::vector<std::int32_t> pred, gold;
    for (const ItemInputs& item : data.items) {
        if (item.label < 0) continue;
        const std::vector<double> dist = model.predict(item);
        pred.push_back(static_cast<std::int32_t>(argmax_lowest(dist)));
        gold.push_back(item.label);
    }
    const F1Report rep = compute_f1(pred, gold, data.classes);
    return {rep.macro_f1, rep.micro_f1};
}

} // namespace

TrainHistory train(Model& model, const EncodedDataset& data,
                   const EncodedDataset* eval_data, const TrainConfig& tc) {
    if (tc.epochs < 1) throw InputError("train: epochs must be >= 1");
    if (data.items.empty()) throw InputError("train: empty dataset");
    for (const ItemInputs& item : data.items)
        if (item.label < 0)
            throw InputError("train: every training item needs a label");

    ParamStore& params = model.params();
    AdamState adam;
    adam.cfg = tc.adam;
    TrainHistory history;
    Tape tape;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto batches =
            make_batches(data.items.size(), tc.batch_size,
                         mix_seed(tc.seed, "shuffle", epoch), tc.shuffle);
        double loss_sum = 0.0;
        for (const auto& batch : batches) {
            params.zero_grad();
            for (std::size_t idx : batch) {
                Rng dropout_rng(mix_seed(tc.seed, "dropout", epoch, idx));
                tape.reset();
                HeadOutputs heads = model.forward(tape, data.items[idx],
                                                  RunMode::train, &dropout_rng);
                const double loss = heads.loss->scalar();
                if (!std::isfinite(loss))
                    throw NumericError("train: non-finite loss");
                loss_sum += loss;
                tape.backward(*heads.loss);
                params.accumulate_from(tape);
            }
            params.scale_grad(1.0 / static_cast<double>(batch.size()));
            adam_step(params, adam);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(data.items.size());
        if (eval_data && tc.eval_every && epoch % tc.eval_every == 0) {
            auto [macro, micro] = evaluate(model, *eval_data);
            stats.macro_f1 = macro;
            stats.micro_f1 = micro;
        }
        history.epochs.push_back(stats);
    }
    return history;
}

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out.setf(std::ios::fmtflags(), std::ios::floatfield);
    for (const EpochStats& e : history.epochs) {
        out << "{\"epoch\":" << e.epoch << ",\"mean_loss\":" << e.mean_loss;
        if (e.macro_f1) out << ",\"macro_f1\":" << *e.macro_f1;
        if (e.micro_f1) out << ",\"micro_f1\":" << *e.micro_f1;
        out << "}\n";
    }
}

} // namespace mohe
