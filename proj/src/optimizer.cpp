#include "mohe/optimizer.hpp"

#include <cmath>

namespace mohe {

int ParamStore::add(std::string name, Shape shape, std::vector<double> init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter: " + name);
    if (shape_numel(shape) != init.size())
        throw ConfigError("parameter shape/data mismatch: " + name);
    Entry e;
    e.name = std::move(name);
    e.shape = std::move(shape);
    e.value = std::move(init);
    e.grad.assign(e.value.size(), 0.0);
    entries_.push_back(std::move(e));
    const int id = static_cast<int>(entries_.size() - 1);
    by_name_[entries_.back().name] = id;
    return id;
}

int ParamStore::add_uniform(std::string name, Shape shape, double lo, double hi,
                            std::uint64_t seed) {
    Rng rng(mix_seed(seed, name));
    std::vector<double> init(shape_numel(shape));
    for (double& x : init) x = rng.uniform(lo, hi);
    return add(std::move(name), std::move(shape), std::move(init));
}

int ParamStore::add_zeros(std::string name, Shape shape) {
    return add(std::move(name), std::move(shape),
               std::vector<double>(shape_numel(shape), 0.0));
}

int ParamStore::add_constant(std::string name, Shape shape, double fill) {
    return add(std::move(name), std::move(shape),
               std::vector<double>(shape_numel(shape), fill));
}

int ParamStore::add_glorot(std::string name, Shape shape, std::size_t fan_in,
                           std::size_t fan_out, std::uint64_t seed) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return add_uniform(std::move(name), std::move(shape), -limit, limit, seed);
}

bool ParamStore::contains(const std::string& name) const {
    return by_name_.count(name) > 0;
}

int ParamStore::id_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (Entry& e : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

void ParamStore::accumulate_from(const Tape& tape) {
    tape.for_each_param_leaf([this](int id, std::span<const double> g) {
        Entry& e = entry(id);
        for (std::size_t i = 0; i < g.size(); ++i) e.grad[i] += g[i];
    });
}

void ParamStore::scale_grad(double factor) {
    for (Entry& e : entries_)
        for (double& g : e.grad) g *= factor;
}

Tensor ParamStore::use(Tape& tape, int id) const {
    const Entry& e = entry(id);
    return tape.leaf(e.shape, std::span<const double>(e.value), true, id);
}

void adam_step(ParamStore& params, AdamState& state) {
    if (state.m.size() != params.size()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& e = params.entry(static_cast<int>(i));
            if (state.m[i].empty()) state.m[i].assign(e.value.size(), 0.0);
            if (state.v[i].empty()) state.v[i].assign(e.value.size(), 0.0);
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entry(static_cast<int>(i));
        if (state.m[i].size() != e.value.size())
            throw ConfigError("adam state shape mismatch for " + e.name);
        for (double g : e.grad)
            if (!std::isfinite(g))
                throw NumericError("NaN/Inf gradient in " + e.name +
                                   "; optimizer step aborted");
    }

    const AdamConfig& c = state.cfg;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& e = params.entry(static_cast<int>(i));
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < e.value.size(); ++j) {
            const double g = e.grad[j];
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            e.value[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

} // namespace mohe
