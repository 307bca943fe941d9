#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mohe/tensor.hpp"

namespace mohe {

// Named, flat storage for trainable arrays. Ids are dense and assigned in
// registration order; initialization draws from a per-name seed stream, so
// the draws for one parameter never depend on which other parameters exist.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
    };

    int add(std::string name, Shape shape, std::vector<double> init);
    int add_uniform(std::string name, Shape shape, double lo, double hi,
                    std::uint64_t seed);
    int add_zeros(std::string name, Shape shape);
    int add_constant(std::string name, Shape shape, double fill);
    // Glorot: symmetric uniform with limit sqrt(6 / (fan_in + fan_out)).
    int add_glorot(std::string name, Shape shape, std::size_t fan_in,
                   std::size_t fan_out, std::uint64_t seed);

    bool contains(const std::string& name) const;
    int id_of(const std::string& name) const;
    Entry& entry(int id) { return entries_[static_cast<std::size_t>(id)]; }
    const Entry& entry(int id) const { return entries_[static_cast<std::size_t>(id)]; }
    Entry& entry(const std::string& name) { return entry(id_of(name)); }
    const Entry& entry(const std::string& name) const { return entry(id_of(name)); }

    std::size_t size() const { return entries_.size(); }
    std::size_t total_values() const;

    void zero_grad();
    void accumulate_from(const Tape& tape);
    void scale_grad(double factor);

    // Tape leaf for this parameter (requires_grad on).
    Tensor use(Tape& tape, int id) const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> by_name_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers per parameter plus the shared step counter.
struct AdamState {
    AdamConfig cfg;
    std::vector<std::vector<double>> m, v;
    std::uint64_t t = 0;
};

// Standard bias-corrected Adam over every entry of the store, consuming the
// gradients currently held there. A NaN/Inf gradient aborts the step before
// any parameter is touched.
void adam_step(ParamStore& params, AdamState& state);

} // namespace mohe
