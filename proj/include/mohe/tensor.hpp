#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mohe/errors.hpp"
#include "mohe/rng.hpp"

namespace mohe {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

enum class RunMode { train, infer };

class Tape;

// Lightweight handle to a node owned by a Tape. Valid until the tape is
// reset or destroyed.
struct Tensor {
    Tape* tape = nullptr;
    std::uint32_t idx = 0;

    const Shape& shape() const;
    std::span<const double> value() const;
    std::span<const double> grad() const;
    bool requires_grad() const;
    std::size_t numel() const;
    double scalar() const;
};

// Execution-ordered record of operations. Forward ops append nodes; backward
// walks the record in exact reverse order, accumulating gradients additively.
// One tape is owned by one worker at a time.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    // Leaves ------------------------------------------------------------
    Tensor constant(Shape shape, std::vector<double> data);
    // References external storage (a parameter held elsewhere); the tape
    // keeps its own gradient buffer for it.
    Tensor leaf(Shape shape, std::span<const double> external,
                bool requires_grad, int param_id = -1);

    // Ops ----------------------------------------------------------------
    // emb: |V| x D, ids in [0,|V|) -> L x D
    Tensor embedding_lookup(Tensor emb, const std::vector<std::int32_t>& ids);
    // x: L x D, kernels: K x D x P, bias: P -> L x P ("same" zero padding;
    // out[l,p] = bias[p] + sum_{k,d} ker[k,d,p] * x[l+k-K/2, d], out-of-range
    // positions read as zero)
    Tensor conv1d_same(Tensor x, Tensor kernels, Tensor bias);
    // x: L x P -> P; ties take the lowest l
    Tensor global_max_pool(Tensor x);
    // v, gain, offset: P; population variance
    Tensor layer_norm(Tensor v, Tensor gain, Tensor offset, double eps = 1e-5);
    // v: in, W: out x in, b: out -> out
    Tensor dense(Tensor v, Tensor W, Tensor b);
    Tensor concat(std::span<const Tensor> parts);
    // x: L x D -> D, column means
    Tensor mean_rows(Tensor x);
    Tensor tanh(Tensor v);
    Tensor softmax(Tensor logits);
    // Fused loss: returns {loss scalar, probability vector}; probs carry no
    // gradient path of their own (the loss node owns the analytic gradient
    // p - onehot(target)).
    std::pair<Tensor, Tensor> softmax_cross_entropy(Tensor logits,
                                                    std::size_t target);
    // -ln probs[target] for an already-normalized probability vector
    Tensor nll_from_probs(Tensor probs, std::size_t target);
    // sum_t weights[t] * vectors[t]; weights is a length-T tensor
    Tensor mix(Tensor weights, std::span<const Tensor> vectors);
    // Inverted dropout; infer mode is the identity. rate in [0,1).
    Tensor dropout(Tensor v, double rate, RunMode mode, Rng& rng);
    // sum_i coeffs[i] * scalars[i]; zero coefficients contribute no gradient
    Tensor scaled_sum(std::span<const Tensor> scalars,
                      std::span<const double> coeffs);
    Tensor sum(Tensor v);

    // Backward -----------------------------------------------------------
    // loss must be scalar. Every requires_grad leaf reachable from it gets
    // its total derivative; unreachable ones hold zeros.
    void backward(Tensor loss);

    // Drops all nodes, retaining allocation capacity where possible.
    void reset();

    // Iteration over parameter leaves (used to pull grads into a store).
    template <typename F>
    void for_each_param_leaf(F&& f) const {
        for (const Node& n : nodes_)
            if (n.param_id >= 0 && n.needs_grad)
                f(n.param_id, std::span<const double>(n.grad));
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    friend struct Tensor;

    struct Node {
        Shape shape;
        std::vector<double> store;       // owned values (empty for leaf views)
        std::span<const double> value;   // points at store or external memory
        std::vector<double> grad;
        bool needs_grad = false;
        int param_id = -1;
        std::function<void(Tape&)> backward; // empty for leaves
    };

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;

    Node& node(std::uint32_t i) { return nodes_[i]; }
    const Node& node(std::uint32_t i) const { return nodes_[i]; }

    Tensor push(Shape shape, std::vector<double> values, bool needs_grad,
                std::function<void(Tape&)> bw);
    std::span<double> grad_of(std::uint32_t i) { return nodes_[i].grad; }
    static void check_finite(std::span<const double> v, const char* op);
};

inline const Shape& Tensor::shape() const { return tape->node(idx).shape; }
inline std::span<const double> Tensor::value() const { return tape->node(idx).value; }
inline std::span<const double> Tensor::grad() const { return tape->node(idx).grad; }
inline bool Tensor::requires_grad() const { return tape->node(idx).needs_grad; }
inline std::size_t Tensor::numel() const { return shape_numel(shape()); }
inline double Tensor::scalar() const {
    if (numel() != 1) throw UsageError("scalar() on non-scalar tensor");
    return value()[0];
}

// Non-tape helpers shared with inference paths ---------------------------

// Stable softmax into out (resized to logits.size()).
void softmax_value(std::span<const double> logits, std::vector<double>& out);

// argmax with lowest-index tie breaking
std::size_t argmax_lowest(std::span<const double> v);

} // namespace mohe
