#include "mohe/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace mohe {

void Tape::check_finite(std::span<const double> v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string("non-finite value produced by ") + op);
}

Tensor Tape::push(Shape shape, std::vector<double> values, bool needs_grad,
                  std::function<void(Tape&)> bw) {
    Node n;
    n.shape = std::move(shape);
    n.store = std::move(values);
    n.value = std::span<const double>(n.store);
    n.needs_grad = grad_enabled_ && needs_grad;
    if (n.needs_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Tensor{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::constant(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw ConfigError("constant: shape does not match data length");
    check_finite(data, "constant");
    return push(std::move(shape), std::move(data), false, {});
}

Tensor Tape::leaf(Shape shape, std::span<const double> external,
                  bool requires_grad, int param_id) {
    if (shape_numel(shape) != external.size())
        throw ConfigError("leaf: shape does not match data length");
    Node n;
    n.shape = std::move(shape);
    n.value = external;
    n.needs_grad = grad_enabled_ && requires_grad;
    n.param_id = param_id;
    nodes_.push_back(std::move(n));
    return Tensor{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::embedding_lookup(Tensor emb, const std::vector<std::int32_t>& ids) {
    const Node& e = node(emb.idx);
    if (e.shape.size() != 2) throw ConfigError("embedding_lookup: table must be 2-D");
    const std::size_t V = e.shape[0], D = e.shape[1], L = ids.size();
    std::vector<double> out(L * D);
    for (std::size_t l = 0; l < L; ++l) {
        const std::int32_t id = ids[l];
        if (id < 0 || static_cast<std::size_t>(id) >= V)
            throw InputError("embedding_lookup: index out of range");
        const double* row = e.value.data() + static_cast<std::size_t>(id) * D;
        std::copy(row, row + D, out.data() + l * D);
    }
    check_finite(out, "embedding_lookup");
    const std::uint32_t ei = emb.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({L, D}, std::move(out), e.needs_grad,
                [ei, oi, D, ids](Tape& t) {
                    const Node& o = t.node(oi);
                    Node& em = t.node(ei);
                    for (std::size_t l = 0; l < ids.size(); ++l) {
                        double* gr = em.grad.data() +
                                     static_cast<std::size_t>(ids[l]) * D;
                        const double* go = o.grad.data() + l * D;
                        for (std::size_t d = 0; d < D; ++d) gr[d] += go[d];
                    }
                });
}

Tensor Tape::conv1d_same(Tensor x, Tensor kernels, Tensor bias) {
    const Node& xn = node(x.idx);
    const Node& kn = node(kernels.idx);
    const Node& bn = node(bias.idx);
    if (xn.shape.size() != 2 || kn.shape.size() != 3 || bn.shape.size() != 1)
        throw ConfigError("conv1d_same: expected L x D input, K x D x P kernels, P bias");
    const std::size_t L = xn.shape[0], D = xn.shape[1];
    const std::size_t K = kn.shape[0], P = kn.shape[2];
    if (K < 1) throw ConfigError("conv1d_same: kernel size must be >= 1");
    if (kn.shape[1] != D)
        throw ConfigError("conv1d_same: kernel depth does not match input depth");
    if (bn.shape[0] != P)
        throw ConfigError("conv1d_same: bias length does not match filter count");

    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(K / 2);
    std::vector<double> out(L * P);
    for (std::size_t l = 0; l < L; ++l) {
        double* orow = out.data() + l * P;
        std::copy(bn.value.begin(), bn.value.end(), orow);
        for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(l + k) - off;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(L)) continue;
            const double* xrow = xn.value.data() + static_cast<std::size_t>(j) * D;
            const double* krow = kn.value.data() + k * D * P;
            for (std::size_t d = 0; d < D; ++d) {
                const double xv = xrow[d];
                const double* kvec = krow + d * P;
                for (std::size_t p = 0; p < P; ++p) orow[p] += kvec[p] * xv;
            }
        }
    }
    check_finite(out, "conv1d_same");

    const std::uint32_t xi = x.idx, ki = kernels.idx, bi = bias.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    bool ng = xn.needs_grad || kn.needs_grad || bn.needs_grad;
    return push({L, P}, std::move(out), ng, [=](Tape& t) {
        const Node& o = t.node(oi);
        Node& xm = t.node(xi);
        Node& km = t.node(ki);
        Node& bm = t.node(bi);
        for (std::size_t l = 0; l < L; ++l) {
            const double* gout = o.grad.data() + l * P;
            if (bm.needs_grad) {
                double* gb = bm.grad.data();
                for (std::size_t p = 0; p < P; ++p) gb[p] += gout[p];
            }
            for (std::size_t k = 0; k < K; ++k) {
                const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(l + k) - off;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(L)) continue;
                const std::size_t ju = static_cast<std::size_t>(j);
                if (km.needs_grad) {
                    const double* xrow = xm.value.data() + ju * D;
                    double* gk = km.grad.data() + k * D * P;
                    for (std::size_t d = 0; d < D; ++d) {
                        const double xv = xrow[d];
                        double* gkvec = gk + d * P;
                        for (std::size_t p = 0; p < P; ++p)
                            gkvec[p] += xv * gout[p];
                    }
                }
                if (xm.needs_grad) {
                    double* gx = xm.grad.data() + ju * D;
                    const double* krow = km.value.data() + k * D * P;
                    for (std::size_t d = 0; d < D; ++d) {
                        const double* kvec = krow + d * P;
                        double acc = 0.0;
                        for (std::size_t p = 0; p < P; ++p)
                            acc += kvec[p] * gout[p];
                        gx[d] += acc;
                    }
                }
            }
        }
    });
}

Tensor Tape::global_max_pool(Tensor x) {
    const Node& xn = node(x.idx);
    if (xn.shape.size() != 2) throw ConfigError("global_max_pool: expected L x P input");
    const std::size_t L = xn.shape[0], P = xn.shape[1];
    if (L < 1) throw InputError("global_max_pool: empty sequence");
    std::vector<double> out(P);
    std::vector<std::uint32_t> arg(P, 0);
    for (std::size_t p = 0; p < P; ++p) out[p] = xn.value[p];
    for (std::size_t l = 1; l < L; ++l) {
        const double* row = xn.value.data() + l * P;
        for (std::size_t p = 0; p < P; ++p) {
            if (row[p] > out[p]) {
                out[p] = row[p];
                arg[p] = static_cast<std::uint32_t>(l);
            }
        }
    }
    check_finite(out, "global_max_pool");
    const std::uint32_t xi = x.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({P}, std::move(out), xn.needs_grad,
                [xi, oi, P, arg = std::move(arg)](Tape& t) {
                    const Node& o = t.node(oi);
                    Node& xm = t.node(xi);
                    for (std::size_t p = 0; p < P; ++p)
                        xm.grad[arg[p] * P + p] += o.grad[p];
                });
}

Tensor Tape::layer_norm(Tensor v, Tensor gain, Tensor offset, double eps) {
    const Node& vn = node(v.idx);
    const Node& gn = node(gain.idx);
    const Node& on = node(offset.idx);
    if (vn.shape.size() != 1) throw ConfigError("layer_norm: expected a vector");
    const std::size_t P = vn.shape[0];
    if (P < 1 || gn.shape != Shape{P} || on.shape != Shape{P})
        throw ConfigError("layer_norm: gain/offset shape mismatch");
    if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");

    double mean = 0.0;
    for (double x : vn.value) mean += x;
    mean /= static_cast<double>(P);
    double var = 0.0;
    for (double x : vn.value) var += (x - mean) * (x - mean);
    var /= static_cast<double>(P);
    const double inv = 1.0 / std::sqrt(var + eps);

    std::vector<double> xhat(P), out(P);
    for (std::size_t p = 0; p < P; ++p) {
        xhat[p] = (vn.value[p] - mean) * inv;
        out[p] = gn.value[p] * xhat[p] + on.value[p];
    }
    check_finite(out, "layer_norm");

    const std::uint32_t vi = v.idx, gi = gain.idx, fi = offset.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    bool ng = vn.needs_grad || gn.needs_grad || on.needs_grad;
    return push({P}, std::move(out), ng,
                [vi, gi, fi, oi, P, inv, xhat = std::move(xhat)](Tape& t) {
                    const Node& o = t.node(oi);
                    Node& vm = t.node(vi);
                    Node& gm = t.node(gi);
                    Node& fm = t.node(fi);
                    if (fm.needs_grad)
                        for (std::size_t p = 0; p < P; ++p) fm.grad[p] += o.grad[p];
                    if (gm.needs_grad)
                        for (std::size_t p = 0; p < P; ++p)
                            gm.grad[p] += o.grad[p] * xhat[p];
                    if (vm.needs_grad) {
                        double sum_dh = 0.0, sum_dhx = 0.0;
                        for (std::size_t p = 0; p < P; ++p) {
                            const double dh = o.grad[p] * gm.value[p];
                            sum_dh += dh;
                            sum_dhx += dh * xhat[p];
                        }
                        const double n = static_cast<double>(P);
                        for (std::size_t p = 0; p < P; ++p) {
                            const double dh = o.grad[p] * gm.value[p];
                            vm.grad[p] += inv * (dh - sum_dh / n - xhat[p] * sum_dhx / n);
                        }
                    }
                });
}

Tensor Tape::dense(Tensor v, Tensor W, Tensor b) {
    const Node& vn = node(v.idx);
    const Node& wn = node(W.idx);
    const Node& bn = node(b.idx);
    if (vn.shape.size() != 1 || wn.shape.size() != 2 || bn.shape.size() != 1)
        throw ConfigError("dense: expected vector input, matrix weight, vector bias");
    const std::size_t in = vn.shape[0];
    const std::size_t out_dim = wn.shape[0];
    if (wn.shape[1] != in || bn.shape[0] != out_dim)
        throw ConfigError("dense: dimension mismatch");

    std::vector<double> out(out_dim);
    for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wrow = wn.value.data() + o * in;
        double acc = bn.value[o];
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * vn.value[i];
        out[o] = acc;
    }
    check_finite(out, "dense");

    const std::uint32_t vi = v.idx, wi = W.idx, bi = b.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    bool ng = vn.needs_grad || wn.needs_grad || bn.needs_grad;
    return push({out_dim}, std::move(out), ng, [=](Tape& t) {
        const Node& o = t.node(oi);
        Node& vm = t.node(vi);
        Node& wm = t.node(wi);
        Node& bm = t.node(bi);
        for (std::size_t r = 0; r < out_dim; ++r) {
            const double g = o.grad[r];
            if (g == 0.0) continue;
            if (bm.needs_grad) bm.grad[r] += g;
            const double* wrow = wm.value.data() + r * in;
            if (wm.needs_grad) {
                double* gw = wm.grad.data() + r * in;
                for (std::size_t i = 0; i < in; ++i) gw[i] += g * vm.value[i];
            }
            if (vm.needs_grad) {
                for (std::size_t i = 0; i < in; ++i) vm.grad[i] += g * wrow[i];
            }
        }
    });
}

Tensor Tape::concat(std::span<const Tensor> parts) {
    if (parts.empty()) throw ConfigError("concat: no inputs");
    std::size_t total = 0;
    bool ng = false;
    for (const Tensor& p : parts) {
        const Node& n = node(p.idx);
        if (n.shape.size() != 1) throw ConfigError("concat: vector inputs only");
        total += n.shape[0];
        ng = ng || n.needs_grad;
    }
    std::vector<double> out;
    out.reserve(total);
    std::vector<std::uint32_t> idxs;
    for (const Tensor& p : parts) {
        const Node& n = node(p.idx);
        out.insert(out.end(), n.value.begin(), n.value.end());
        idxs.push_back(p.idx);
    }
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({total}, std::move(out), ng,
                [oi, idxs = std::move(idxs)](Tape& t) {
                    const Node& o = t.node(oi);
                    std::size_t at = 0;
                    for (std::uint32_t pi : idxs) {
                        Node& pm = t.node(pi);
                        const std::size_t len = pm.shape[0];
                        if (pm.needs_grad)
                            for (std::size_t i = 0; i < len; ++i)
                                pm.grad[i] += o.grad[at + i];
                        at += len;
                    }
                });
}

Tensor Tape::mean_rows(Tensor x) {
    const Node& xn = node(x.idx);
    if (xn.shape.size() != 2) throw ConfigError("mean_rows: expected L x D input");
    const std::size_t L = xn.shape[0], D = xn.shape[1];
    if (L < 1) throw InputError("mean_rows: empty sequence");
    std::vector<double> out(D, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        const double* row = xn.value.data() + l * D;
        for (std::size_t d = 0; d < D; ++d) out[d] += row[d];
    }
    const double invL = 1.0 / static_cast<double>(L);
    for (double& v : out) v *= invL;
    check_finite(out, "mean_rows");
    const std::uint32_t xi = x.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({D}, std::move(out), xn.needs_grad, [xi, oi, L, D, invL](Tape& t) {
        const Node& o = t.node(oi);
        Node& xm = t.node(xi);
        for (std::size_t l = 0; l < L; ++l) {
            double* gx = xm.grad.data() + l * D;
            for (std::size_t d = 0; d < D; ++d) gx[d] += o.grad[d] * invL;
        }
    });
}

Tensor Tape::tanh(Tensor v) {
    const Node& vn = node(v.idx);
    std::vector<double> out(vn.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(vn.value[i]);
    check_finite(out, "tanh");
    const std::uint32_t vi = v.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push(vn.shape, std::move(out), vn.needs_grad, [vi, oi](Tape& t) {
        const Node& o = t.node(oi);
        Node& vm = t.node(vi);
        for (std::size_t i = 0; i < o.value.size(); ++i)
            vm.grad[i] += o.grad[i] * (1.0 - o.value[i] * o.value[i]);
    });
}

void softmax_value(std::span<const double> logits, std::vector<double>& out) {
    out.resize(logits.size());
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        denom += out[i];
    }
    for (double& x : out) x /= denom;
}

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Tensor Tape::softmax(Tensor logits) {
    const Node& ln = node(logits.idx);
    if (ln.shape.size() != 1) throw ConfigError("softmax: expected a vector");
    std::vector<double> out;
    softmax_value(ln.value, out);
    check_finite(out, "softmax");
    const std::uint32_t li = logits.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push(ln.shape, std::move(out), ln.needs_grad, [li, oi](Tape& t) {
        const Node& o = t.node(oi);
        Node& lm = t.node(li);
        double dot = 0.0;
        for (std::size_t i = 0; i < o.value.size(); ++i)
            dot += o.grad[i] * o.value[i];
        for (std::size_t i = 0; i < o.value.size(); ++i)
            lm.grad[i] += o.value[i] * (o.grad[i] - dot);
    });
}

std::pair<Tensor, Tensor> Tape::softmax_cross_entropy(Tensor logits,
                                                      std::size_t target) {
    const Node& ln = node(logits.idx);
    if (ln.shape.size() != 1 || ln.shape[0] < 2)
        throw ConfigError("softmax_cross_entropy: expected a vector of >= 2 logits");
    if (target >= ln.shape[0])
        throw InputError("softmax_cross_entropy: target out of range");
    std::vector<double> probs;
    softmax_value(ln.value, probs);
    const double loss = -std::log(probs[target]);
    if (!std::isfinite(loss))
        throw NumericError("non-finite value produced by softmax_cross_entropy");

    Tensor probs_t = push(ln.shape, std::vector<double>(probs), false, {});
    const std::uint32_t li = logits.idx;
    const std::uint32_t pi = probs_t.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    Tensor loss_t = push({1}, {loss}, ln.needs_grad,
                         [li, pi, oi, target](Tape& t) {
                             const double g = t.node(oi).grad[0];
                             const Node& p = t.node(pi);
                             Node& lm = t.node(li);
                             for (std::size_t i = 0; i < p.value.size(); ++i)
                                 lm.grad[i] += g * (p.value[i] - (i == target ? 1.0 : 0.0));
                         });
    return {loss_t, probs_t};
}

Tensor Tape::nll_from_probs(Tensor probs, std::size_t target) {
    const Node& pn = node(probs.idx);
    if (pn.shape.size() != 1) throw ConfigError("nll_from_probs: expected a vector");
    if (target >= pn.shape[0]) throw InputError("nll_from_probs: target out of range");
    const double p = pn.value[target];
    const double loss = -std::log(p);
    if (!std::isfinite(loss))
        throw NumericError("non-finite value produced by nll_from_probs");
    const std::uint32_t pi = probs.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({1}, {loss}, pn.needs_grad, [pi, oi, target, p](Tape& t) {
        const Node& o = t.node(oi);
        Node& pm = t.node(pi);
        pm.grad[target] += -o.grad[0] / p;
    });
}

Tensor Tape::mix(Tensor weights, std::span<const Tensor> vectors) {
    const Node& wn = node(weights.idx);
    if (wn.shape.size() != 1 || wn.shape[0] != vectors.size())
        throw ConfigError("mix: weight length must equal vector count");
    if (vectors.empty()) throw ConfigError("mix: no inputs");
    const std::size_t dim = node(vectors[0].idx).shape[0];
    bool ng = wn.needs_grad;
    std::vector<std::uint32_t> idxs;
    for (const Tensor& v : vectors) {
        const Node& n = node(v.idx);
        if (n.shape != Shape{dim}) throw ConfigError("mix: vector shape mismatch");
        ng = ng || n.needs_grad;
        idxs.push_back(v.idx);
    }
    std::vector<double> out(dim, 0.0);
    for (std::size_t t = 0; t < idxs.size(); ++t) {
        const double w = wn.value[t];
        const Node& n = node(idxs[t]);
        for (std::size_t i = 0; i < dim; ++i) out[i] += w * n.value[i];
    }
    check_finite(out, "mix");
    const std::uint32_t wi = weights.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({dim}, std::move(out), ng,
                [wi, oi, dim, idxs = std::move(idxs)](Tape& t) {
                    const Node& o = t.node(oi);
                    Node& wm = t.node(wi);
                    for (std::size_t k = 0; k < idxs.size(); ++k) {
                        Node& vm = t.node(idxs[k]);
                        if (wm.needs_grad) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < dim; ++i)
                                acc += o.grad[i] * vm.value[i];
                            wm.grad[k] += acc;
                        }
                        if (vm.needs_grad) {
                            const double w = wm.value[k];
                            for (std::size_t i = 0; i < dim; ++i)
                                vm.grad[i] += w * o.grad[i];
                        }
                    }
                });
}

Tensor Tape::dropout(Tensor v, double rate, RunMode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout: rate must lie in [0, 1)");
    const Node& vn = node(v.idx);
    if (mode == RunMode::infer || rate == 0.0) {
        std::vector<double> out(vn.value.begin(), vn.value.end());
        const std::uint32_t vi = v.idx;
        const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
        return push(vn.shape, std::move(out), vn.needs_grad, [vi, oi](Tape& t) {
            const Node& o = t.node(oi);
            Node& vm = t.node(vi);
            for (std::size_t i = 0; i < o.value.size(); ++i)
                vm.grad[i] += o.grad[i];
        });
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(vn.value.size());
    std::vector<double> out(vn.value.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform01() < rate ? 0.0 : keep_scale;
        out[i] = vn.value[i] * mask[i];
    }
    check_finite(out, "dropout");
    const std::uint32_t vi = v.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push(vn.shape, std::move(out), vn.needs_grad,
                [vi, oi, mask = std::move(mask)](Tape& t) {
                    const Node& o = t.node(oi);
                    Node& vm = t.node(vi);
                    for (std::size_t i = 0; i < o.value.size(); ++i)
                        vm.grad[i] += o.grad[i] * mask[i];
                });
}

Tensor Tape::scaled_sum(std::span<const Tensor> scalars,
                        std::span<const double> coeffs) {
    if (scalars.size() != coeffs.size() || scalars.empty())
        throw ConfigError("scaled_sum: scalar/coefficient count mismatch");
    double acc = 0.0;
    bool ng = false;
    std::vector<std::uint32_t> idxs;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        const Node& n = node(scalars[i].idx);
        if (shape_numel(n.shape) != 1)
            throw ConfigError("scaled_sum: inputs must be scalars");
        acc += coeffs[i] * n.value[0];
        ng = ng || (n.needs_grad && coeffs[i] != 0.0);
        idxs.push_back(scalars[i].idx);
    }
    if (!std::isfinite(acc))
        throw NumericError("non-finite value produced by scaled_sum");
    std::vector<double> cs(coeffs.begin(), coeffs.end());
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({1}, {acc}, ng,
                [oi, idxs = std::move(idxs), cs = std::move(cs)](Tape& t) {
                    const Node& o = t.node(oi);
                    for (std::size_t i = 0; i < idxs.size(); ++i) {
                        Node& sm = t.node(idxs[i]);
                        if (sm.needs_grad && cs[i] != 0.0)
                            sm.grad[0] += cs[i] * o.grad[0];
                    }
                });
}

Tensor Tape::sum(Tensor v) {
    const Node& vn = node(v.idx);
    double acc = 0.0;
    for (double x : vn.value) acc += x;
    if (!std::isfinite(acc)) throw NumericError("non-finite value produced by sum");
    const std::uint32_t vi = v.idx;
    const std::uint32_t oi = static_cast<std::uint32_t>(nodes_.size());
    return push({1}, {acc}, vn.needs_grad, [vi, oi](Tape& t) {
        const Node& o = t.node(oi);
        Node& vm = t.node(vi);
        for (std::size_t i = 0; i < vm.grad.size(); ++i) vm.grad[i] += o.grad[0];
    });
}

void Tape::backward(Tensor loss) {
    if (loss.tape != this) throw UsageError("backward: tensor from another tape");
    Node& ln = node(loss.idx);
    if (shape_numel(ln.shape) != 1)
        throw UsageError("backward: loss must be scalar");
    if (!grad_enabled_) throw UsageError("backward: tape built with gradients disabled");
    for (Node& n : nodes_) {
        if (!n.needs_grad) continue;
        n.grad.assign(shape_numel(n.shape), 0.0);
    }
    if (!ln.needs_grad) return; // constant loss: all gradients stay zero
    ln.grad[0] = 1.0;
    for (std::uint32_t i = loss.idx + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.needs_grad && n.backward) n.backward(*this);
    }
}

void Tape::reset() { nodes_.clear(); }

} // namespace mohe
