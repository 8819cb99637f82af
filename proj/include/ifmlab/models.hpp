#pragma once

// The classification backbone (four conv blocks with feature-map taps after
// each pooling stage) and the pair discriminator MLP. Widths are configurable
// so verification can run on miniature instances; defaults match the full
// architecture.

#include <array>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "layers.hpp"

namespace ifm {

struct ClassifierConfig {
    std::array<int64_t, 4> conv_channels{32, 64, 128, 128};
    int64_t num_classes = 10;
    int64_t input_hw = 32;  // single-channel input_hw x input_hw
    double leaky_slope = 0.2;

    int64_t tap_hw(int block) const { return input_hw >> (block + 1); }
    int64_t head_width() const {
        int64_t hw = tap_hw(3);
        return conv_channels[3] * hw * hw;
    }
    bool operator==(const ClassifierConfig&) const = default;
};

template <typename T>
struct ConvBlock {
    Conv2d<T> conv;
    BatchNorm<T> bn;
    LeakyReLU<T> act;
    MaxPool2x2<T> pool;

    void init(int64_t in_c, int64_t out_c, T slope, Rng& rng) {
        conv.init(in_c, out_c, rng);
        bn.init(out_c);
        act.slope = slope;
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        return pool.forward(act.forward(bn.forward(conv.forward(x), mode)));
    }

    Tensor<T> backward(const Tensor<T>& dtap) {
        return conv.backward(bn.backward(act.backward(pool.backward(dtap))));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        conv.collect(prefix + ".conv", out);
        bn.collect(prefix + ".bn", out);
    }
};

template <typename T>
struct ClassifierOutputs {
    Tensor<T> logits;                // [b][num_classes]
    std::array<Tensor<T>, 4> taps;   // after each pooling stage
};

template <typename T>
class Classifier {
public:
    ClassifierConfig cfg;

    void init(const ClassifierConfig& config, uint64_t seed) {
        cfg = config;
        int64_t in_c = 1;
        for (int l = 0; l < 4; ++l) {
            Rng rng(mix_seed(seed, 0x10 + l));
            blocks_[l].init(in_c, cfg.conv_channels[l], static_cast<T>(cfg.leaky_slope), rng);
            in_c = cfg.conv_channels[l];
        }
        Rng rng(mix_seed(seed, 0x20));
        head_.init(cfg.head_width(), cfg.num_classes, rng);
    }

    // Per-block forward: exposed so verification harnesses can perturb a tap
    // and re-run the rest of the pipeline.
    Tensor<T> forward_block(int l, const Tensor<T>& x, Mode mode) {
        return blocks_[l].forward(x, mode);
    }

    Tensor<T> forward_head(const Tensor<T>& tap4) {
        const int64_t b = tap4.dims[0];
        Tensor<T> flat(b, cfg.head_width());
        flat.data = tap4.data;
        return head_.forward(flat);
    }

    ClassifierOutputs<T> forward(const Tensor<T>& x, Mode mode) {
        if (x.ndim != 4 || x.dims[1] != 1 || x.dims[2] != cfg.input_hw || x.dims[3] != cfg.input_hw)
            throw BadShape("classifier expects [b,1,hw,hw] input");
        if (mode == Mode::Train && x.dims[0] < 2)
            throw BadShape("train mode needs batch size >= 2");
        ClassifierOutputs<T> out;
        Tensor<T> cur = x;
        for (int l = 0; l < 4; ++l) {
            cur = blocks_[l].forward(cur, mode);
            out.taps[l] = cur;
        }
        out.logits = forward_head(cur);
        return out;
    }

    // dlogits plus optional external gradients flowing into the taps (from the
    // information-flow regularizer). Total per-tap gradients are kept for
    // inspection by the finite-difference harness.
    void backward(const Tensor<T>& dlogits, const std::array<Tensor<T>, 4>* extra_tap_grads) {
        Tensor<T> dflat = head_.backward(dlogits);
        Tensor<T> g = dflat;  // reshape to the tap-4 layout
        g.ndim = 4;
        int64_t hw = cfg.tap_hw(3);
        g.dims = {dflat.dims[0], cfg.conv_channels[3], hw, hw};
        for (int l = 3; l >= 0; --l) {
            if (extra_tap_grads && (*extra_tap_grads)[l].size() > 0) {
                const Tensor<T>& e = (*extra_tap_grads)[l];
                for (int64_t i = 0; i < g.size(); ++i) g[i] += e[i];
            }
            tap_grads_[l] = g;
            g = blocks_[l].backward(g);
        }
    }

    const std::array<Tensor<T>, 4>& tap_grads() const { return tap_grads_; }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (int l = 0; l < 4; ++l) blocks_[l].collect("clf.block" + std::to_string(l), out);
        head_.collect("clf.head", out);
        return out;
    }

    ConvBlock<T>& block(int l) { return blocks_[l]; }
    Linear<T>& head() { return head_; }

private:
    std::array<ConvBlock<T>, 4> blocks_;
    Linear<T> head_;
    std::array<Tensor<T>, 4> tap_grads_;
};

struct DiscriminatorConfig {
    int64_t input_width = 0;  // C_l + C_{l+1} for the pair it serves
    std::array<int64_t, 3> hidden{256, 128, 64};
    double leaky_slope = 0.2;
    bool operator==(const DiscriminatorConfig&) const = default;
};

template <typename T>
class Discriminator {
public:
    DiscriminatorConfig cfg;

    void init(const DiscriminatorConfig& config, uint64_t seed) {
        cfg = config;
        Rng r1(mix_seed(seed, 1)), r2(mix_seed(seed, 2)), r3(mix_seed(seed, 3)),
            r4(mix_seed(seed, 4));
        fc1_.init(cfg.input_width, cfg.hidden[0], r1);
        fc2_.init(cfg.hidden[0], cfg.hidden[1], r2);
        fc3_.init(cfg.hidden[1], cfg.hidden[2], r3);
        fc4_.init(cfg.hidden[2], 1, r4);
        bn1_.init(cfg.hidden[0]);
        bn2_.init(cfg.hidden[1]);
        bn3_.init(cfg.hidden[2]);
        a1_.slope = a2_.slope = a3_.slope = static_cast<T>(cfg.leaky_slope);
    }

    // Pre-squash scores V(x), one per row.
    Tensor<T> forward_scores(const Tensor<T>& x, Mode mode) {
        if (x.ndim != 2 || x.dims[1] != cfg.input_width)
            throw BadShape("discriminator input width mismatch");
        if (mode == Mode::Train && x.dims[0] < 2)
            throw BadShape("train mode needs batch size >= 2");
        Tensor<T> h = a1_.forward(bn1_.forward(fc1_.forward(x), mode));
        h = a2_.forward(bn2_.forward(fc2_.forward(h), mode));
        h = a3_.forward(bn3_.forward(fc3_.forward(h), mode));
        Tensor<T> v = fc4_.forward(h);
        Tensor<T> flat(v.dims[0]);
        flat.data = v.data;
        return flat;
    }

    // sigmoid(V(x)), elementwise in (0,1)
    Tensor<T> forward_probabilities(const Tensor<T>& x, Mode mode) {
        Tensor<T> v = forward_scores(x, mode);
        for (auto& s : v.data) s = T(1) / (T(1) + std::exp(-s));
        return v;
    }

    Tensor<T> backward(const Tensor<T>& dscores) {
        Tensor<T> dv(dscores.dims[0], 1);
        dv.data = dscores.data;
        Tensor<T> g = fc4_.backward(dv);
        g = fc3_.backward(bn3_.backward(a3_.backward(g)));
        g = fc2_.backward(bn2_.backward(a2_.backward(g)));
        return fc1_.backward(bn1_.backward(a1_.backward(g)));
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        std::vector<ParamRef<T>> out;
        fc1_.collect(prefix + ".fc1", out);
        bn1_.collect(prefix + ".bn1", out);
        fc2_.collect(prefix + ".fc2", out);
        bn2_.collect(prefix + ".bn2", out);
        fc3_.collect(prefix + ".fc3", out);
        bn3_.collect(prefix + ".bn3", out);
        fc4_.collect(prefix + ".fc4", out);
        return out;
    }

private:
    Linear<T> fc1_, fc2_, fc3_, fc4_;
    BatchNorm<T> bn1_, bn2_, bn3_;
    LeakyReLU<T> a1_, a2_, a3_;
};

// Mean negative log softmax probability of the true class, in nats.
// If dlogits is non-null it receives d(loss)/d(logits).
template <typename T>
T softmax_xent(const Tensor<T>& logits, const std::vector<int>& labels,
               Tensor<std::type_identity_t<T>>* dlogits) {
    if (logits.ndim != 2) throw BadShape("logits must be [b][k]");
    const int64_t b = logits.dims[0], k = logits.dims[1];
    if (static_cast<int64_t>(labels.size()) != b) throw BadShape("label count");
    for (int lab : labels)
        if (lab < 0 || lab >= k) throw BadLabel("label out of range");
    if (dlogits) {
        *dlogits = Tensor<T>(b, k);
    }
    T loss = T(0);
    for (int64_t i = 0; i < b; ++i) {
        const T* row = logits.ptr() + i * k;
        T mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int64_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        T lse = mx + std::log(sum);
        loss += lse - row[labels[static_cast<size_t>(i)]];
        if (dlogits) {
            T* drow = dlogits->ptr() + i * k;
            for (int64_t j = 0; j < k; ++j) drow[j] = std::exp(row[j] - lse) / static_cast<T>(b);
            drow[labels[static_cast<size_t>(i)]] -= T(1) / static_cast<T>(b);
        }
    }
    return loss / static_cast<T>(b);
}

}  // namespace ifm
