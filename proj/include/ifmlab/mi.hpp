#pragma once

// Information-flow core: nearest-neighbor upsampling to align adjacent
// feature maps, joint/marginal pair construction, and the Jensen-Shannon
// variational objective evaluated by a pair discriminator. Gradients flow
// both into the discriminator and back into the sampled feature maps.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "models.hpp"
#include "rng.hpp"

namespace ifm {

enum class ObjectiveForm { Standard, PaperLiteral };

struct MIEstimate {
    double value = 0.0;  // nats
    int layer_pair_id = 0;
    int64_t sample_count = 0;
};

inline constexpr double kLn4 = 1.3862943611198906;

// out[b,c,i,j] = in[b,c, floor(i*h/H), floor(j*w/W)]; H, W must be integer
// multiples of h, w.
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int64_t H, int64_t W) {
    const int64_t N = x.dims[0], C = x.dims[1], h = x.dims[2], w = x.dims[3];
    if (H < h || W < w || H % h != 0 || W % w != 0)
        throw NonIntegerScale("upsample target must be an integer multiple of the source");
    Tensor<T> y(N, C, H, W);
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* src = x.ptr() + nc * h * w;
        T* dst = y.ptr() + nc * H * W;
        for (int64_t i = 0; i < H; ++i) {
            const T* srow = src + (i * h / H) * w;
            T* drow = dst + i * W;
            for (int64_t j = 0; j < W; ++j) drow[j] = srow[j * w / W];
        }
    }
    return y;
}

// Adjoint of upsample_nearest: sums each output cell's gradient into its
// source cell.
template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& dy, int64_t h, int64_t w) {
    const int64_t N = dy.dims[0], C = dy.dims[1], H = dy.dims[2], W = dy.dims[3];
    Tensor<T> dx(N, C, h, w);
    dx.zero();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* src = dy.ptr() + nc * H * W;
        T* dst = dx.ptr() + nc * h * w;
        for (int64_t i = 0; i < H; ++i) {
            T* drow = dst + (i * h / H) * w;
            const T* srow = src + i * W;
            for (int64_t j = 0; j < W; ++j) drow[j * w / W] += srow[j];
        }
    }
    return dx;
}

struct PairCoord {
    int32_t b = 0, i = 0, j = 0;
};

// Joint rows concatenate feature vectors of both maps at one (image,
// location); marginal rows concatenate independently sampled coordinates, so
// they may mix images.
template <typename T>
struct PairBatch {
    Tensor<T> joint;     // [m][N]
    Tensor<T> marginal;  // [m][N]
    int layer_pair_id = 0;
    int64_t left_channels = 0;
    std::vector<PairCoord> joint_coords;
    std::vector<PairCoord> marg_left, marg_right;
};

template <typename T>
PairBatch<T> sample_pairs(const Tensor<T>& h_l, const Tensor<T>& h_l1_up, int64_t m, Rng& rng,
                          int layer_pair_id = 0) {
    if (m <= 0) throw ZeroSamples("pair count must be positive");
    if (h_l.dims[0] != h_l1_up.dims[0] || h_l.dims[2] != h_l1_up.dims[2] ||
        h_l.dims[3] != h_l1_up.dims[3])
        throw ShapeMismatch("feature maps must share batch and spatial dims");
    const int64_t B = h_l.dims[0], Cl = h_l.dims[1], Cr = h_l1_up.dims[1];
    const int64_t H = h_l.dims[2], W = h_l.dims[3];
    const int64_t N = Cl + Cr;

    PairBatch<T> out;
    out.layer_pair_id = layer_pair_id;
    out.left_channels = Cl;
    out.joint = Tensor<T>(m, N);
    out.marginal = Tensor<T>(m, N);
    out.joint_coords.resize(static_cast<size_t>(m));
    out.marg_left.resize(static_cast<size_t>(m));
    out.marg_right.resize(static_cast<size_t>(m));

    auto draw = [&]() -> PairCoord {
        PairCoord c;
        c.b = static_cast<int32_t>(rng.uniform_int(0, B - 1));
        c.i = static_cast<int32_t>(rng.uniform_int(0, H - 1));
        c.j = static_cast<int32_t>(rng.uniform_int(0, W - 1));
        return c;
    };
    auto gather = [&](const Tensor<T>& map, const PairCoord& c, int64_t channels, T* dst) {
        for (int64_t ch = 0; ch < channels; ++ch) dst[ch] = map.at(c.b, ch, c.i, c.j);
    };

    for (int64_t k = 0; k < m; ++k) {
        PairCoord c = draw();
        out.joint_coords[static_cast<size_t>(k)] = c;
        T* row = out.joint.ptr() + k * N;
        gather(h_l, c, Cl, row);
        gather(h_l1_up, c, Cr, row + Cl);
    }
    for (int64_t k = 0; k < m; ++k) {
        PairCoord cl = draw();
        PairCoord cr = draw();
        out.marg_left[static_cast<size_t>(k)] = cl;
        out.marg_right[static_cast<size_t>(k)] = cr;
        T* row = out.marginal.ptr() + k * N;
        gather(h_l, cl, Cl, row);
        gather(h_l1_up, cr, Cr, row + Cl);
    }
    return out;
}

template <typename T>
inline T softplus(T x) {
    T ax = x > T(0) ? x : -x;
    T mx = x > T(0) ? x : T(0);
    return mx + std::log1p(std::exp(-ax));
}

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
struct JsdGrads {
    Tensor<T> djoint;     // d(objective)/d(joint rows), pre-scaled
    Tensor<T> dmarginal;  // d(objective)/d(marginal rows), pre-scaled
};

// Evaluates the variational objective on a pair batch.
//
// Standard form:      mean ln sigma(V) over joint
//                   + mean ln(1 - sigma(V)) over marginal + ln 4
//   (bounded above by ln 4; equals 2*JSD(P,Q) at the optimal discriminator)
// Paper-literal form: mean sigma(V) over joint - ln(mean (1 - sigma(V)) over
//   marginal), which drops the log in the first expectation and is unbounded.
//
// If grads is non-null, grad_scale * d(objective) is backpropagated into the
// discriminator's parameter gradients and the input-row gradients are
// returned through grads. The two batches pass through the discriminator
// separately so its batch-norm statistics stay homogeneous per distribution.
template <typename T>
MIEstimate jsd_objective(Discriminator<T>& D, const PairBatch<T>& pairs, ObjectiveForm form,
                         Mode mode = Mode::Train, T grad_scale = T(0), JsdGrads<T>* grads = nullptr) {
    const int64_t m = pairs.joint.dims[0];
    if (m == 0 || pairs.marginal.dims[0] == 0) throw EmptyBatch("empty pair batch");
    if (pairs.joint.dims[1] != D.cfg.input_width || pairs.marginal.dims[1] != D.cfg.input_width)
        throw WidthMismatch("pair width does not match discriminator input width");

    const bool want_grad = grads != nullptr && grad_scale != T(0);
    double value = 0.0;

    // joint pass
    {
        Tensor<T> v = D.forward_scores(pairs.joint, mode);
        double term = 0.0;
        Tensor<T> dv(m);
        if (form == ObjectiveForm::Standard) {
            for (int64_t k = 0; k < m; ++k) term += -static_cast<double>(softplus(-v[k]));
            term /= static_cast<double>(m);
            if (want_grad)
                for (int64_t k = 0; k < m; ++k)
                    dv[k] = grad_scale * sigmoid(-v[k]) / static_cast<T>(m);
        } else {
            for (int64_t k = 0; k < m; ++k) term += static_cast<double>(sigmoid(v[k]));
            term /= static_cast<double>(m);
            if (want_grad)
                for (int64_t k = 0; k < m; ++k) {
                    T s = sigmoid(v[k]);
                    dv[k] = grad_scale * s * (T(1) - s) / static_cast<T>(m);
                }
        }
        value += term;
        if (want_grad) grads->djoint = D.backward(dv);
    }
    // marginal pass
    {
        Tensor<T> v = D.forward_scores(pairs.marginal, mode);
        const int64_t mm = pairs.marginal.dims[0];
        double term = 0.0;
        Tensor<T> dv(mm);
        if (form == ObjectiveForm::Standard) {
            for (int64_t k = 0; k < mm; ++k) term += -static_cast<double>(softplus(v[k]));
            term /= static_cast<double>(mm);
            value += term + kLn4;
            if (want_grad)
                for (int64_t k = 0; k < mm; ++k)
                    dv[k] = -grad_scale * sigmoid(v[k]) / static_cast<T>(mm);
        } else {
            double s_mean = 0.0;
            for (int64_t k = 0; k < mm; ++k) s_mean += static_cast<double>(sigmoid(-v[k]));
            s_mean /= static_cast<double>(mm);
            value -= std::log(s_mean);
            if (want_grad) {
                T inv = T(1) / static_cast<T>(s_mean);
                for (int64_t k = 0; k < mm; ++k) {
                    T s = sigmoid(v[k]);
                    dv[k] = grad_scale * inv * s * (T(1) - s) / static_cast<T>(mm);
                }
            }
        }
        if (want_grad) grads->dmarginal = D.backward(dv);
    }

    MIEstimate est;
    est.value = value;
    est.layer_pair_id = pairs.layer_pair_id;
    est.sample_count = m;
    return est;
}

// Scatters pair-row gradients back onto the two (aligned) feature maps.
template <typename T>
void scatter_pair_grads(const PairBatch<T>& pairs, const JsdGrads<T>& grads, Tensor<T>& d_h_l,
                        Tensor<T>& d_h_l1_up) {
    const int64_t m = pairs.joint.dims[0];
    const int64_t Cl = pairs.left_channels;
    const int64_t Cr = pairs.joint.dims[1] - Cl;
    for (int64_t k = 0; k < m; ++k) {
        const T* row = grads.djoint.ptr() + k * (Cl + Cr);
        const PairCoord& c = pairs.joint_coords[static_cast<size_t>(k)];
        for (int64_t ch = 0; ch < Cl; ++ch) d_h_l.at(c.b, ch, c.i, c.j) += row[ch];
        for (int64_t ch = 0; ch < Cr; ++ch) d_h_l1_up.at(c.b, ch, c.i, c.j) += row[Cl + ch];
    }
    for (int64_t k = 0; k < m; ++k) {
        const T* row = grads.dmarginal.ptr() + k * (Cl + Cr);
        const PairCoord& cl = pairs.marg_left[static_cast<size_t>(k)];
        const PairCoord& cr = pairs.marg_right[static_cast<size_t>(k)];
        for (int64_t ch = 0; ch < Cl; ++ch) d_h_l.at(cl.b, ch, cl.i, cl.j) += row[ch];
        for (int64_t ch = 0; ch < Cr; ++ch) d_h_l1_up.at(cr.b, ch, cr.i, cr.j) += row[Cl + ch];
    }
}

template <typename T>
struct IfmResult {
    double total = 0.0;
    std::array<MIEstimate, 3> per_layer;
};

// Evaluates F_l over the three adjacent tap pairs and sums them. When
// grad_scale != 0, grad_scale * dF flows into the discriminators' parameter
// gradients and accumulates into tap_grads. Each pair samples from its own
// substream derived up front, so evaluation order cannot change the draws.
template <typename T>
IfmResult<T> ifm_loss(const std::array<Tensor<T>, 4>& taps,
                      std::array<Discriminator<T>, 3>& discriminators, int64_t pairs_per_image,
                      Rng& rng, ObjectiveForm form, T grad_scale = T(0),
                      std::array<Tensor<T>, 4>* tap_grads = nullptr) {
    IfmResult<T> res;
    std::array<uint64_t, 3> substream{rng.next_u64(), rng.next_u64(), rng.next_u64()};
    for (int l = 0; l < 3; ++l) {
        const Tensor<T>& lo = taps[static_cast<size_t>(l)];
        const Tensor<T>& hi = taps[static_cast<size_t>(l) + 1];
        Rng sub(substream[static_cast<size_t>(l)]);
        Tensor<T> up = upsample_nearest(hi, lo.dims[2], lo.dims[3]);
        const int64_t m = pairs_per_image * lo.dims[0];
        PairBatch<T> pairs = sample_pairs(lo, up, m, sub, l);
        const bool want_grad = grad_scale != T(0) && tap_grads != nullptr;
        JsdGrads<T> grads;
        MIEstimate est = jsd_objective(discriminators[static_cast<size_t>(l)], pairs, form,
                                       Mode::Train, grad_scale, want_grad ? &grads : nullptr);
        res.per_layer[static_cast<size_t>(l)] = est;
        res.total += est.value;
        if (want_grad) {
            Tensor<T> dup(up.dims[0], up.dims[1], up.dims[2], up.dims[3]);
            dup.zero();
            auto& tg = *tap_grads;
            if (tg[static_cast<size_t>(l)].size() == 0) {
                tg[static_cast<size_t>(l)] = lo;
                tg[static_cast<size_t>(l)].zero();
            }
            scatter_pair_grads(pairs, grads, tg[static_cast<size_t>(l)], dup);
            Tensor<T> dhi = upsample_nearest_backward(dup, hi.dims[2], hi.dims[3]);
            auto& thi = tg[static_cast<size_t>(l) + 1];
            if (thi.size() == 0) {
                thi = dhi;
            } else {
                for (int64_t i = 0; i < dhi.size(); ++i) thi[i] += dhi[i];
            }
        }
    }
    return res;
}

}  // namespace ifm
