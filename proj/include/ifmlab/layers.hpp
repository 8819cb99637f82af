#pragma once

// Trainable layers with explicit forward/backward. Each layer owns its
// parameters, gradient accumulators and the forward cache its backward needs.
// Templated on scalar type: float for training, double for the
// finite-difference verification harness.

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace ifm {

enum class Mode { Train, Eval };

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;  // null for non-trainable buffers (running stats)
};

template <typename T>
void fill_uniform(Tensor<T>& t, T lo, T hi, Rng& rng) {
    for (auto& v : t.data) v = lo + (hi - lo) * static_cast<T>(rng.uniform());
}

// He-style fan-in scaled uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
void init_fan_in(Tensor<T>& w, int64_t fan_in, Rng& rng) {
    T bound = std::sqrt(T(6) / static_cast<T>(fan_in));
    fill_uniform(w, -bound, bound, rng);
}

// 3x3 convolution, padding 1, stride 1. Weight layout [out_c][in_c * 9].
// Internally works on [spatial][k] column panels so the GEMMs run K-contiguous
// dot products; the NCHW boundary transposes are cheap by comparison.
template <typename T>
struct Conv2d {
    int64_t in_c = 0, out_c = 0;
    Tensor<T> w, b, gw, gb;

    Tensor<T> x_;  // cached input, re-used to rebuild the column buffer in backward

    void init(int64_t in_channels, int64_t out_channels, Rng& rng) {
        in_c = in_channels;
        out_c = out_channels;
        w = Tensor<T>(out_c, in_c * 9);
        b = Tensor<T>(out_c);
        gw = Tensor<T>(out_c, in_c * 9);
        gb = Tensor<T>(out_c);
        init_fan_in(w, in_c * 9, rng);
    }

    // col[(i*W + j)][c*9 + di*3 + dj] = x[c][i+di-1][j+dj-1], zero outside.
    void build_col(const T* x, int64_t H, int64_t W, T* col) const {
        const int64_t K = in_c * 9;
        for (int64_t i = 0; i < H; ++i) {
            for (int64_t j = 0; j < W; ++j) {
                T* row = col + (i * W + j) * K;
                for (int64_t c = 0; c < in_c; ++c) {
                    const T* xc = x + c * H * W;
                    for (int di = 0; di < 3; ++di) {
                        const int64_t si = i + di - 1;
                        T* dst = row + c * 9 + di * 3;
                        if (si < 0 || si >= H) {
                            dst[0] = dst[1] = dst[2] = T(0);
                            continue;
                        }
                        const T* src = xc + si * W + j - 1;
                        dst[0] = j >= 1 ? src[0] : T(0);
                        dst[1] = src[1];
                        dst[2] = j + 1 < W ? src[2] : T(0);
                    }
                }
            }
        }
    }

    static constexpr int64_t kImageChunk = 8;

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.ndim != 4 || x.dims[1] != in_c) throw BadShape("conv input shape");
        const int64_t N = x.dims[0], H = x.dims[2], W = x.dims[3], HW = H * W;
        x_ = x;
        Tensor<T> y(N, out_c, H, W);
        const int64_t K = in_c * 9;
        std::vector<T> col(static_cast<size_t>(kImageChunk * HW * K)),
            ybuf(static_cast<size_t>(kImageChunk * HW * out_c)), wt(static_cast<size_t>(K * out_c));
        transpose(w.ptr(), wt.data(), out_c, K);  // -> [k][oc]
        for (int64_t n0 = 0; n0 < N; n0 += kImageChunk) {
            const int64_t n1 = std::min(n0 + kImageChunk, N);
            const int64_t imgs = n1 - n0;
            for (int64_t n = n0; n < n1; ++n)
                build_col(x.ptr() + n * in_c * HW, H, W, col.data() + (n - n0) * HW * K);
            gemm_at(col.data(), wt.data(), ybuf.data(), imgs * HW, out_c, K, false);
            for (int64_t s = 0; s < imgs * HW; ++s) {
                T* row = ybuf.data() + s * out_c;
                for (int64_t c = 0; c < out_c; ++c) row[c] += b[c];
            }
            for (int64_t n = n0; n < n1; ++n)
                transpose(ybuf.data() + (n - n0) * HW * out_c, y.ptr() + n * out_c * HW, HW, out_c);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int64_t N = x_.dims[0], H = x_.dims[2], W = x_.dims[3], HW = H * W;
        const int64_t K = in_c * 9;
        Tensor<T> dx(N, in_c, H, W);
        dx.zero();
        if (in_c == 1) return backward_single_channel(dy, dx);
        std::vector<T> col(static_cast<size_t>(kImageChunk * HW * K)),
            dyt(static_cast<size_t>(kImageChunk * HW * out_c)),
            dcol(static_cast<size_t>(kImageChunk * HW * K));
        for (int64_t n0 = 0; n0 < N; n0 += kImageChunk) {
            const int64_t n1 = std::min(n0 + kImageChunk, N);
            const int64_t imgs = n1 - n0;
            for (int64_t n = n0; n < n1; ++n) {
                const T* dyn = dy.ptr() + n * out_c * HW;
                transpose(dyn, dyt.data() + (n - n0) * HW * out_c, out_c, HW);  // -> [hw][oc]
                build_col(x_.ptr() + n * in_c * HW, H, W, col.data() + (n - n0) * HW * K);
                for (int64_t c = 0; c < out_c; ++c) {
                    const T* row = dyn + c * HW;
                    T s = T(0);
                    for (int64_t i = 0; i < HW; ++i) s += row[i];
                    gb[c] += s;
                }
            }
            // dW[oc][k] += sum_s dyt[s][oc] * col[s][k]
            gemm_tn(dyt.data(), col.data(), gw.ptr(), imgs * HW, out_c, K);
            // dcol[s][k] = sum_oc dyt[s][oc] * w[oc][k]
            gemm_at(dyt.data(), w.ptr(), dcol.data(), imgs * HW, K, out_c, false);
            // col2im
            for (int64_t n = n0; n < n1; ++n) {
                T* dxn = dx.ptr() + n * in_c * HW;
                const T* dcoln = dcol.data() + (n - n0) * HW * K;
                for (int64_t i = 0; i < H; ++i) {
                    for (int64_t j = 0; j < W; ++j) {
                        const T* row = dcoln + (i * W + j) * K;
                        for (int64_t c = 0; c < in_c; ++c) {
                            T* dxc = dxn + c * HW;
                            for (int di = 0; di < 3; ++di) {
                                const int64_t si = i + di - 1;
                                if (si < 0 || si >= H) continue;
                                const T* src = row + c * 9 + di * 3;
                                T* dst = dxc + si * W + j - 1;
                                if (j >= 1) dst[0] += src[0];
                                dst[1] += src[1];
                                if (j + 1 < W) dst[2] += src[2];
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    // K = 9 would force the generic GEMMs onto their scalar edge paths, so the
    // first conv runs a spatially-vectorized variant instead: column planes
    // [9][HW] and long dot products.
    Tensor<T> backward_single_channel(const Tensor<T>& dy, Tensor<T>& dx) {
        const int64_t N = x_.dims[0], H = x_.dims[2], W = x_.dims[3], HW = H * W;
        std::vector<T> colT(static_cast<size_t>(9 * HW)), wt(static_cast<size_t>(9 * out_c)),
            dcolT(static_cast<size_t>(9 * HW));
        transpose(w.ptr(), wt.data(), out_c, 9);  // -> [k][oc]
        for (int64_t n = 0; n < N; ++n) {
            const T* dyn = dy.ptr() + n * out_c * HW;
            const T* xn = x_.ptr() + n * HW;
            // colT[k][s] = shifted copy of the input plane
            for (int di = 0; di < 3; ++di) {
                for (int dj = 0; dj < 3; ++dj) {
                    T* row = colT.data() + (di * 3 + dj) * HW;
                    for (int64_t i = 0; i < H; ++i) {
                        const int64_t si = i + di - 1;
                        T* dst = row + i * W;
                        if (si < 0 || si >= H) {
                            for (int64_t j = 0; j < W; ++j) dst[j] = T(0);
                            continue;
                        }
                        const T* src = xn + si * W + (dj - 1);
                        const int64_t jlo = dj == 0 ? 1 : 0;
                        const int64_t jhi = dj == 2 ? W - 1 : W;
                        if (jlo == 1) dst[0] = T(0);
                        if (jhi == W - 1) dst[W - 1] = T(0);
                        for (int64_t j = jlo; j < jhi; ++j) dst[j] = src[j];
                    }
                }
            }
            for (int64_t c = 0; c < out_c; ++c) {
                const T* row = dyn + c * HW;
                for (int k = 0; k < 9; ++k)
                    gw[c * 9 + k] += dot(row, colT.data() + k * HW, HW);
                T s = T(0);
                for (int64_t i = 0; i < HW; ++i) s += row[i];
                gb[c] += s;
            }
            // dcolT[k][s] = sum_oc w[oc][k] * dy[oc][s]
            gemm_at(wt.data(), dyn, dcolT.data(), 9, HW, out_c, false);
            // col2im of the nine shifted planes
            T* dxn = dx.ptr() + n * HW;
            for (int di = 0; di < 3; ++di) {
                for (int dj = 0; dj < 3; ++dj) {
                    const T* row = dcolT.data() + (di * 3 + dj) * HW;
                    for (int64_t i = 0; i < H; ++i) {
                        const int64_t si = i + di - 1;
                        if (si < 0 || si >= H) continue;
                        T* dst = dxn + si * W + (dj - 1);
                        const int64_t jlo = dj == 0 ? 1 : 0;
                        const int64_t jhi = dj == 2 ? W - 1 : W;
                        const T* src = row + i * W;
                        for (int64_t j = jlo; j < jhi; ++j) dst[j] += src[j];
                    }
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

// Batch normalization over [N][C][S] (S = H*W for conv maps, 1 for vectors).
template <typename T>
struct BatchNorm {
    int64_t channels = 0;
    Tensor<T> gamma, beta, ggamma, gbeta;
    Tensor<T> running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    Tensor<T> xhat_;
    std::vector<T> invstd_;
    Mode mode_ = Mode::Train;

    void init(int64_t c) {
        channels = c;
        gamma = Tensor<T>(c);
        beta = Tensor<T>(c);
        ggamma = Tensor<T>(c);
        gbeta = Tensor<T>(c);
        running_mean = Tensor<T>(c);
        running_var = Tensor<T>(c);
        gamma.fill(T(1));
        running_var.fill(T(1));
    }

    static void dims_of(const Tensor<T>& x, int64_t& N, int64_t& C, int64_t& S) {
        N = x.dims[0];
        if (x.ndim == 4) {
            C = x.dims[1];
            S = x.dims[2] * x.dims[3];
        } else {
            C = x.dims[1];
            S = 1;
        }
    }

    // fixed-order vector reduction over one contiguous slice
    static void slice_sums(const T* __restrict p, int64_t n, T& out_sum, T& out_sq) {
        using V = typename SimdLane<T>::type;
        constexpr int W = SimdLane<T>::width;
        V vs{}, vq{};
        int64_t i = 0;
        for (; i + W <= n; i += W) {
            const V v = *reinterpret_cast<const V*>(p + i);
            vs += v;
            vq += v * v;
        }
        T s = hsum<T>(vs), q = hsum<T>(vq);
        for (; i < n; ++i) {
            s += p[i];
            q += p[i] * p[i];
        }
        out_sum += s;
        out_sq += q;
    }

    static void slice_dot_sums(const T* __restrict a, const T* __restrict b, int64_t n, T& out_sum,
                               T& out_dot) {
        using V = typename SimdLane<T>::type;
        constexpr int W = SimdLane<T>::width;
        V vs{}, vd{};
        int64_t i = 0;
        for (; i + W <= n; i += W) {
            const V va = *reinterpret_cast<const V*>(a + i);
            const V vb = *reinterpret_cast<const V*>(b + i);
            vs += va;
            vd += va * vb;
        }
        T s = hsum<T>(vs), d = hsum<T>(vd);
        for (; i < n; ++i) {
            s += a[i];
            d += a[i] * b[i];
        }
        out_sum += s;
        out_dot += d;
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        int64_t N, C, S;
        dims_of(x, N, C, S);
        if (C != channels) throw BadShape("batchnorm channel count");
        mode_ = mode;
        if (S == 1) return forward_rows(x, mode, N, C);
        Tensor<T> y = x;
        if (mode == Mode::Train) {
            xhat_ = x;
            invstd_.assign(static_cast<size_t>(C), T(0));
            for (int64_t c = 0; c < C; ++c) {
                T sum = T(0), sq = T(0);
                for (int64_t n = 0; n < N; ++n)
                    slice_sums(x.ptr() + (n * C + c) * S, S, sum, sq);
                T cnt = static_cast<T>(N * S);
                T mean = sum / cnt;
                T var = sq / cnt - mean * mean;
                if (var < T(0)) var = T(0);
                T inv = T(1) / std::sqrt(var + eps);
                invstd_[static_cast<size_t>(c)] = inv;
                running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
                running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
                T g = gamma[c], bt = beta[c];
                for (int64_t n = 0; n < N; ++n) {
                    const T* __restrict p = x.ptr() + (n * C + c) * S;
                    T* __restrict xh = xhat_.ptr() + (n * C + c) * S;
                    T* __restrict py = y.ptr() + (n * C + c) * S;
                    for (int64_t s = 0; s < S; ++s) {
                        T v = (p[s] - mean) * inv;
                        xh[s] = v;
                        py[s] = g * v + bt;
                    }
                }
            }
        } else {
            for (int64_t c = 0; c < C; ++c) {
                T inv = T(1) / std::sqrt(running_var[c] + eps);
                T mean = running_mean[c];
                T g = gamma[c], bt = beta[c];
                for (int64_t n = 0; n < N; ++n) {
                    const T* __restrict p = x.ptr() + (n * C + c) * S;
                    T* __restrict py = y.ptr() + (n * C + c) * S;
                    for (int64_t s = 0; s < S; ++s) py[s] = g * (p[s] - mean) * inv + bt;
                }
            }
        }
        return y;
    }

    // [N][C] inputs: one pass per row, vectorized across channels.
    Tensor<T> forward_rows(const Tensor<T>& x, Mode mode, int64_t N, int64_t C) {
        Tensor<T> y = x;
        if (mode == Mode::Train) {
            xhat_ = x;
            invstd_.assign(static_cast<size_t>(C), T(0));
            std::vector<T> sum(static_cast<size_t>(C), T(0)), sq(static_cast<size_t>(C), T(0));
            T* __restrict ps = sum.data();
            T* __restrict pq = sq.data();
            for (int64_t n = 0; n < N; ++n) {
                const T* __restrict row = x.ptr() + n * C;
                for (int64_t c = 0; c < C; ++c) {
                    ps[c] += row[c];
                    pq[c] += row[c] * row[c];
                }
            }
            const T cnt = static_cast<T>(N);
            std::vector<T> mean(static_cast<size_t>(C)), scale(static_cast<size_t>(C));
            for (int64_t c = 0; c < C; ++c) {
                T m = ps[c] / cnt;
                T var = pq[c] / cnt - m * m;
                if (var < T(0)) var = T(0);
                T inv = T(1) / std::sqrt(var + eps);
                invstd_[static_cast<size_t>(c)] = inv;
                running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * m;
                running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
                mean[static_cast<size_t>(c)] = m;
                scale[static_cast<size_t>(c)] = inv;
            }
            const T* __restrict pm = mean.data();
            const T* __restrict pi = scale.data();
            const T* __restrict pg = gamma.ptr();
            const T* __restrict pb = beta.ptr();
            for (int64_t n = 0; n < N; ++n) {
                const T* __restrict row = x.ptr() + n * C;
                T* __restrict xh = xhat_.ptr() + n * C;
                T* __restrict py = y.ptr() + n * C;
                for (int64_t c = 0; c < C; ++c) {
                    const T v = (row[c] - pm[c]) * pi[c];
                    xh[c] = v;
                    py[c] = pg[c] * v + pb[c];
                }
            }
        } else {
            std::vector<T> scale(static_cast<size_t>(C)), shift(static_cast<size_t>(C));
            for (int64_t c = 0; c < C; ++c) {
                T inv = T(1) / std::sqrt(running_var[c] + eps);
                scale[static_cast<size_t>(c)] = gamma[c] * inv;
                shift[static_cast<size_t>(c)] = beta[c] - gamma[c] * inv * running_mean[c];
            }
            const T* __restrict pa = scale.data();
            const T* __restrict pbs = shift.data();
            for (int64_t n = 0; n < N; ++n) {
                const T* __restrict row = x.ptr() + n * C;
                T* __restrict py = y.ptr() + n * C;
                for (int64_t c = 0; c < C; ++c) py[c] = pa[c] * row[c] + pbs[c];
            }
        }
        return y;
    }

    Tensor<T> backward_rows(const Tensor<T>& dy, int64_t N, int64_t C) {
        Tensor<T> dx = dy;
        const T cnt = static_cast<T>(N);
        std::vector<T> sum_dy(static_cast<size_t>(C), T(0)), sum_dx(static_cast<size_t>(C), T(0));
        T* __restrict s1 = sum_dy.data();
        T* __restrict s2 = sum_dx.data();
        for (int64_t n = 0; n < N; ++n) {
            const T* __restrict pdy = dy.ptr() + n * C;
            const T* __restrict pxh = xhat_.ptr() + n * C;
            for (int64_t c = 0; c < C; ++c) {
                s1[c] += pdy[c];
                s2[c] += pdy[c] * pxh[c];
            }
        }
        std::vector<T> scale(static_cast<size_t>(C));
        for (int64_t c = 0; c < C; ++c) {
            gbeta[c] += s1[c];
            ggamma[c] += s2[c];
            scale[static_cast<size_t>(c)] = gamma[c] * invstd_[static_cast<size_t>(c)] / cnt;
        }
        const T* __restrict pa = scale.data();
        for (int64_t n = 0; n < N; ++n) {
            const T* __restrict pdy = dy.ptr() + n * C;
            const T* __restrict pxh = xhat_.ptr() + n * C;
            T* __restrict pdx = dx.ptr() + n * C;
            for (int64_t c = 0; c < C; ++c)
                pdx[c] = pa[c] * (cnt * pdy[c] - s1[c] - pxh[c] * s2[c]);
        }
        return dx;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (mode_ != Mode::Train) throw BadShape("batchnorm backward outside train mode");
        int64_t N, C, S;
        dims_of(dy, N, C, S);
        if (S == 1) return backward_rows(dy, N, C);
        Tensor<T> dx = dy;
        T cnt = static_cast<T>(N * S);
        for (int64_t c = 0; c < C; ++c) {
            T sum_dy = T(0), sum_dy_xhat = T(0);
            for (int64_t n = 0; n < N; ++n)
                slice_dot_sums(dy.ptr() + (n * C + c) * S, xhat_.ptr() + (n * C + c) * S, S, sum_dy,
                               sum_dy_xhat);
            ggamma[c] += sum_dy_xhat;
            gbeta[c] += sum_dy;
            T scale = gamma[c] * invstd_[static_cast<size_t>(c)] / cnt;
            for (int64_t n = 0; n < N; ++n) {
                const T* __restrict pdy = dy.ptr() + (n * C + c) * S;
                const T* __restrict pxh = xhat_.ptr() + (n * C + c) * S;
                T* __restrict pdx = dx.ptr() + (n * C + c) * S;
                for (int64_t s = 0; s < S; ++s)
                    pdx[s] = scale * (cnt * pdy[s] - sum_dy - pxh[s] * sum_dy_xhat);
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", &gamma, &ggamma});
        out.push_back({prefix + ".beta", &beta, &gbeta});
        out.push_back({prefix + ".running_mean", &running_mean, nullptr});
        out.push_back({prefix + ".running_var", &running_var, nullptr});
    }
};

// The sign of the output matches the sign of the input (slope > 0), so the
// cached output doubles as the backward mask.
template <typename T>
struct LeakyReLU {
    T slope = T(0.2);
    Tensor<T> y_;

    Tensor<T> forward(const Tensor<T>& x) {
        using V = typename SimdLane<T>::type;
        constexpr int W = SimdLane<T>::width;
        Tensor<T> y = x;
        const T s = slope;
        T* __restrict p = y.ptr();
        const int64_t n = y.size();
        int64_t i = 0;
        for (; i + W <= n; i += W) {
            V v = *reinterpret_cast<V*>(p + i);
            V neg = v > T(0) ? V{} : v;  // lanewise select
            *reinterpret_cast<V*>(p + i) = (v - neg) + s * neg;
        }
        for (; i < n; ++i) {
            const T v = p[i];
            p[i] = v > T(0) ? v : s * v;
        }
        y_ = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        using V = typename SimdLane<T>::type;
        constexpr int W = SimdLane<T>::width;
        Tensor<T> dx = dy;
        const T s = slope;
        const T* __restrict py = y_.ptr();
        T* __restrict p = dx.ptr();
        const int64_t n = dy.size();
        int64_t i = 0;
        for (; i + W <= n; i += W) {
            const V g = *reinterpret_cast<V*>(p + i);
            const V yv = *reinterpret_cast<const V*>(py + i);
            const V gneg = yv > T(0) ? V{} : g;
            *reinterpret_cast<V*>(p + i) = (g - gneg) + s * gneg;
        }
        for (; i < n; ++i) {
            const T g = p[i];
            p[i] = py[i] > T(0) ? g : s * g;
        }
        return dx;
    }
};

// 2x2 max pooling, stride 2. Ties resolve to the first cell in scan order.
template <typename T>
struct MaxPool2x2 {
    std::vector<int32_t> argmax_;
    int64_t in_h = 0, in_w = 0;

    Tensor<T> forward(const Tensor<T>& x) {
        const int64_t N = x.dims[0], C = x.dims[1], H = x.dims[2], W = x.dims[3];
        if (H % 2 != 0 || W % 2 != 0) throw BadShape("maxpool needs even spatial dims");
        in_h = H;
        in_w = W;
        const int64_t OH = H / 2, OW = W / 2;
        Tensor<T> y(N, C, OH, OW);
        argmax_.assign(static_cast<size_t>(N * C * OH * OW), 0);
        for (int64_t nc = 0; nc < N * C; ++nc) {
            const T* p = x.ptr() + nc * H * W;
            T* py = y.ptr() + nc * OH * OW;
            int32_t* am = argmax_.data() + nc * OH * OW;
            for (int64_t i = 0; i < OH; ++i) {
                for (int64_t j = 0; j < OW; ++j) {
                    int64_t base = (2 * i) * W + 2 * j;
                    T best = p[base];
                    int32_t bi = static_cast<int32_t>(base);
                    if (p[base + 1] > best) {
                        best = p[base + 1];
                        bi = static_cast<int32_t>(base + 1);
                    }
                    if (p[base + W] > best) {
                        best = p[base + W];
                        bi = static_cast<int32_t>(base + W);
                    }
                    if (p[base + W + 1] > best) {
                        best = p[base + W + 1];
                        bi = static_cast<int32_t>(base + W + 1);
                    }
                    py[i * OW + j] = best;
                    am[i * OW + j] = bi;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int64_t N = dy.dims[0], C = dy.dims[1], OH = dy.dims[2], OW = dy.dims[3];
        Tensor<T> dx(N, C, in_h, in_w);
        dx.zero();
        for (int64_t nc = 0; nc < N * C; ++nc) {
            const T* pdy = dy.ptr() + nc * OH * OW;
            T* pdx = dx.ptr() + nc * in_h * in_w;
            const int32_t* am = argmax_.data() + nc * OH * OW;
            for (int64_t s = 0; s < OH * OW; ++s) pdx[am[s]] += pdy[s];
        }
        return dx;
    }
};

template <typename T>
struct Linear {
    int64_t in = 0, out = 0;
    Tensor<T> w, b, gw, gb;  // w: [out][in]
    Tensor<T> x_;

    void init(int64_t in_features, int64_t out_features, Rng& rng) {
        in = in_features;
        out = out_features;
        w = Tensor<T>(out, in);
        b = Tensor<T>(out);
        gw = Tensor<T>(out, in);
        gb = Tensor<T>(out);
        init_fan_in(w, in, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.ndim != 2 || x.dims[1] != in) throw BadShape("linear input width");
        x_ = x;
        const int64_t M = x.dims[0];
        Tensor<T> y(M, out);
        gemm_nt(x.ptr(), w.ptr(), y.ptr(), M, out, in, false);
        for (int64_t i = 0; i < M; ++i) {
            T* row = y.ptr() + i * out;
            for (int64_t j = 0; j < out; ++j) row[j] += b[j];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int64_t M = x_.dims[0];
        Tensor<T> dx(M, in);
        // w is already k-major for dX = dY * W
        gemm_at(dy.ptr(), w.ptr(), dx.ptr(), M, in, out, false);
        gemm_tn(dy.ptr(), x_.ptr(), gw.ptr(), M, out, in);
        for (int64_t i = 0; i < M; ++i) {
            const T* row = dy.ptr() + i * out;
            for (int64_t j = 0; j < out; ++j) gb[j] += row[j];
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out_refs) {
        out_refs.push_back({prefix + ".w", &w, &gw});
        out_refs.push_back({prefix + ".b", &b, &gb});
    }
};

}  // namespace ifm
