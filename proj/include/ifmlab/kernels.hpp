#pragma once

// Dense math kernels shared by the conv / linear layers. One hot GEMM,
// C[M x N] (+)= A[M x K] * Bt[K x N], with a 4x(2 lanes) register tile:
// eight accumulators live in registers across the whole k loop, B streams
// through broadcast-FMAs, and C is written once per tile. Accumulation order
// is fixed by the code, so results are bit-reproducible without -ffast-math.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace ifm {

// GCC/Clang vector extension: one 512-bit lane of T, unaligned-access safe.
template <typename T>
struct SimdLane;
template <>
struct SimdLane<float> {
    typedef float type __attribute__((vector_size(64), aligned(4), may_alias));
    static constexpr int width = 16;
};
template <>
struct SimdLane<double> {
    typedef double type __attribute__((vector_size(64), aligned(8), may_alias));
    static constexpr int width = 8;
};

template <typename T>
inline T hsum(typename SimdLane<T>::type v) {
    T s = T(0);
    for (int j = 0; j < SimdLane<T>::width; ++j) s += v[j];
    return s;
}

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, int64_t k) {
    using V = typename SimdLane<T>::type;
    constexpr int W = SimdLane<T>::width;
    V acc0{}, acc1{};
    int64_t i = 0;
    for (; i + 2 * W <= k; i += 2 * W) {
        acc0 += *reinterpret_cast<const V*>(a + i) * *reinterpret_cast<const V*>(b + i);
        acc1 += *reinterpret_cast<const V*>(a + i + W) * *reinterpret_cast<const V*>(b + i + W);
    }
    if (i + W <= k) {
        acc0 += *reinterpret_cast<const V*>(a + i) * *reinterpret_cast<const V*>(b + i);
        i += W;
    }
    T s = hsum<T>(acc0 + acc1);
    for (; i < k; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[M x N] (+)= A[M x K] * Bt[K x N]; A row-major, Bt k-major.
template <typename T>
void gemm_at(const T* __restrict A, const T* __restrict Bt, T* __restrict C, int64_t M, int64_t N,
             int64_t K, bool accumulate) {
    using V = typename SimdLane<T>::type;
    constexpr int W = SimdLane<T>::width;
    auto vload = [](const T* p) { return *reinterpret_cast<const V*>(p); };
    auto vstore = [](T* p, V v) { *reinterpret_cast<V*>(p) = v; };

    int64_t i = 0;
    for (; i + 4 <= M; i += 4) {
        const T* a0 = A + i * K;
        const T* a1 = a0 + K;
        const T* a2 = a1 + K;
        const T* a3 = a2 + K;
        T* c0 = C + i * N;
        T* c1 = c0 + N;
        T* c2 = c1 + N;
        T* c3 = c2 + N;
        int64_t j = 0;
        for (; j + 2 * W <= N; j += 2 * W) {
            V v00{}, v01{}, v10{}, v11{}, v20{}, v21{}, v30{}, v31{};
            if (accumulate) {
                v00 = vload(c0 + j), v01 = vload(c0 + j + W);
                v10 = vload(c1 + j), v11 = vload(c1 + j + W);
                v20 = vload(c2 + j), v21 = vload(c2 + j + W);
                v30 = vload(c3 + j), v31 = vload(c3 + j + W);
            }
            const T* bt = Bt + j;
            for (int64_t k = 0; k < K; ++k, bt += N) {
                const V b0 = vload(bt);
                const V b1 = vload(bt + W);
                v00 += b0 * a0[k];
                v01 += b1 * a0[k];
                v10 += b0 * a1[k];
                v11 += b1 * a1[k];
                v20 += b0 * a2[k];
                v21 += b1 * a2[k];
                v30 += b0 * a3[k];
                v31 += b1 * a3[k];
            }
            vstore(c0 + j, v00), vstore(c0 + j + W, v01);
            vstore(c1 + j, v10), vstore(c1 + j + W, v11);
            vstore(c2 + j, v20), vstore(c2 + j + W, v21);
            vstore(c3 + j, v30), vstore(c3 + j + W, v31);
        }
        for (; j + W <= N; j += W) {
            V v0{}, v1{}, v2{}, v3{};
            if (accumulate) {
                v0 = vload(c0 + j), v1 = vload(c1 + j);
                v2 = vload(c2 + j), v3 = vload(c3 + j);
            }
            const T* bt = Bt + j;
            for (int64_t k = 0; k < K; ++k, bt += N) {
                const V b = vload(bt);
                v0 += b * a0[k];
                v1 += b * a1[k];
                v2 += b * a2[k];
                v3 += b * a3[k];
            }
            vstore(c0 + j, v0), vstore(c1 + j, v1);
            vstore(c2 + j, v2), vstore(c3 + j, v3);
        }
        for (; j < N; ++j) {
            T s0 = accumulate ? c0[j] : T(0);
            T s1 = accumulate ? c1[j] : T(0);
            T s2 = accumulate ? c2[j] : T(0);
            T s3 = accumulate ? c3[j] : T(0);
            const T* bt = Bt + j;
            for (int64_t k = 0; k < K; ++k, bt += N) {
                s0 += *bt * a0[k];
                s1 += *bt * a1[k];
                s2 += *bt * a2[k];
                s3 += *bt * a3[k];
            }
            c0[j] = s0, c1[j] = s1, c2[j] = s2, c3[j] = s3;
        }
    }
    for (; i < M; ++i) {
        const T* a = A + i * K;
        T* c = C + i * N;
        int64_t j = 0;
        for (; j + W <= N; j += W) {
            V v{};
            if (accumulate) v = vload(c + j);
            const T* bt = Bt + j;
            for (int64_t k = 0; k < K; ++k, bt += N) v += vload(bt) * a[k];
            vstore(c + j, v);
        }
        for (; j < N; ++j) {
            T s = accumulate ? c[j] : T(0);
            const T* bt = Bt + j;
            for (int64_t k = 0; k < K; ++k, bt += N) s += *bt * a[k];
            c[j] = s;
        }
    }
}

// 8x8 blocks sidestep the cache-set aliasing of power-of-two leading
// dimensions; skinny matrices go column-at-a-time.
template <typename T>
void transpose(const T* __restrict src, T* __restrict dst, int64_t rows, int64_t cols) {
    if (cols <= 32) {
        for (int64_t c = 0; c < cols; ++c) {
            T* d = dst + c * rows;
            const T* s = src + c;
            for (int64_t r = 0; r < rows; ++r) d[r] = s[r * cols];
        }
        return;
    }
    constexpr int64_t blk = 8;
    for (int64_t r0 = 0; r0 < rows; r0 += blk)
        for (int64_t c0 = 0; c0 < cols; c0 += blk) {
            const int64_t r1 = r0 + blk < rows ? r0 + blk : rows;
            const int64_t c1 = c0 + blk < cols ? c0 + blk : cols;
            for (int64_t r = r0; r < r1; ++r)
                for (int64_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
        }
}

// scratch for the transposed operand; single logical owner per thread
template <typename T>
std::vector<T>& gemm_scratch() {
    thread_local std::vector<T> buf;
    return buf;
}

// C[M x N] (+)= A[M x K] * B[N x K]^T (rows of B contiguous over K).
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int64_t M, int64_t N, int64_t K, bool accumulate) {
    std::vector<T>& bt = gemm_scratch<T>();
    bt.resize(static_cast<size_t>(N * K));
    transpose(B, bt.data(), N, K);
    gemm_at(A, bt.data(), C, M, N, K, accumulate);
}

// C[M x N] += A[R x M]^T * B[R x N]. A is transposed in row chunks so the
// scratch stays cache-resident regardless of R.
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int64_t R, int64_t M, int64_t N) {
    const int64_t chunk = 256;
    std::vector<T>& at = gemm_scratch<T>();
    at.resize(static_cast<size_t>(std::min(chunk, R) * M));
    for (int64_t r0 = 0; r0 < R; r0 += chunk) {
        const int64_t r1 = r0 + chunk < R ? r0 + chunk : R;
        transpose(A + r0 * M, at.data(), r1 - r0, M);
        gemm_at(at.data(), B + r0 * N, C, M, N, r1 - r0, true);
    }
}

}  // namespace ifm
