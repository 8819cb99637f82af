#pragma once

// Minimal dense row-major tensor, up to 4 dims. Value semantics; the heavy
// lifting happens in kernels.hpp on raw pointers.

#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

namespace ifm {

template <typename T>
struct Tensor {
    std::array<int64_t, 4> dims{1, 1, 1, 1};
    int ndim = 0;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(int64_t d0) : dims{d0, 1, 1, 1}, ndim(1), data(static_cast<size_t>(d0)) {}
    Tensor(int64_t d0, int64_t d1) : dims{d0, d1, 1, 1}, ndim(2), data(static_cast<size_t>(d0 * d1)) {}
    Tensor(int64_t d0, int64_t d1, int64_t d2)
        : dims{d0, d1, d2, 1}, ndim(3), data(static_cast<size_t>(d0 * d1 * d2)) {}
    Tensor(int64_t d0, int64_t d1, int64_t d2, int64_t d3)
        : dims{d0, d1, d2, d3}, ndim(4), data(static_cast<size_t>(d0 * d1 * d2 * d3)) {}

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    T& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * dims[1] + j)]; }
    const T& at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * dims[1] + j)]; }

    T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data[static_cast<size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
    }
    const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data[static_cast<size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
    }

    void fill(T v) {
        for (auto& x : data) x = v;
    }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& o) const { return ndim == o.ndim && dims == o.dims; }
};

}  // namespace ifm
