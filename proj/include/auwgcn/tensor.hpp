#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace auwgcn {

// Dense row-major f32 tensor. Reductions in the ops accumulate in f64.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    float& operator()(int i, int j) {
        assert(ndim() == 2);
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    float operator()(int i, int j) const {
        assert(ndim() == 2);
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    float& operator()(int i, int j, int k) {
        assert(ndim() == 3);
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float operator()(int i, int j, int k) const {
        assert(ndim() == 3);
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

// NaN/Inf anywhere is a contract violation; ops call this on their outputs.
void check_finite(const Tensor& t, const char* op);

// Trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
    Tensor value;
    Tensor grad;

    Parameter() = default;
    explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape) {}

    void zero_grad() { grad.fill(0.0f); }
};

}  // namespace auwgcn
