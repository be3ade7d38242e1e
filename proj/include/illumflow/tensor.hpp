#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace illumflow::ad {

// Dense row-major numeric array.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape)) throw std::invalid_argument("Tensor: shape/data mismatch");
    }

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
};

}  // namespace illumflow::ad
