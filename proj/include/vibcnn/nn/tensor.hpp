#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vibcnn/error.hpp"

namespace vibcnn::nn {

/// Dense row-major N-d array.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, T fill = T{0})
        : shape_(std::move(shape)), values_(product(shape_), fill) {}
    Tensor(std::vector<std::size_t> shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != product(shape_))
            throw Error(ErrorCode::ShapeMismatch, "tensor of " + std::to_string(values_.size()) + " values cannot take shape " + shape_string());
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return values_.size(); }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    std::vector<T>& storage() { return values_; }
    const std::vector<T>& storage() const { return values_; }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    T& operator()(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) { return values_[(i * shape_[1] + j) * shape_[2] + k]; }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

    std::string shape_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
    }

    bool operator==(const Tensor&) const = default;

private:
    static std::size_t product(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> shape_;
    std::vector<T> values_;
};

template <typename T>
bool all_finite(std::span<const T> v) {
    for (const T& x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace vibcnn::nn
