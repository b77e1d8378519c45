#include "slac/tensor.hpp"

#include <cmath>
#include <numeric>

#include "slac/error.hpp"

namespace slac::nn {

static std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {v};
    return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.data_.assign(shape_product(shape), 0.0);
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t = zeros(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    Tensor t;
    t.shape_ = {1, v.size()};
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::column(std::vector<double> v) {
    Tensor t;
    t.shape_ = {v.size(), 1};
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    if (v.size() != rows * cols)
        throw ShapeError("matrix: data length " + std::to_string(v.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(v);
    return t;
}

// Rank-0 acts as 1x1, rank-1 {n} as a column n x 1.
std::size_t Tensor::rows() const {
    return shape_.empty() ? 1 : shape_[0];
}

std::size_t Tensor::cols() const {
    return shape_.size() < 2 ? 1 : shape_[1];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string(op) + ": produced non-finite values");
}

}  // namespace slac::nn
