#include "atlab/tensor.hpp"

#include <cmath>

namespace atlab {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    for (std::size_t dim : shape) {
        if (dim == 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_str(shape));
    }
    if (shape_product(shape) != data.size()) {
        throw ShapeError("tensor shape " + shape_str(shape) + " does not match element count " +
                         std::to_string(data.size()));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
    const std::size_t n = shape_product(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> d) {
    return Tensor({rows, cols}, std::move(d));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows(): tensor is not rank 2, shape " + shape_str(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols(): tensor is not rank 2, shape " + shape_str(shape));
    return shape[1];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item(): tensor is not scalar, shape " + shape_str(shape));
    return data[0];
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

bool all_finite(const Tensor& t) { return all_finite(t.data); }

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(who) + ": expected rank-2 tensor, got shape " + shape_str(t.shape));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!same_shape(a, b)) {
        throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
}

}  // namespace atlab
