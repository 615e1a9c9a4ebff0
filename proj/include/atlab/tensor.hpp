#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "atlab/error.hpp"

namespace atlab {

// Dense row-major tensor of 64-bit floats. The batch is always the leading
// dimension; scalars use shape {1}.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> s);
    static Tensor scalar(double v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> d);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    // Value of a scalar tensor.
    double item() const;
};

std::string shape_str(const std::vector<std::size_t>& s);

bool same_shape(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);
bool all_finite(const std::vector<double>& v);

void require_rank2(const Tensor& t, const char* who);
void require_same_shape(const Tensor& a, const Tensor& b, const char* who);

}  // namespace atlab
