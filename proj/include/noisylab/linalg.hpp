#pragma once

#include "noisylab/tensor.hpp"

namespace noisylab::linalg {

Tensor identity(std::size_t n);
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);

/// Maximum absolute column sum.
double norm1(const Tensor& a);

/// Largest absolute entry.
double max_abs(const Tensor& a);

/// Gauss-Jordan elimination with partial pivoting.
/// Returns false (leaving `out` untouched) when the matrix is singular.
bool try_invert(const Tensor& a, Tensor& out);

/// As try_invert, but throws std::runtime_error on a singular matrix.
Tensor invert(const Tensor& a);

/// 1-norm condition number ||A||_1 * ||A^-1||_1; +infinity when singular.
double condition_number_1(const Tensor& a);

}  // namespace noisylab::linalg
