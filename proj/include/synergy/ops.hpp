#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "synergy/tensor.hpp"

// Differentiable primitives. Every function records a backward closure on the
// current Graph when one of its inputs requires grad. Vectors are rank-1
// tensors, matrices rank-2; "scalars" are shape {1}.
namespace synergy::ops {

inline constexpr double kNormEps = 1e-12;

// C = A·B for A[m×k], B[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
// y = A·x for A[m×k], x[k].
Tensor matvec(const Tensor& a, const Tensor& x);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Hadamard product.
Tensor mul(const Tensor& a, const Tensor& b);
// M + b·1ᵀ for M[m×n], b[m].
Tensor add_col_broadcast(const Tensor& m, const Tensor& b);
// M ∘ (v·1ᵀ) for M[m×n], v[m].
Tensor mul_col_broadcast(const Tensor& m, const Tensor& v);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Softmax along `axis` (0 = down columns, 1 = along rows; vectors use axis 0).
Tensor softmax(const Tensor& x, std::size_t axis = 0);
Tensor log_softmax(const Tensor& x);
Tensor logsumexp(const Tensor& x);

Tensor sum(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

Tensor concat(std::span<const Tensor> parts);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& a, std::size_t begin, std::size_t length);
// Element i of a vector as a {1} tensor.
Tensor pick(const Tensor& a, std::size_t i);

// Columns are the given equal-length vectors, in order.
Tensor stack_columns(std::span<const Tensor> columns);
Tensor column(const Tensor& m, std::size_t j);
// Rows of `table` at `indices`, stacked into [T×cols].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
Tensor row(const Tensor& m, std::size_t i);

// Sums `groups` consecutive blocks of rows: [g·l] -> [l], [g·l×n] -> [l×n].
Tensor fold_sum(const Tensor& x, std::size_t groups);

// Power normalization sign(z)|z|^0.5 followed by z / max(‖z‖₂, eps). Vectors
// are normalized as a whole; matrices column by column.
Tensor normalize_power_l2(const Tensor& z, double eps = kNormEps);

}  // namespace synergy::ops
