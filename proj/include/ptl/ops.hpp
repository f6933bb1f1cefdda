#pragma once

#include <vector>

#include "ptl/neighbor_index.hpp"
#include "ptl/tape.hpp"
#include "ptl/tensor.hpp"

namespace ptl {

// Differentiable tensor ops. Each records a node on `tape` when any input
// requires grad; otherwise the tape is untouched.
//
// Binary ops take `b` either with a's exact shape or with a's shape except a
// trailing extent of 1, which is broadcast along a's last axis. No other
// broadcasting is accepted.

/// [m×k] · [k×n] -> [m×n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// x[...×in] · w[in×out] + bias[out] -> [...×out]. Rank-1 x is one row.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
/// max(x, 0); the subgradient at 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);

/// Softmax along `axis`, computed after subtracting the slice maximum.
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);
Tensor softmax_lastdim(Tape& tape, const Tensor& x);

enum class ReduceKind { sum, mean, max };

/// Removes `axis`. Max routes its gradient to the lowest winning index.
Tensor reduce(Tape& tape, const Tensor& x, std::size_t axis, ReduceKind kind);
/// Sum of every element as a rank-0 tensor.
Tensor sum_all(Tape& tape, const Tensor& x);

/// features[N×C], idx over N -> [rows×k×C] with out[i][j] = features[idx(i,j)].
Tensor gather_rows(Tape& tape, const Tensor& features, const NeighborIndex& idx);

/// Same values, new shape of equal element count.
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Concatenates along axis 0; trailing extents must agree.
Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts);

}  // namespace ptl
