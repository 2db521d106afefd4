#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cegnn/tensor.hpp"

// Differentiable operations. Every op throws ShapeError on incompatible
// extents and NumericError if it would produce a non-finite value.

namespace cegnn {

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x . w + bias, with x [m x k], w [k x n], bias [n].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Binary elementwise ops broadcast `b` when its shape is a suffix of a's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor reshape(const Tensor& x, Shape shape);

/// Concatenation along the last axis; leading extents must agree.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);

/// Columns [offset, offset + width) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t offset, std::size_t width);

/// Normalizes the last axis to zero mean / unit variance, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of a 2-D tensor picked by index.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Row r of the result is the sum of the rows of `values` whose id is r.
/// Summation runs in original row order within each segment, so the result
/// is bit-reproducible; empty segments are zero.
Tensor segment_sum(const Tensor& values, std::span<const std::size_t> segment_ids,
                   std::size_t num_segments);

/// [N x D] -> [N x D x D], out[n,i,j] = a[n,i] * a[n,j].
Tensor batched_outer(const Tensor& a);

/// w [D x A x B], x [N x A x B] -> [N x D], out[n,d] = sum_ab w[d,a,b] x[n,a,b].
Tensor contract3(const Tensor& w, const Tensor& x);

/// Sum of all entries, shape [1].
Tensor sum(const Tensor& x);

/// Elementwise square root; inputs must be strictly positive.
Tensor sqrt(const Tensor& x);

/// Throws NumericError naming `where` if any value is NaN or infinite.
void check_finite(std::span<const double> values, const char* where);

}  // namespace cegnn
