#include "cegnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "cegnn/error.hpp"

namespace cegnn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

ConstMatrixMap as_const_matrix(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) {
    return false;
  }
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor finish(const char* op, Shape shape, std::vector<double> values, bool track,
              Tape::BackwardFn backward) {
  check_finite(values, op);
  Tensor out = make_tensor(std::move(shape), std::move(values), track);
  if (track) {
    active_tape()->record(out, std::move(backward));
  }
  return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

/// Number of times `b` repeats inside `a` under suffix broadcasting.
std::size_t broadcast_repeats(const Tensor& a, const Tensor& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(sb) + " onto " +
                     shape_string(sa));
  }
  return a.size() / b.size();
}

}  // namespace

void check_finite(std::span<const double> values, const char* where) {
  if (Eigen::Map<const Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(values.size())).allFinite()) {
    return;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(where) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  as_matrix(std::span<double>(out), m, n).noalias() =
      as_const_matrix(a.values(), m, k) * as_const_matrix(b.values(), k, n);
  const bool track = tracking({&a, &b});
  ImplPtr ia = a.shared_impl(), ib = b.shared_impl();
  return finish("matmul", {m, n}, std::move(out), track, [ia, ib, m, k, n](std::span<const double> g) {
    auto gm = as_const_matrix(g, m, n);
    if (ia->requires_grad) {
      as_matrix(ia->grad_buffer(), m, k).noalias() += gm * as_const_matrix(ib->values, k, n).transpose();
    }
    if (ib->requires_grad) {
      as_matrix(ib->grad_buffer(), k, n).noalias() += as_const_matrix(ia->values, m, k).transpose() * gm;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k || bias.size() != n) {
    throw ShapeError("linear: incompatible " + shape_string(x.shape()) + ", " +
                     shape_string(w.shape()) + ", " + shape_string(bias.shape()));
  }
  std::vector<double> out(m * n);
  auto om = as_matrix(std::span<double>(out), m, n);
  om.noalias() = as_const_matrix(x.values(), m, k) * as_const_matrix(w.values(), k, n);
  om.rowwise() += as_const_matrix(bias.values(), 1, n).row(0);
  const bool track = tracking({&x, &w, &bias});
  ImplPtr ix = x.shared_impl(), iw = w.shared_impl(), ib = bias.shared_impl();
  return finish("linear", {m, n}, std::move(out), track,
                [ix, iw, ib, m, k, n](std::span<const double> g) {
                  auto gm = as_const_matrix(g, m, n);
                  if (ix->requires_grad) {
                    as_matrix(ix->grad_buffer(), m, k).noalias() +=
                        gm * as_const_matrix(iw->values, k, n).transpose();
                  }
                  if (iw->requires_grad) {
                    as_matrix(iw->grad_buffer(), k, n).noalias() +=
                        as_const_matrix(ix->values, m, k).transpose() * gm;
                  }
                  if (ib->requires_grad) {
                    as_matrix(ib->grad_buffer(), 1, n) += gm.colwise().sum();
                  }
                });
}

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* op) {
  const std::size_t reps = broadcast_repeats(a, b, op);
  const std::size_t inner = b.size();
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < reps; ++r) {
    const std::size_t base = r * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      switch (kind) {
        case BinaryKind::kAdd: out[base + i] = va[base + i] + vb[i]; break;
        case BinaryKind::kSub: out[base + i] = va[base + i] - vb[i]; break;
        case BinaryKind::kMul: out[base + i] = va[base + i] * vb[i]; break;
      }
    }
  }
  const bool track = tracking({&a, &b});
  ImplPtr ia = a.shared_impl(), ib = b.shared_impl();
  return finish(op, a.shape(), std::move(out), track,
                [ia, ib, reps, inner, kind](std::span<const double> g) {
                  if (ia->requires_grad) {
                    auto ga = ia->grad_buffer();
                    for (std::size_t r = 0; r < reps; ++r) {
                      for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t j = r * inner + i;
                        ga[j] += kind == BinaryKind::kMul ? g[j] * ib->values[i] : g[j];
                      }
                    }
                  }
                  if (ib->requires_grad) {
                    auto gb = ib->grad_buffer();
                    for (std::size_t r = 0; r < reps; ++r) {
                      for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t j = r * inner + i;
                        switch (kind) {
                          case BinaryKind::kAdd: gb[i] += g[j]; break;
                          case BinaryKind::kSub: gb[i] -= g[j]; break;
                          case BinaryKind::kMul: gb[i] += g[j] * ia->values[j]; break;
                        }
                      }
                    }
                  }
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) {
    v = v > 0.0 ? v : 0.0;
  }
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("relu", x.shape(), std::move(out), track, [ix](std::span<const double> g) {
    auto gx = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (ix->values[i] > 0.0) {
        gx[i] += g[i];
      }
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) {
    v *= factor;
  }
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("scale", x.shape(), std::move(out), track, [ix, factor](std::span<const double> g) {
    auto gx = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += factor * g[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("reshape", std::move(shape), std::move(out), track, [ix](std::span<const double> g) {
    auto gx = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i];
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw ShapeError("concat: no inputs");
  }
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  const std::size_t rows = numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    if (p.rank() != lead.size() + 1 || !std::equal(lead.begin(), lead.end(), p.shape().begin())) {
      throw ShapeError("concat: leading extents differ, " + shape_string(parts[0].shape()) +
                       " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
    track = track || tracking({&p});
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t w = widths[p];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * w, w, out.data() + r * total + offset);
    }
    offset += w;
  }
  std::vector<ImplPtr> impls;
  for (const Tensor& p : parts) {
    impls.push_back(p.shared_impl());
  }
  Shape shape = lead;
  shape.push_back(total);
  return finish("concat", std::move(shape), std::move(out), track,
                [impls, widths, rows, total](std::span<const double> g) {
                  std::size_t offset = 0;
                  for (std::size_t p = 0; p < impls.size(); ++p) {
                    const std::size_t w = widths[p];
                    if (impls[p]->requires_grad) {
                      auto gp = impls[p]->grad_buffer();
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < w; ++c) {
                          gp[r * w + c] += g[r * total + offset + c];
                        }
                      }
                    }
                    offset += w;
                  }
                });
}

Tensor slice_last(const Tensor& x, std::size_t offset, std::size_t width) {
  const std::size_t cols = x.shape().back();
  if (width == 0 || offset + width > cols) {
    throw ShapeError("slice_last: columns [" + std::to_string(offset) + ", " +
                     std::to_string(offset + width) + ") out of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / cols;
  std::vector<double> out(rows * width);
  const auto v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(v.data() + r * cols + offset, width, out.data() + r * width);
  }
  Shape shape = x.shape();
  shape.back() = width;
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("slice_last", std::move(shape), std::move(out), track,
                [ix, rows, cols, offset, width](std::span<const double> g) {
                  auto gx = ix->grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < width; ++c) {
                      gx[r * cols + offset + c] += g[r * width + c];
                    }
                  }
                });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t cols = x.shape().back();
  if (gain.size() != cols || bias.size() != cols) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(cols) + " entries");
  }
  const std::size_t rows = x.size() / cols;
  const auto v = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> normalized(x.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (row[c] - mean) * inv_std[r];
      normalized[r * cols + c] = xhat;
      out[r * cols + c] = xhat * gv[c] + bv[c];
    }
  }
  const bool track = tracking({&x, &gain, &bias});
  ImplPtr ix = x.shared_impl(), ig = gain.shared_impl(), ib = bias.shared_impl();
  return finish("layer_norm", x.shape(), std::move(out), track,
                [ix, ig, ib, rows, cols, normalized = std::move(normalized),
                 inv_std = std::move(inv_std)](std::span<const double> g) {
                  if (ig->requires_grad) {
                    auto gg = ig->grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) gg[i % cols] += g[i] * normalized[i];
                  }
                  if (ib->requires_grad) {
                    auto gb = ib->grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
                  }
                  if (!ix->requires_grad) return;
                  auto gx = ix->grad_buffer();
                  const double n = static_cast<double>(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                      const double d = g[r * cols + c] * ig->values[c];
                      mean_d += d;
                      mean_dx += d * normalized[r * cols + c];
                    }
                    mean_d /= n;
                    mean_dx /= n;
                    for (std::size_t c = 0; c < cols; ++c) {
                      const double d = g[r * cols + c] * ig->values[c];
                      gx[r * cols + c] +=
                          inv_std[r] * (d - mean_d - normalized[r * cols + c] * mean_dx);
                    }
                  }
                });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), cols = x.dim(1);
  if (rows.empty()) {
    throw ShapeError("gather_rows: empty index list");
  }
  std::vector<double> out(rows.size() * cols);
  const auto v = x.values();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[r]) + " out of range " +
                       std::to_string(n));
    }
    std::copy_n(v.data() + rows[r] * cols, cols, out.data() + r * cols);
  }
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return finish("gather_rows", {rows.size(), cols}, std::move(out), track,
                [ix, index = std::move(index), cols](std::span<const double> g) {
                  auto gx = ix->grad_buffer();
                  for (std::size_t r = 0; r < index.size(); ++r) {
                    double* dst = gx.data() + index[r] * cols;
                    const double* src = g.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                  }
                });
}

Tensor segment_sum(const Tensor& values, std::span<const std::size_t> segment_ids,
                   std::size_t num_segments) {
  require_rank(values, 2, "segment_sum");
  const std::size_t rows = values.dim(0), cols = values.dim(1);
  if (segment_ids.size() != rows) {
    throw ShapeError("segment_sum: " + std::to_string(segment_ids.size()) + " ids for " +
                     std::to_string(rows) + " rows");
  }
  if (num_segments == 0) {
    throw ShapeError("segment_sum: zero segments");
  }
  std::vector<double> out(num_segments * cols, 0.0);
  const auto v = values.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t id = segment_ids[r];
    if (id >= num_segments) {
      throw ShapeError("segment_sum: id " + std::to_string(id) + " out of range " +
                       std::to_string(num_segments));
    }
    double* dst = out.data() + id * cols;
    const double* src = v.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  const bool track = tracking({&values});
  ImplPtr iv = values.shared_impl();
  std::vector<std::size_t> ids(segment_ids.begin(), segment_ids.end());
  return finish("segment_sum", {num_segments, cols}, std::move(out), track,
                [iv, ids = std::move(ids), cols](std::span<const double> g) {
                  auto gv = iv->grad_buffer();
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    const double* src = g.data() + ids[r] * cols;
                    double* dst = gv.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                  }
                });
}

Tensor batched_outer(const Tensor& a) {
  require_rank(a, 2, "batched_outer");
  const std::size_t n = a.dim(0), d = a.dim(1);
  std::vector<double> out(n * d * d);
  const auto v = a.values();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = v.data() + r * d;
    double* block = out.data() + r * d * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) block[i * d + j] = row[i] * row[j];
    }
  }
  const bool track = tracking({&a});
  ImplPtr ia = a.shared_impl();
  return finish("batched_outer", {n, d, d}, std::move(out), track,
                [ia, n, d](std::span<const double> g) {
                  auto ga = ia->grad_buffer();
                  for (std::size_t r = 0; r < n; ++r) {
                    const double* row = ia->values.data() + r * d;
                    const double* block = g.data() + r * d * d;
                    for (std::size_t i = 0; i < d; ++i) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        acc += (block[i * d + j] + block[j * d + i]) * row[j];
                      }
                      ga[r * d + i] += acc;
                    }
                  }
                });
}

Tensor contract3(const Tensor& w, const Tensor& x) {
  require_rank(w, 3, "contract3");
  require_rank(x, 3, "contract3");
  if (w.dim(1) != x.dim(1) || w.dim(2) != x.dim(2)) {
    throw ShapeError("contract3: " + shape_string(w.shape()) + " vs " + shape_string(x.shape()));
  }
  const std::size_t d = w.dim(0), n = x.dim(0), k = x.dim(1) * x.dim(2);
  std::vector<double> out(n * d);
  as_matrix(std::span<double>(out), n, d).noalias() =
      as_const_matrix(x.values(), n, k) * as_const_matrix(w.values(), d, k).transpose();
  const bool track = tracking({&w, &x});
  ImplPtr iw = w.shared_impl(), ix = x.shared_impl();
  return finish("contract3", {n, d}, std::move(out), track, [iw, ix, n, d, k](std::span<const double> g) {
    auto gm = as_const_matrix(g, n, d);
    if (ix->requires_grad) {
      as_matrix(ix->grad_buffer(), n, k).noalias() += gm * as_const_matrix(iw->values, d, k);
    }
    if (iw->requires_grad) {
      as_matrix(iw->grad_buffer(), d, k).noalias() += gm.transpose() * as_const_matrix(ix->values, n, k);
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("sum", {1}, {total}, track, [ix](std::span<const double> g) {
    auto gx = ix->grad_buffer();
    for (double& v : gx) v += g[0];
  });
}

Tensor sqrt(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      throw NumericError("sqrt: negative input at index " + std::to_string(i));
    }
    out[i] = std::sqrt(v[i]);
  }
  const bool track = tracking({&x});
  ImplPtr ix = x.shared_impl();
  return finish("sqrt", x.shape(), out, track, [ix, out](std::span<const double> g) {
    auto gx = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (out[i] > 0.0) gx[i] += g[i] / (2.0 * out[i]);  // zero subgradient at the origin
    }
  });
}

}  // namespace cegnn
