#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cegnn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient first reaches this tensor
  bool requires_grad = false;

  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 array with optional gradient tracking.
///
/// Copies share storage. Values are immutable through the public interface
/// except via mutable_values(), which is reserved for parameter updates.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->values.size(); }

  std::span<const double> values() const { return impl_->values; }
  std::span<double> mutable_values() { return impl_->values; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient, or an empty span when nothing has flowed here yet.
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad();

  /// Deep copy without gradient history.
  Tensor clone() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& shared_impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
  friend Tensor make_tensor(Shape, std::vector<double>, bool);
};

Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad);

/// Ordered record of differentiable operations.
///
/// Operations are recorded only while a TapeScope for this tape is active on
/// the current thread and at least one input requires a gradient. backward()
/// replays the records in exact reverse order.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> output_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const Tensor& output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Gradients of leaf tensors
  /// accumulate across calls; intermediate gradients are reset each call.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Record> records_;
};

/// Makes `tape` the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

}  // namespace cegnn
