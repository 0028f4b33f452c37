#pragma once

// Reverse-mode automatic differentiation over row-major matrices.
//
// A Tape owns every intermediate value of one forward pass. Operations return
// lightweight `Var` handles; `backward` walks the tape in reverse. The scalar
// type is float for training and double for finite-difference checks.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sfn/sequence.hpp"

namespace sfn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
class ParamStore;

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
 public:
  using Matrix = Mat<T>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives gradient.
  Var constant(Matrix value);
  /// A value that receives gradient (test inputs, for example).
  Var leaf(Matrix value);
  /// Binds parameter `name` of `store`; gradients are exported by index.
  Var param(const ParamStore<T>& store, const std::string& name);

  const Matrix& value(Var v) const;
  /// Gradient of the last `backward` root with respect to `v`; zero-sized
  /// when no gradient reached it.
  const Matrix& grad(Var v) const;
  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }
  std::size_t size() const { return nodes_.size(); }

  // Linear algebra.
  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcasts a 1 x n row over a's rows
  Var mul(Var a, Var b);        // element-wise
  Var scale(Var a, T factor);

  // Element-wise nonlinearities.
  Var relu(Var a);
  Var sigmoid(Var a);

  /// Row softmax where columns with key_mask == false get zero weight.
  Var softmax_rows(Var a, const Mask& key_mask);
  Var layer_norm_rows(Var x, Var gamma, Var beta, T eps);

  // Structural.
  Var concat_cols(std::span<const Var> parts);
  /// out(:, j * parts + p) = parts[p](:, j)
  Var interleave_cols(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  /// out.row(t) = a.row(t + offset), zero outside the range.
  Var shift_rows(Var a, Eigen::Index offset);
  Var repeat_rows(Var row, Eigen::Index count);
  Var pad_rows(Var a, Eigen::Index total);
  Var mask_rows(Var a, const Mask& mask);
  /// 1 x n element-wise max over rows with mask == true (first max wins).
  Var max_pool_rows(Var a, const Mask& mask);

  // Reductions to 1 x 1.
  Var sum(Var a);
  /// sum(a .* weights)
  Var weighted_sum(Var a, const Matrix& weights);
  /// Mean of (pred - target)^2 over rows with mask == true; pred is T x 1.
  Var masked_mse(Var pred, const Matrix& target, const Mask& mask);

  /// Seeds d(root)/d(root) = seed and accumulates gradients. `root` must be
  /// 1 x 1.
  void backward(Var root, T seed = T(1));

  /// Adds parameter gradients into `grads`, indexed like the store.
  void accumulate_param_grads(std::vector<Matrix>& grads) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&, std::int32_t)> backprop;
  };

  Var push(Matrix value, bool needs_grad,
           std::function<void(Tape&, std::int32_t)> backprop = {});
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  const Matrix& out_grad(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  Matrix& grad_acc(Var v);

  std::vector<Node> nodes_;
  std::vector<std::pair<std::int32_t, std::size_t>> params_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sfn
