#include "sfn/autograd.hpp"

#include <cmath>
#include <limits>

#include "sfn/error.hpp"
#include "sfn/params.hpp"

namespace sfn {

namespace {

std::string shape_of(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename M>
[[noreturn]] void shape_error(const char* op, const M& a, const M& b) {
  fail(ErrorCode::invalid_argument, std::string("shape mismatch in ") + op + ": " +
                                        shape_of(a.rows(), a.cols()) + " vs " +
                                        shape_of(b.rows(), b.cols()));
}

}  // namespace

template <typename T>
Var Tape<T>::push(Matrix value, bool needs_grad,
                  std::function<void(Tape&, std::int32_t)> backprop) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::constant(Matrix value) {
  return push(std::move(value), false);
}

template <typename T>
Var Tape<T>::leaf(Matrix value) {
  return push(std::move(value), true);
}

template <typename T>
Var Tape<T>::param(const ParamStore<T>& store, const std::string& name) {
  const std::size_t idx = store.index(name);
  for (const auto& [id, bound] : params_) {
    if (bound == idx && nodes_[static_cast<std::size_t>(id)].external == &store.value(idx)) {
      return Var{id};
    }
  }
  Node node;
  node.external = &store.value(idx);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
  params_.emplace_back(id, idx);
  return Var{id};
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.external ? *n.external : n.value;
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::grad(Var v) const {
  return nodes_.at(static_cast<std::size_t>(v.id)).grad;
}

template <typename T>
typename Tape<T>::Matrix& Tape<T>::grad_acc(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) {
    const Matrix& val = n.external ? *n.external : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Matrix out = A * B;
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_acc(a).noalias() += g * t.value(b).transpose();
    if (t.needs(b)) t.grad_acc(b).noalias() += t.value(a).transpose() * g;
  });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) shape_error("matmul_nt", A, B);
  Matrix out = A * B.transpose();
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_acc(a).noalias() += g * t.value(b);
    if (t.needs(b)) t.grad_acc(b).noalias() += g.transpose() * t.value(a);
  });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("add", A, B);
  Matrix out = A + B;
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_acc(a) += g;
    if (t.needs(b)) t.grad_acc(b) += g;
  });
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
  Matrix out = A.rowwise() + R.row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_acc(a) += g;
    if (t.needs(row)) t.grad_acc(row) += g.colwise().sum();
  });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("mul", A, B);
  Matrix out = A.cwiseProduct(B);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_acc(a) += g.cwiseProduct(t.value(b));
    if (t.needs(b)) t.grad_acc(b) += g.cwiseProduct(t.value(a));
  });
}

template <typename T>
Var Tape<T>::scale(Var a, T factor) {
  Matrix out = value(a) * factor;
  return push(std::move(out), needs(a), [a, factor](Tape& t, std::int32_t id) {
    t.grad_acc(a) += t.out_grad(id) * factor;
  });
}

template <typename T>
Var Tape<T>::relu(Var a) {
  Matrix out = value(a).cwiseMax(T(0));
  return push(std::move(out), needs(a), [a](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    const Matrix& x = t.value(a);
    t.grad_acc(a) += (x.array() > T(0)).select(g, T(0));
  });
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
  Matrix out = (T(1) / (T(1) + (-value(a).array()).exp())).matrix();
  return push(std::move(out), needs(a), [a](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    const Matrix& s = t.value(Var{id});
    t.grad_acc(a).array() += g.array() * s.array() * (T(1) - s.array());
  });
}

template <typename T>
Var Tape<T>::softmax_rows(Var a, const Mask& key_mask) {
  const Matrix& A = value(a);
  if (static_cast<Eigen::Index>(key_mask.size()) != A.cols()) {
    fail(ErrorCode::invalid_argument, "softmax key mask has " + std::to_string(key_mask.size()) +
                                          " entries for " + std::to_string(A.cols()) + " columns");
  }
  Matrix out = Matrix::Zero(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    T peak = -std::numeric_limits<T>::infinity();
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (key_mask[static_cast<std::size_t>(c)]) peak = std::max(peak, A(r, c));
    }
    if (!std::isfinite(peak)) fail(ErrorCode::invalid_argument, "softmax over no valid keys");
    T total = 0;
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (key_mask[static_cast<std::size_t>(c)]) total += out(r, c) = std::exp(A(r, c) - peak);
    }
    out.row(r) /= total;
  }
  return push(std::move(out), needs(a), [a](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    const Matrix& p = t.value(Var{id});
    const auto dot = (g.cwiseProduct(p)).rowwise().sum();
    t.grad_acc(a).array() += p.array() * (g.colwise() - dot).array();
  });
}

template <typename T>
Var Tape<T>::layer_norm_rows(Var x, Var gamma, Var beta, T eps) {
  const Matrix& X = value(x);
  const Matrix& G = value(gamma);
  const Matrix& Bt = value(beta);
  if (G.rows() != 1 || G.cols() != X.cols()) shape_error("layer_norm gamma", X, G);
  if (Bt.rows() != 1 || Bt.cols() != X.cols()) shape_error("layer_norm beta", X, Bt);
  const auto n = static_cast<T>(X.cols());
  Matrix normalized(X.rows(), X.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const T mean = X.row(r).sum() / n;
    const T var = (X.row(r).array() - mean).square().sum() / n;
    inv_std(r) = T(1) / std::sqrt(var + eps);
    normalized.row(r) = (X.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (normalized.array().rowwise() * G.row(0).array()).rowwise() + Bt.row(0).array();
  return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
              [x, gamma, beta, normalized = std::move(normalized),
               inv_std = std::move(inv_std)](Tape& t, std::int32_t id) {
                const Matrix& g = t.out_grad(id);
                if (t.needs(gamma)) t.grad_acc(gamma) += g.cwiseProduct(normalized).colwise().sum();
                if (t.needs(beta)) t.grad_acc(beta) += g.colwise().sum();
                if (t.needs(x)) {
                  const Matrix dn = g.array().rowwise() * t.value(gamma).row(0).array();
                  const auto n = static_cast<T>(dn.cols());
                  Matrix& dx = t.grad_acc(x);
                  for (Eigen::Index r = 0; r < dn.rows(); ++r) {
                    const T mean_dn = dn.row(r).sum() / n;
                    const T mean_dn_x = dn.row(r).dot(normalized.row(r)) / n;
                    dx.row(r).array() +=
                        inv_std(r) * (dn.row(r).array() - mean_dn - normalized.row(r).array() * mean_dn_x);
                  }
                }
              });
}

template <typename T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::invalid_argument, "concat of nothing");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) shape_error("concat_cols", value(parts[0]), value(p));
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (Var p : parts) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    Eigen::Index offset = 0;
    for (Var p : inputs) {
      const Eigen::Index width = t.value(p).cols();
      if (t.needs(p)) t.grad_acc(p) += g.middleCols(offset, width);
      offset += width;
    }
  });
}

template <typename T>
Var Tape<T>::interleave_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::invalid_argument, "interleave of nothing");
  const Matrix& first = value(parts[0]);
  const auto count = static_cast<Eigen::Index>(parts.size());
  bool any = false;
  for (Var p : parts) {
    if (value(p).rows() != first.rows() || value(p).cols() != first.cols()) {
      shape_error("interleave_cols", first, value(p));
    }
    any = any || needs(p);
  }
  Matrix out(first.rows(), first.cols() * count);
  for (Eigen::Index p = 0; p < count; ++p) {
    const Matrix& v = value(parts[static_cast<std::size_t>(p)]);
    for (Eigen::Index j = 0; j < v.cols(); ++j) out.col(j * count + p) = v.col(j);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs, count](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    for (Eigen::Index p = 0; p < count; ++p) {
      const Var in = inputs[static_cast<std::size_t>(p)];
      if (!t.needs(in)) continue;
      Matrix& d = t.grad_acc(in);
      for (Eigen::Index j = 0; j < d.cols(); ++j) d.col(j) += g.col(j * count + p);
    }
  });
}

template <typename T>
Var Tape<T>::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.cols()) {
    fail(ErrorCode::invalid_argument, "slice_cols out of range for " + shape_of(A.rows(), A.cols()));
  }
  Matrix out = A.middleCols(start, count);
  return push(std::move(out), needs(a), [a, start, count](Tape& t, std::int32_t id) {
    t.grad_acc(a).middleCols(start, count) += t.out_grad(id);
  });
}

template <typename T>
Var Tape<T>::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.rows()) {
    fail(ErrorCode::invalid_argument, "slice_rows out of range for " + shape_of(A.rows(), A.cols()));
  }
  Matrix out = A.middleRows(start, count);
  return push(std::move(out), needs(a), [a, start, count](Tape& t, std::int32_t id) {
    t.grad_acc(a).middleRows(start, count) += t.out_grad(id);
  });
}

template <typename T>
Var Tape<T>::shift_rows(Var a, Eigen::Index offset) {
  const Matrix& A = value(a);
  const Eigen::Index rows = A.rows();
  Matrix out = Matrix::Zero(rows, A.cols());
  const Eigen::Index begin = std::max<Eigen::Index>(0, -offset);
  const Eigen::Index end = std::min(rows, rows - offset);
  if (end > begin) out.middleRows(begin, end - begin) = A.middleRows(begin + offset, end - begin);
  return push(std::move(out), needs(a), [a, offset, begin, end](Tape& t, std::int32_t id) {
    if (end > begin) {
      t.grad_acc(a).middleRows(begin + offset, end - begin) += t.out_grad(id).middleRows(begin, end - begin);
    }
  });
}

template <typename T>
Var Tape<T>::repeat_rows(Var row, Eigen::Index count) {
  const Matrix& R = value(row);
  if (R.rows() != 1) fail(ErrorCode::invalid_argument, "repeat_rows expects a single row");
  Matrix out = R.replicate(count, 1);
  return push(std::move(out), needs(row), [row](Tape& t, std::int32_t id) {
    t.grad_acc(row) += t.out_grad(id).colwise().sum();
  });
}

template <typename T>
Var Tape<T>::pad_rows(Var a, Eigen::Index total) {
  const Matrix& A = value(a);
  if (total < A.rows()) fail(ErrorCode::invalid_argument, "pad_rows would truncate");
  Matrix out = Matrix::Zero(total, A.cols());
  out.topRows(A.rows()) = A;
  const Eigen::Index rows = A.rows();
  return push(std::move(out), needs(a), [a, rows](Tape& t, std::int32_t id) {
    t.grad_acc(a) += t.out_grad(id).topRows(rows);
  });
}

template <typename T>
Var Tape<T>::mask_rows(Var a, const Mask& mask) {
  const Matrix& A = value(a);
  if (static_cast<Eigen::Index>(mask.size()) != A.rows()) {
    fail(ErrorCode::invalid_argument, "mask has " + std::to_string(mask.size()) +
                                          " entries for " + std::to_string(A.rows()) + " rows");
  }
  Matrix out = A;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) out.row(r).setZero();
  }
  return push(std::move(out), needs(a), [a, mask](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    Matrix& d = t.grad_acc(a);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (mask[static_cast<std::size_t>(r)]) d.row(r) += g.row(r);
    }
  });
}

template <typename T>
Var Tape<T>::max_pool_rows(Var a, const Mask& mask) {
  const Matrix& A = value(a);
  if (static_cast<Eigen::Index>(mask.size()) != A.rows()) {
    fail(ErrorCode::invalid_argument, "max_pool mask does not match rows");
  }
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(A.cols()), -1);
  Matrix out(1, A.cols());
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      if (!mask[static_cast<std::size_t>(r)]) continue;
      auto& best = arg[static_cast<std::size_t>(c)];
      if (best < 0 || A(r, c) > A(best, c)) best = r;
    }
    if (arg[static_cast<std::size_t>(c)] < 0) {
      fail(ErrorCode::invalid_argument, "max pool over an empty view");
    }
    out(0, c) = A(arg[static_cast<std::size_t>(c)], c);
  }
  return push(std::move(out), needs(a), [a, arg](Tape& t, std::int32_t id) {
    const Matrix& g = t.out_grad(id);
    Matrix& d = t.grad_acc(a);
    for (std::size_t c = 0; c < arg.size(); ++c) {
      d(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    }
  });
}

template <typename T>
Var Tape<T>::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), needs(a), [a](Tape& t, std::int32_t id) {
    t.grad_acc(a).array() += t.out_grad(id)(0, 0);
  });
}

template <typename T>
Var Tape<T>::weighted_sum(Var a, const Matrix& weights) {
  const Matrix& A = value(a);
  if (A.rows() != weights.rows() || A.cols() != weights.cols()) shape_error("weighted_sum", A, weights);
  Matrix out(1, 1);
  out(0, 0) = A.cwiseProduct(weights).sum();
  return push(std::move(out), needs(a), [a, weights](Tape& t, std::int32_t id) {
    t.grad_acc(a) += t.out_grad(id)(0, 0) * weights;
  });
}

template <typename T>
Var Tape<T>::masked_mse(Var pred, const Matrix& target, const Mask& mask) {
  const Matrix& P = value(pred);
  if (P.cols() != 1 || target.rows() != P.rows() || target.cols() != 1) {
    shape_error("masked_mse", P, target);
  }
  if (static_cast<Eigen::Index>(mask.size()) != P.rows()) {
    fail(ErrorCode::invalid_argument, "mse mask does not match prediction length");
  }
  const auto valid = static_cast<T>(count_valid(mask));
  if (valid == T(0)) fail(ErrorCode::invalid_argument, "empty view");
  Matrix diff = P - target;
  for (Eigen::Index r = 0; r < diff.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) diff(r, 0) = T(0);
  }
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / valid;
  return push(std::move(out), needs(pred), [pred, diff = std::move(diff), valid](Tape& t, std::int32_t id) {
    t.grad_acc(pred) += (T(2) * t.out_grad(id)(0, 0) / valid) * diff;
  });
}

template <typename T>
void Tape<T>::backward(Var root, T seed) {
  const Matrix& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) {
    fail(ErrorCode::invalid_argument, "backward root must be 1x1, got " + shape_of(r.rows(), r.cols()));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  grad_acc(root)(0, 0) = seed;
  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backprop && n.grad.size() != 0) n.backprop(*this, id);
  }
}

template <typename T>
void Tape<T>::accumulate_param_grads(std::vector<Matrix>& grads) const {
  for (const auto& [id, idx] : params_) {
    const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
    if (g.size() != 0) grads[idx] += g;
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sfn
