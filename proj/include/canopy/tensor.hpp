#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "canopy/errors.hpp"

namespace canopy {

using Shape = std::vector<Eigen::Index>;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::string shape_str(const Shape& s);
Eigen::Index shape_size(const Shape& s);

// One vertex of the dynamically built computation graph. The graph itself is
// the DAG linked through `parents`; backward() replays the recorded adjoint
// closures in reverse topological order, accumulating (never overwriting)
// into the `grad` buffers. A node's value is immutable once its producing op
// has written it, except for leaves mutated explicitly between graph builds.
struct TensorNode {
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;  // allocated (zeros) iff requires_grad
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;  // empty for leaves
};

// Value-semantics handle to a graph node. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_array(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
  static Tensor from_vector(Shape shape, const std::vector<double>& data,
                            bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Eigen::Index size() const { return node_->value.size(); }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  const Eigen::ArrayXd& value() const { return node_->value; }
  // Leaf-only mutation hook (parameter updates, finite-difference probes).
  Eigen::ArrayXd& mutable_value();
  const Eigen::ArrayXd& grad() const;
  Eigen::ArrayXd& mutable_grad();
  void zero_grad();

  double item() const;  // scalar tensors only

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  ConstMatMap mat() const;  // rank-2 view; rank-1 maps to a column vector

  // Leaf copy of the value, cut off from the graph.
  Tensor detach() const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

namespace detail {
inline thread_local int nograd_depth = 0;
}

// While alive, ops record no graph structure (inference mode).
struct NoGradGuard {
  NoGradGuard() { ++detail::nograd_depth; }
  ~NoGradGuard() { --detail::nograd_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::nograd_depth == 0; }

// ---- differentiable operations -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // input must be > 0
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor sum(const Tensor& a);   // -> shape {1}
Tensor mean(const Tensor& a);  // -> shape {1}

// x: [m,n], bias: [n]; adds bias to every row.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);

// Flat gather: out[i] = a.data[idx[i]], idx[i] == -1 reads 0. Backward
// scatter-adds. Index table is shared, not copied.
Tensor gather(const Tensor& a, std::shared_ptr<const std::vector<std::int64_t>> idx,
              Shape out_shape);
// Row gather for [m,n] tensors (deformation codes per sample).
Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& row_idx);

// Row-wise softmax with max-subtraction. NaN input raises NumericError.
Tensor softmax_rows(const Tensor& x);

// Row-wise layer norm with learned gain/bias of length n.
Tensor layernorm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                      double eps = 1e-6);

// ---- volume rendering compositing -----------------------------------------

// alpha compositing of per-sample densities/colors along rays:
//   alpha_j = 1 - exp(-sigma_j * delta_j)
//   T_j     = prod_{i<j} (1 - alpha_i)
//   w_j     = T_j * alpha_j
//   color   = sum_j w_j c_j + (1 - acc) * background
//   depth   = sum_j w_j t_j / max(acc, eps_acc)
//   acc     = sum_j w_j
struct CompositeOut {
  Tensor color;   // [B,3]
  Tensor depth;   // [B]
  Tensor acc;     // [B]
  Tensor alphas;  // [B,J]
};

// sigma: [B,J] (or [B*J,1]), colors: [B*J,3]; ts/deltas: row-major B*J arrays.
// ts rows must be strictly increasing (ContractError otherwise); sigma >= 0.
CompositeOut composite(const Tensor& sigma, const Tensor& colors, const Eigen::ArrayXd& ts,
                       const Eigen::ArrayXd& deltas, Eigen::Index n_rays,
                       const Eigen::Vector3d& background, double eps_acc = 1e-6);

// Summed Shannon entropy of normalized per-sample opacities over foreground
// rays: p_j = alpha_j / sum_i alpha_i per ray; rays with sum < eps_ray or
// fg_mask == 0 contribute nothing.
Tensor ray_entropy(const Tensor& alphas, const Eigen::ArrayXd& fg_mask, double eps_ray = 1e-8);

// ---- backward pass ---------------------------------------------------------

// Reverse-mode sweep from a scalar root. Each node's adjoint closure runs
// exactly once; gradients accumulate across fan-out.
void backward(const Tensor& root);

// Max over coordinates of |analytic - central difference| normalized by
// (|analytic| + |central| + 1e-12). f must return a scalar tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5);

}  // namespace canopy
