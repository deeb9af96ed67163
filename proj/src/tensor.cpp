#include "canopy/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace canopy {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Eigen::Index shape_size(const Shape& s) {
  Eigen::Index n = 1;
  for (auto d : s) n *= d;
  return n;
}

namespace {

std::shared_ptr<TensorNode> make_leaf(Shape shape, Eigen::ArrayXd value, bool requires_grad) {
  if (shape_size(shape) != value.size())
    throw ShapeError("tensor data length " + std::to_string(value.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad = Eigen::ArrayXd::Zero(n->value.size());
  return n;
}

using BackwardFn = std::function<void(TensorNode&)>;

Tensor make_op(Shape shape, Eigen::ArrayXd value, std::vector<Tensor> parents, BackwardFn fn) {
  bool rg = grad_enabled();
  if (rg) {
    rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = rg;
  if (rg) {
    n->grad = Eigen::ArrayXd::Zero(n->value.size());
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(fn);
  }
  return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " must match exactly");
}

void accumulate(TensorNode& parent, const Eigen::ArrayXd& g) {
  if (parent.requires_grad) parent.grad += g;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(shape_size(shape));
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Eigen::ArrayXd a = Eigen::ArrayXd::Constant(shape_size(shape), v);
  return Tensor(make_leaf(std::move(shape), std::move(a), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full({1}, v, requires_grad); }

Tensor Tensor::from_array(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_vector(Shape shape, const std::vector<double>& data, bool requires_grad) {
  Eigen::ArrayXd a =
      Eigen::Map<const Eigen::ArrayXd>(data.data(), static_cast<Eigen::Index>(data.size()));
  return Tensor(make_leaf(std::move(shape), std::move(a), requires_grad));
}

Eigen::ArrayXd& Tensor::mutable_value() {
  if (node_->backward) throw ContractError("mutable_value: only leaf tensors may be mutated");
  return node_->value;
}

const Eigen::ArrayXd& Tensor::grad() const {
  if (!node_->requires_grad) throw ContractError("grad: tensor does not require grad");
  return node_->grad;
}

Eigen::ArrayXd& Tensor::mutable_grad() {
  if (!node_->requires_grad) throw ContractError("grad: tensor does not require grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.setZero();
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item: tensor " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

Eigen::Index Tensor::rows() const {
  if (rank() == 1) return node_->shape[0];
  if (rank() == 2) return node_->shape[0];
  throw ShapeError("rows: tensor " + shape_str(shape()) + " is not rank 1 or 2");
}

Eigen::Index Tensor::cols() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return node_->shape[1];
  throw ShapeError("cols: tensor " + shape_str(shape()) + " is not rank 1 or 2");
}

ConstMatMap Tensor::mat() const { return ConstMatMap(node_->value.data(), rows(), cols()); }

Tensor Tensor::detach() const {
  return Tensor(make_leaf(node_->shape, node_->value, false));
}

// ---- matmul / transpose ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const Eigen::Index m = a.rows(), k = a.cols(), n = b.cols();
  Eigen::ArrayXd out(m * n);
  MatMap(out.data(), m, n).noalias() = a.mat() * b.mat();
  auto an = a.node();
  auto bn = b.node();
  return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode& self) {
    ConstMatMap g(self.grad.data(), m, n);
    if (an->requires_grad) {
      MatMap ga(an->grad.data(), m, k);
      ga.noalias() += g * ConstMatMap(bn->value.data(), k, n).transpose();
    }
    if (bn->requires_grad) {
      MatMap gb(bn->grad.data(), k, n);
      gb.noalias() += ConstMatMap(an->value.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expects rank-2, got " + shape_str(a.shape()));
  const Eigen::Index m = a.rows(), n = a.cols();
  Eigen::ArrayXd out(m * n);
  MatMap(out.data(), n, m) = a.mat().transpose();
  auto an = a.node();
  return make_op({n, m}, std::move(out), {a}, [an, m, n](TensorNode& self) {
    if (!an->requires_grad) return;
    MatMap(an->grad.data(), m, n) += ConstMatMap(self.grad.data(), n, m).transpose();
  });
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), a.value() + b.value(), {a, b}, [an, bn](TensorNode& self) {
    accumulate(*an, self.grad);
    accumulate(*bn, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), a.value() - b.value(), {a, b}, [an, bn](TensorNode& self) {
    accumulate(*an, self.grad);
    if (bn->requires_grad) bn->grad -= self.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), a.value() * b.value(), {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * bn->value;
    if (bn->requires_grad) bn->grad += self.grad * an->value;
  });
}

Tensor scale(const Tensor& a, double s) {
  auto an = a.node();
  return make_op(a.shape(), a.value() * s, {a}, [an, s](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * s;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  auto an = a.node();
  return make_op(a.shape(), a.value() + c, {a},
                 [an](TensorNode& self) { accumulate(*an, self.grad); });
}

Tensor relu(const Tensor& a) {
  auto an = a.node();
  return make_op(a.shape(), a.value().max(0.0), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * (an->value > 0.0).cast<double>();
  });
}

Tensor abs(const Tensor& a) {
  auto an = a.node();
  return make_op(a.shape(), a.value().abs(), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * an->value.sign();
  });
}

Tensor exp(const Tensor& a) {
  auto an = a.node();
  return make_op(a.shape(), a.value().exp(), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * self.value;
  });
}

Tensor log(const Tensor& a) {
  if ((a.value() <= 0.0).any())
    throw NumericError("log: input has non-positive entries");
  auto an = a.node();
  return make_op(a.shape(), a.value().log(), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad / an->value;
  });
}

Tensor sin(const Tensor& a) {
  auto an = a.node();
  return make_op(a.shape(), a.value().sin(), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * an->value.cos();
  });
}

Tensor cos(const Tensor& a) {
  auto an = a.node();
  return make_op(a.shape(), a.value().cos(), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad -= self.grad * an->value.sin();
  });
}

Tensor sqrt(const Tensor& a) {
  if ((a.value() < 0.0).any()) throw NumericError("sqrt: input has negative entries");
  auto an = a.node();
  return make_op(a.shape(), a.value().sqrt(), {a}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    // subgradient 0 where the value is exactly 0
    an->grad += (self.value > 0.0).select(self.grad * 0.5 / self.value.max(1e-300), 0.0);
  });
}

Tensor softplus(const Tensor& a) {
  // log(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}) for stability
  Eigen::ArrayXd v = a.value().max(0.0) + (-a.value().abs()).exp().log1p();
  auto an = a.node();
  return make_op(a.shape(), std::move(v), {a}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->grad += self.grad / (1.0 + (-an->value).exp());
  });
}

Tensor sigmoid(const Tensor& a) {
  Eigen::ArrayXd v = 0.5 * (0.5 * a.value()).tanh() + 0.5;
  auto an = a.node();
  return make_op(a.shape(), std::move(v), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad * self.value * (1.0 - self.value);
  });
}

Tensor sum(const Tensor& a) {
  auto an = a.node();
  Eigen::ArrayXd v(1);
  v[0] = a.value().sum();
  return make_op({1}, std::move(v), {a}, [an](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  auto an = a.node();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  Eigen::ArrayXd v(1);
  v[0] = a.value().mean();
  return make_op({1}, std::move(v), {a}, [an, inv_n](TensorNode& self) {
    if (an->requires_grad) an->grad += self.grad[0] * inv_n;
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.cols())
    throw ShapeError("add_row_bias: x " + shape_str(x.shape()) + " vs bias " +
                     shape_str(bias.shape()));
  const Eigen::Index m = x.rows(), n = x.cols();
  Eigen::ArrayXd out(m * n);
  MatMap(out.data(), m, n) =
      x.mat().rowwise() + Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), n);
  auto xn = x.node();
  auto bn = bias.node();
  return make_op({m, n}, std::move(out), {x, bias}, [xn, bn, m, n](TensorNode& self) {
    accumulate(*xn, self.grad);
    if (bn->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd>(bn->grad.data(), n) +=
          ConstMatMap(self.grad.data(), m, n).colwise().sum();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const Eigen::Index m = parts[0].rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m)
      throw ShapeError("concat_cols: all parts need rank 2 and matching rows, got " +
                       shape_str(p.shape()));
    total += p.cols();
  }
  Eigen::ArrayXd out(m * total);
  MatMap o(out.data(), m, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    o.middleCols(at, p.cols()) = p.mat();
    at += p.cols();
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.cols());
  }
  return make_op({m, total}, std::move(out), parts,
                 [nodes, widths, m, total](TensorNode& self) {
                   ConstMatMap g(self.grad.data(), m, total);
                   Eigen::Index at = 0;
                   for (size_t i = 0; i < nodes.size(); ++i) {
                     if (nodes[i]->requires_grad)
                       MatMap(nodes[i]->grad.data(), m, widths[i]) += g.middleCols(at, widths[i]);
                     at += widths[i];
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  auto an = a.node();
  return make_op(std::move(shape), a.value(), {a},
                 [an](TensorNode& self) { accumulate(*an, self.grad); });
}

Tensor gather(const Tensor& a, std::shared_ptr<const std::vector<std::int64_t>> idx,
              Shape out_shape) {
  const auto& ix = *idx;
  if (shape_size(out_shape) != static_cast<Eigen::Index>(ix.size()))
    throw ShapeError("gather: index count " + std::to_string(ix.size()) +
                     " does not match out shape " + shape_str(out_shape));
  const Eigen::Index n = a.size();
  Eigen::ArrayXd out(static_cast<Eigen::Index>(ix.size()));
  const double* src = a.value().data();
  for (size_t i = 0; i < ix.size(); ++i) {
    const std::int64_t j = ix[i];
    if (j >= n) throw BoundsError("gather: index " + std::to_string(j) + " out of range");
    out[static_cast<Eigen::Index>(i)] = j < 0 ? 0.0 : src[j];
  }
  auto an = a.node();
  return make_op(std::move(out_shape), std::move(out), {a}, [an, idx](TensorNode& self) {
    if (!an->requires_grad) return;
    double* dst = an->grad.data();
    const auto& ix = *idx;
    for (size_t i = 0; i < ix.size(); ++i)
      if (ix[i] >= 0) dst[ix[i]] += self.grad[static_cast<Eigen::Index>(i)];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& row_idx) {
  if (a.rank() != 2) throw ShapeError("gather_rows: expects rank-2, got " + shape_str(a.shape()));
  const Eigen::Index n = a.cols(), m = a.rows();
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(row_idx.size() * n);
  for (auto r : row_idx) {
    if (r < 0 || r >= m) throw BoundsError("gather_rows: row " + std::to_string(r) + " out of range");
    for (Eigen::Index c = 0; c < n; ++c) idx->push_back(r * n + c);
  }
  return gather(a, std::move(idx), {static_cast<Eigen::Index>(row_idx.size()), n});
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: expects rank-2, got " + shape_str(x.shape()));
  if (x.value().isNaN().any()) throw NumericError("softmax_rows: NaN input");
  const Eigen::Index m = x.rows(), n = x.cols();
  Eigen::ArrayXd out(m * n);
  MatMap o(out.data(), m, n);
  ConstMatMap in = x.mat();
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::ArrayXd row = in.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    o.row(i) = (row / row.sum()).matrix();
  }
  auto xn = x.node();
  return make_op({m, n}, std::move(out), {x}, [xn, m, n](TensorNode& self) {
    if (!xn->requires_grad) return;
    ConstMatMap y(self.value.data(), m, n);
    ConstMatMap g(self.grad.data(), m, n);
    MatMap gx(xn->grad.data(), m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double dot = (g.row(i).array() * y.row(i).array()).sum();
      gx.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
    }
  });
}

Tensor layernorm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() != 2 || gain.shape() != Shape{x.cols()} || bias.shape() != Shape{x.cols()})
    throw ShapeError("layernorm_rows: x " + shape_str(x.shape()) + ", gain " +
                     shape_str(gain.shape()) + ", bias " + shape_str(bias.shape()));
  const Eigen::Index m = x.rows(), n = x.cols();
  Eigen::ArrayXd out(m * n);
  Eigen::ArrayXd xhat(m * n);
  Eigen::ArrayXd inv_std(m);
  {
    ConstMatMap in = x.mat();
    MatMap o(out.data(), m, n);
    MatMap xh(xhat.data(), m, n);
    const auto& gseq = gain.value();
    const auto& bseq = bias.value();
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::ArrayXd row = in.row(i).array();
      const double mu = row.mean();
      const double var = (row - mu).square().mean();
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[i] = is;
      xh.row(i) = ((row - mu) * is).matrix();
      o.row(i) = (xh.row(i).array() * gseq.transpose() + bseq.transpose()).matrix();
    }
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  auto xh_cache = std::make_shared<Eigen::ArrayXd>(std::move(xhat));
  auto is_cache = std::make_shared<Eigen::ArrayXd>(std::move(inv_std));
  return make_op({m, n}, std::move(out), {x, gain, bias},
                 [xn, gn, bn, xh_cache, is_cache, m, n](TensorNode& self) {
                   ConstMatMap g(self.grad.data(), m, n);
                   ConstMatMap xh(xh_cache->data(), m, n);
                   for (Eigen::Index i = 0; i < m; ++i) {
                     Eigen::ArrayXd gi = g.row(i).array();
                     Eigen::ArrayXd xhi = xh.row(i).array();
                     if (gn->requires_grad) gn->grad += gi * xhi;
                     if (bn->requires_grad) bn->grad += gi;
                     if (xn->requires_grad) {
                       Eigen::ArrayXd dxh = gi * gn->value;
                       const double mean_dxh = dxh.mean();
                       const double mean_dxh_xh = (dxh * xhi).mean();
                       Eigen::Map<Eigen::RowVectorXd>(xn->grad.data() + i * n, n).array() +=
                           (*is_cache)[i] * (dxh - mean_dxh - xhi * mean_dxh_xh);
                     }
                   }
                 });
}

// ---- compositing -----------------------------------------------------------

namespace {

struct CompositeCache {
  Eigen::Index B = 0, J = 0;
  Eigen::ArrayXd alphas;     // B*J
  Eigen::ArrayXd one_minus;  // B*J, exp(-sigma*delta) = 1 - alpha
  Eigen::ArrayXd trans;      // B*J, T_j
  Eigen::ArrayXd weights;    // B*J
  Eigen::ArrayXd acc;        // B
  Eigen::ArrayXd depth_num;  // B, sum w_j t_j
  Eigen::ArrayXd ts;         // B*J
  Eigen::ArrayXd deltas;     // B*J
  Eigen::Vector3d bg;
  double eps_acc = 1e-6;

  // Chain an adjoint on the weights into sigma's grad. gw is one ray's
  // adjoint over J weights.
  void weights_adjoint_to_sigma(Eigen::Index ray, const Eigen::ArrayXd& gw,
                                Eigen::ArrayXd& sigma_grad) const {
    const Eigen::Index off = ray * J;
    // suffix sums S_k = sum_{j>k} gw_j w_j
    double suffix = 0.0;
    for (Eigen::Index k = J - 1; k >= 0; --k) {
      const Eigen::Index i = off + k;
      double ga = gw[k] * trans[i];
      if (one_minus[i] > 0.0) ga -= suffix / one_minus[i];
      sigma_grad[i] += ga * deltas[i] * one_minus[i];
      suffix += gw[k] * weights[i];
    }
  }
  void alpha_adjoint_to_sigma(Eigen::Index i, double ga, Eigen::ArrayXd& sigma_grad) const {
    sigma_grad[i] += ga * deltas[i] * one_minus[i];
  }
};

}  // namespace

CompositeOut composite(const Tensor& sigma, const Tensor& colors, const Eigen::ArrayXd& ts,
                       const Eigen::ArrayXd& deltas, Eigen::Index n_rays,
                       const Eigen::Vector3d& background, double eps_acc) {
  const Eigen::Index total = sigma.size();
  if (n_rays <= 0 || total % n_rays != 0)
    throw ShapeError("composite: sigma size " + std::to_string(total) +
                     " not divisible into " + std::to_string(n_rays) + " rays");
  const Eigen::Index J = total / n_rays;
  if (colors.rank() != 2 || colors.rows() != total || colors.cols() != 3)
    throw ShapeError("composite: colors " + shape_str(colors.shape()) + " vs expected [" +
                     std::to_string(total) + "x3]");
  if (ts.size() != total || deltas.size() != total)
    throw ShapeError("composite: ts/deltas size mismatch");
  if ((sigma.value() < 0.0).any()) throw ContractError("composite: sigma must be >= 0");
  for (Eigen::Index r = 0; r < n_rays; ++r)
    for (Eigen::Index j = 1; j < J; ++j)
      if (ts[r * J + j] <= ts[r * J + j - 1])
        throw ContractError("composite: sample depths must be strictly increasing along rays");

  auto cache = std::make_shared<CompositeCache>();
  cache->B = n_rays;
  cache->J = J;
  cache->ts = ts;
  cache->deltas = deltas;
  cache->bg = background;
  cache->eps_acc = eps_acc;
  cache->one_minus = (-(sigma.value() * deltas)).exp();
  cache->alphas = 1.0 - cache->one_minus;
  cache->trans.resize(total);
  cache->weights.resize(total);
  cache->acc = Eigen::ArrayXd::Zero(n_rays);
  cache->depth_num = Eigen::ArrayXd::Zero(n_rays);

  Eigen::ArrayXd color_out(n_rays * 3);
  Eigen::ArrayXd depth_out(n_rays);
  ConstMatMap cmat = colors.mat();
  for (Eigen::Index r = 0; r < n_rays; ++r) {
    double T = 1.0;
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::Index i = r * J + j;
      cache->trans[i] = T;
      const double w = T * cache->alphas[i];
      cache->weights[i] = w;
      cache->acc[r] += w;
      cache->depth_num[r] += w * ts[i];
      c += w * cmat.row(i).transpose();
      T *= cache->one_minus[i];
    }
    c += (1.0 - cache->acc[r]) * background;
    color_out.segment(r * 3, 3) = c.array();
    depth_out[r] = cache->depth_num[r] / std::max(cache->acc[r], eps_acc);
  }

  CompositeOut out;
  out.color = make_op({n_rays, 3}, std::move(color_out), {sigma, colors},
                      [cache, sn = sigma.node(), cn = colors.node()](TensorNode& self) {
                        const Eigen::Index B = cache->B, J = cache->J;
                        ConstMatMap g(self.grad.data(), B, 3);
                        Eigen::ArrayXd gw(J);
                        for (Eigen::Index r = 0; r < B; ++r) {
                          double g_dot_bg = 0.0;
                          for (int ch = 0; ch < 3; ++ch) g_dot_bg += g(r, ch) * cache->bg[ch];
                          for (Eigen::Index j = 0; j < J; ++j) {
                            const Eigen::Index i = r * J + j;
                            // d color / d w_j = c_j - bg
                            double s = 0.0;
                            for (int ch = 0; ch < 3; ++ch) {
                              s += g(r, ch) * cn->value[i * 3 + ch];
                              if (cn->requires_grad)
                                cn->grad[i * 3 + ch] += g(r, ch) * cache->weights[i];
                            }
                            gw[j] = s - g_dot_bg;
                          }
                          if (sn->requires_grad)
                            cache->weights_adjoint_to_sigma(r, gw, sn->grad);
                        }
                      });
  out.depth = make_op({n_rays}, std::move(depth_out), {sigma},
                      [cache, sn = sigma.node()](TensorNode& self) {
                        if (!sn->requires_grad) return;
                        const Eigen::Index B = cache->B, J = cache->J;
                        Eigen::ArrayXd gw(J);
                        for (Eigen::Index r = 0; r < B; ++r) {
                          const double gd = self.grad[r];
                          if (gd == 0.0) continue;
                          const double denom = std::max(cache->acc[r], cache->eps_acc);
                          const bool live = cache->acc[r] > cache->eps_acc;
                          for (Eigen::Index j = 0; j < J; ++j) {
                            const Eigen::Index i = r * J + j;
                            double d = cache->ts[i] / denom;
                            if (live) d -= cache->depth_num[r] / (denom * denom);
                            gw[j] = gd * d;
                          }
                          cache->weights_adjoint_to_sigma(r, gw, sn->grad);
                        }
                      });
  out.acc = make_op({n_rays}, Eigen::ArrayXd(cache->acc), {sigma},
                    [cache, sn = sigma.node()](TensorNode& self) {
                      if (!sn->requires_grad) return;
                      const Eigen::Index B = cache->B, J = cache->J;
                      Eigen::ArrayXd gw(J);
                      for (Eigen::Index r = 0; r < B; ++r) {
                        if (self.grad[r] == 0.0) continue;
                        gw.setConstant(self.grad[r]);
                        cache->weights_adjoint_to_sigma(r, gw, sn->grad);
                      }
                    });
  out.alphas = make_op({n_rays, J}, Eigen::ArrayXd(cache->alphas), {sigma},
                       [cache, sn = sigma.node()](TensorNode& self) {
                         if (!sn->requires_grad) return;
                         for (Eigen::Index i = 0; i < self.grad.size(); ++i)
                           if (self.grad[i] != 0.0)
                             cache->alpha_adjoint_to_sigma(i, self.grad[i], sn->grad);
                       });
  return out;
}

Tensor ray_entropy(const Tensor& alphas, const Eigen::ArrayXd& fg_mask, double eps_ray) {
  if (alphas.rank() != 2)
    throw ShapeError("ray_entropy: expects [B,J] alphas, got " + shape_str(alphas.shape()));
  const Eigen::Index B = alphas.rows(), J = alphas.cols();
  if (fg_mask.size() != B) throw ShapeError("ray_entropy: mask length mismatch");
  if ((alphas.value() < -1e-12).any() || (alphas.value() > 1.0 + 1e-12).any())
    throw ContractError("ray_entropy: alphas must lie in [0,1]");

  const auto& a = alphas.value();
  double total = 0.0;
  auto sums = std::make_shared<Eigen::ArrayXd>(B);
  auto ents = std::make_shared<Eigen::ArrayXd>(B);
  for (Eigen::Index r = 0; r < B; ++r) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) s += a[r * J + j];
    (*sums)[r] = s;
    double e = 0.0;
    if (fg_mask[r] != 0.0 && s >= eps_ray) {
      for (Eigen::Index j = 0; j < J; ++j) {
        const double p = a[r * J + j] / s;
        if (p > 0.0) e -= p * std::log(p);
      }
      total += e;
    }
    (*ents)[r] = e;
  }
  Eigen::ArrayXd v(1);
  v[0] = total;
  auto an = alphas.node();
  auto mask = std::make_shared<Eigen::ArrayXd>(fg_mask);
  return make_op({1}, std::move(v), {alphas},
                 [an, sums, ents, mask, B, J, eps_ray](TensorNode& self) {
                   if (!an->requires_grad) return;
                   const double g = self.grad[0];
                   for (Eigen::Index r = 0; r < B; ++r) {
                     if ((*mask)[r] == 0.0 || (*sums)[r] < eps_ray) continue;
                     const double s = (*sums)[r];
                     for (Eigen::Index j = 0; j < J; ++j) {
                       const double av = an->value[r * J + j];
                       if (av <= 0.0) continue;  // zero-opacity samples carry no adjoint
                       const double p = av / s;
                       an->grad[r * J + j] += g * (-(std::log(p) + (*ents)[r]) / s);
                     }
                   }
                 });
}

// ---- backward --------------------------------------------------------------

void backward(const Tensor& root) {
  if (root.size() != 1)
    throw ContractError("backward: root must be scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // iterative post-order DFS over requires_grad ancestors
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node().get(), 0});
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  Tensor probe = Tensor::from_array(x.shape(), x.value(), true);
  Tensor y = f(probe);
  if (y.size() != 1)
    throw ContractError("grad_check: f must return a scalar, got " + shape_str(y.shape()));
  backward(y);
  Eigen::ArrayXd analytic = probe.grad();

  double max_rel = 0.0;
  NoGradGuard ng;
  auto& vals = probe.mutable_value();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    const double orig = vals[i];
    vals[i] = orig + eps;
    const double fp = f(probe).item();
    vals[i] = orig - eps;
    const double fm = f(probe).item();
    vals[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double rel =
        std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace canopy
