#include "canopy/attention.hpp"

#include <cmath>

namespace canopy {

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw ShapeError("attention: expects matrices");
  if (q.shape()[1] != k.shape()[1])
    throw ShapeError("attention: Q/K channel mismatch " + shape_str(q.shape()) + " vs " +
                     shape_str(k.shape()));
  if (k.shape()[0] != v.shape()[0])
    throw ShapeError("attention: K/V token mismatch " + shape_str(k.shape()) + " vs " +
                     shape_str(v.shape()));
  const double c = static_cast<double>(q.shape()[1]);
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(c));
  return matmul(softmax_rows(scores), v);
}

AttentionBlock::AttentionBlock(int channels, Rng& rng)
    : to_q(channels, channels, rng),
      to_k(channels, channels, rng),
      to_v(channels, channels, rng),
      to_out(channels, channels, rng) {}

Tensor AttentionBlock::operator()(const Tensor& tokens, const Tensor& kv_tokens) const {
  return to_out(attention(to_q(tokens), to_k(kv_tokens), to_v(kv_tokens)));
}

std::vector<Tensor> AttentionBlock::params() const {
  std::vector<Tensor> out;
  to_q.params(out);
  to_k.params(out);
  to_v.params(out);
  to_out.params(out);
  return out;
}

Tensor attend_with_regime(const AttentionBlock& block, const Tensor& h_own, const Tensor* h_other,
                          AttentionRegime regime) {
  const bool wants_other = regime != AttentionRegime::kSelf;
  if (wants_other && h_other == nullptr)
    throw ContractError("attend_with_regime: regime requires the other stream's tokens");
  if (!wants_other && h_other != nullptr)
    throw ContractError("attend_with_regime: self-attention takes no other stream");
  return block(h_own, wants_other ? *h_other : h_own);
}

}  // namespace canopy
