#pragma once

#include "canopy/nn.hpp"
#include "canopy/rng.hpp"
#include "canopy/tensor.hpp"

namespace canopy {

// Scaled dot-product attention: softmax_rows(Q K^T / sqrt(c)) V.
// Q: [m,c], K: [n,c], V: [n,d] -> [m,d].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

enum class AttentionRegime {
  kSelf,                // K,V from the stream's own tokens
  kDualStreamFullFreq,  // K,V from a parallel full-frequency stream
  kCrossReference,      // K,V from the shared reference's tokens
};

// Projection bundle around attention. K and V always come from `kv_tokens`,
// so feeding the stream's own tokens is self-attention and feeding any other
// token matrix is cross attention through the *same* weights -- regimes swap
// without retraining, and CrossReference(h, h) equals SelfAttention(h)
// exactly.
struct AttentionBlock {
  nn::Linear to_q, to_k, to_v, to_out;

  AttentionBlock() = default;
  AttentionBlock(int channels, Rng& rng);

  Tensor operator()(const Tensor& tokens, const Tensor& kv_tokens) const;
  std::vector<Tensor> params() const;
};

// Regime dispatch: h_other must be present exactly when the regime reads the
// other stream.
Tensor attend_with_regime(const AttentionBlock& block, const Tensor& h_own, const Tensor* h_other,
                          AttentionRegime regime);

}  // namespace canopy
