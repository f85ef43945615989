#pragma once

#include "vfa/common.hpp"

namespace vfa {

// Self-attention over the value matrix with Q = K = V: sharpens each token's
// local semantics by mixing it with its own correlates.
struct EnhancedValues {
  Mat v_tilde;             // n x d_v
  int source_layer = 0;
  Mat attention_weights;   // n x n, rows sum to 1
};

struct EnhanceOptions {
  double scale = 0.0;  // 0 -> 1/sqrt(d_v)
};

EnhancedValues self_value_enhance(const Mat& values, int source_layer = 0,
                                  const EnhanceOptions& opt = {});

// Backward through the enhancement given upstream grads on v_tilde.
Mat self_value_enhance_backward(const Mat& values, const EnhancedValues& fwd, const Mat& d_v_tilde,
                                const EnhanceOptions& opt = {});

}  // namespace vfa
