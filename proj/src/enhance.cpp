#include "vfa/enhance.hpp"

#include <cmath>

#include "vfa/vit.hpp"

namespace vfa {

namespace {
double effective_scale(const Mat& values, const EnhanceOptions& opt) {
  return opt.scale > 0.0 ? opt.scale : 1.0 / std::sqrt(double(values.cols()));
}
}  // namespace

EnhancedValues self_value_enhance(const Mat& values, int source_layer, const EnhanceOptions& opt) {
  require_finite(values, "self_value_enhance");
  if (values.rows() == 0) throw InputError("self_value_enhance: empty value matrix");
  const double scale = effective_scale(values, opt);
  EnhancedValues out;
  out.source_layer = source_layer;
  Mat logits = values * values.transpose() * scale;
  out.attention_weights = softmax_rows(logits);
  out.v_tilde = out.attention_weights * values;
  return out;
}

Mat self_value_enhance_backward(const Mat& values, const EnhancedValues& fwd, const Mat& d_v_tilde,
                                const EnhanceOptions& opt) {
  const double scale = effective_scale(values, opt);
  const Mat& A = fwd.attention_weights;
  Mat dV = A.transpose() * d_v_tilde;           // value route
  Mat dA = d_v_tilde * values.transpose();      // mixing-weight route
  Mat dS = softmax_rows_backward(A, dA);
  dV += scale * (dS + dS.transpose()) * values;  // logits = scale * V V^T
  return dV;
}

}  // namespace vfa
