#include "vfa/locate.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "vfa/enhance.hpp"

namespace vfa {

using json = nlohmann::json;

Vec similarity_scores(const Mat& tokens, const TextEmbedding& text, const SurrogateHandle& handle,
                      bool pre_projection_norm) {
  if (std::abs(text.joint_vector.norm() - 1.0) > 1e-5)
    throw InputError("similarity_scores: text embedding is not unit norm");
  Mat projected = joint_project_rows(*handle, tokens, pre_projection_norm);
  if (projected.cols() != text.joint_vector.size())
    throw ShapeError("similarity_scores: joint dimension mismatch");
  Vec s(projected.rows());
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    double nrm = projected.row(i).norm();
    s(i) = nrm == 0.0 ? 0.0 : projected.row(i).dot(text.joint_vector.transpose()) / nrm;
  }
  return s;
}

double dynamic_threshold(const Vec& scores) {
  if (scores.size() == 0) throw InputError("dynamic_threshold: empty score vector");
  return 0.5 * (scores.maxCoeff() + scores.minCoeff());
}

std::vector<int> alignment_set(const Vec& scores, double tau) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores(i) > tau) idx.push_back(int(i));
  return idx;
}

AlignmentMask make_mask(const Vec& scores, const std::string& surrogate_id, int layer) {
  AlignmentMask m;
  m.scores = scores;
  m.tau = dynamic_threshold(scores);
  m.indices = alignment_set(scores, m.tau);
  m.surrogate_id = surrogate_id;
  m.layer = layer;
  if (m.indices.empty()) {
    // constant-score degenerate case: keep the argmax so the loss has support
    int best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i)
      if (scores(i) > scores(best)) best = int(i);
    m.indices = {best};
    m.fallback_used = true;
  }
  return m;
}

std::vector<AlignmentMask> locate(const EncoderOutputs& capture, const SurrogateHandle& handle,
                                  const std::string& source_concept, bool enhance,
                                  const LocateOptions& opt) {
  TextEmbedding text = encode_text(handle, source_concept);
  std::vector<AlignmentMask> masks;
  masks.reserve(capture.values.size());
  for (const auto& [layer, values] : capture.values) {
    Vec s;
    if (enhance) {
      EnhanceOptions eo;
      eo.scale = opt.enhance_scale;
      EnhancedValues ev = self_value_enhance(values, layer, eo);
      s = similarity_scores(ev.v_tilde, text, handle, opt.pre_projection_norm);
    } else {
      s = similarity_scores(values, text, handle, opt.pre_projection_norm);
    }
    masks.push_back(make_mask(s, handle->spec().model_id, layer));
  }
  return masks;
}

std::string masks_to_json(const std::vector<AlignmentMask>& masks) {
  json arr = json::array();
  for (const auto& m : masks) {
    json scores = json::array();
    for (Eigen::Index i = 0; i < m.scores.size(); ++i) scores.push_back(m.scores(i));
    arr.push_back({{"surrogate_id", m.surrogate_id},
                   {"layer", m.layer},
                   {"tau", m.tau},
                   {"indices", m.indices},
                   {"fallback_used", m.fallback_used},
                   {"scores", std::move(scores)}});
  }
  return arr.dump(2);
}

}  // namespace vfa
