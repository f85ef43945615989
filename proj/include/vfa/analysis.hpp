#pragma once

#include <map>
#include <string>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/surrogate.hpp"

// Diagnostics that explain why value features make better manipulation
// handles than patch features: per-layer entropy, joint-space channel
// profiles, token norms, and text-alignment similarity maps.

namespace vfa {

// Normalized Shannon entropy of a feature map treated as one softmax
// distribution over all positions and channels jointly; result in [0,1].
// `rows`/`cols`/`channels` describe the h x w x d layout of `flat`, which is
// indexed (y*w + x)*d + c.
double layer_entropy(const std::vector<double>& flat, int rows, int cols, int channels);
// Token-indexed convenience: reshapes an n x d matrix to grid(rows,cols) x d.
double layer_entropy_tokens(const Mat& tokens, std::pair<int, int> grid);

struct ChannelProfile {
  Vec x_profile;    // mean joint-space activation per channel over X rows
  Vec v_profile;    // same over final-layer V rows
  Vec cls_profile;  // joint-space CLS activations
};

ChannelProfile channel_profile(const EncoderOutputs& capture, const SurrogateHandle& handle,
                               bool pre_projection_norm);

Vec token_norms(const Mat& patch_features);

struct SimilarityMap {
  Mat grid;  // grid_shape rows x cols of cosine similarities
  double peak = 0.0;
  std::string source;  // "X" or "V"
};

SimilarityMap text_alignment_map(const EncoderOutputs& capture, const SurrogateHandle& handle,
                                 const std::string& concept_text, const std::string& source,
                                 bool pre_projection_norm);

struct AnalysisReport {
  std::string surrogate_id;
  bool pre_projection_norm = true;
  std::vector<double> entropy_x;  // per layer 1..depth
  std::vector<double> entropy_v;
  ChannelProfile profile;
  Vec token_norms;
  std::pair<int, int> grid_shape{0, 0};
  std::map<std::string, SimilarityMap> maps_x;  // concept -> map
  std::map<std::string, SimilarityMap> maps_v;
};

AnalysisReport analyze_image(const SurrogateHandle& handle, const Image& image_at_res,
                             const std::vector<std::string>& concepts, bool pre_projection_norm);

std::string report_to_json(const AnalysisReport& r);
AnalysisReport report_from_json(const std::string& text);

}  // namespace vfa
