#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/image.hpp"
#include "vfa/vit.hpp"

namespace vfa {

struct SurrogateSpec {
  std::string model_id;
  int input_resolution = 0;
  int patch_size = 0;
  int num_heads = 0;
  std::vector<int> layer_set;  // 1-based block indices; empty = final block
  std::string weights_uri;
};

// One image instance captured through a surrogate's vision tower.
struct EncoderOutputs {
  Mat patch_features;         // X: n x d_I, CLS excluded
  Vec cls_feature;            // d_I
  std::map<int, Mat> values;  // layer -> n x d_v value matrix, CLS excluded
  std::pair<int, int> grid_shape{0, 0};
};

struct TextEmbedding {
  std::string concept_text;
  Vec joint_vector;  // unit L2 norm
};

class Surrogate {
 public:
  Surrogate(SurrogateSpec spec, DualEncoderWeights weights);

  const SurrogateSpec& spec() const { return spec_; }
  const VisionTower& vision() const { return weights_.vision; }
  const TextTower& text() const { return weights_.text; }
  int tokens() const { return weights_.vision.cfg.tokens(); }
  int depth() const { return weights_.vision.cfg.depth; }
  int joint_dim() const { return weights_.vision.cfg.joint_dim; }

 private:
  SurrogateSpec spec_;
  DualEncoderWeights weights_;
};

// Immutable after load; safe to share across workers.
using SurrogateHandle = std::shared_ptr<const Surrogate>;

SurrogateHandle load_surrogate(const SurrogateSpec& spec, bool allow_fetch = false);

// Registry file: {"surrogates": [SurrogateSpec...]}. Relative weights_uri
// entries resolve against the registry's directory.
std::vector<SurrogateSpec> load_registry(const std::string& path);

EncoderOutputs encode_image(const SurrogateHandle& handle, const Image& image);
// Variant keeping the activation cache alive so the attack can backpropagate.
EncoderOutputs encode_image_with_cache(const SurrogateHandle& handle, const Image& image,
                                       VisionCache& cache);

TextEmbedding encode_text(const SurrogateHandle& handle, const std::string& concept_text);

// Bare image-side joint projection P_I; linear.
Vec project_to_joint(const SurrogateHandle& handle, const Vec& feature);

// Token-matrix projection used by the similarity / profiling paths. With
// pre_norm the final pre-projection LayerNorm is applied to each row first.
struct ProjectionCache {
  bool pre_norm = false;
  LnCache ln;
};
Mat joint_project_rows(const Surrogate& s, const Mat& features, bool pre_norm,
                       ProjectionCache* cache = nullptr);
Mat joint_project_rows_backward(const Surrogate& s, const ProjectionCache& cache, const Mat& dprojected);

// Decode + bilinear-resize to the handle's resolution, scaled to [0,1].
// Channel normalization happens inside encode_image, so perturbations live in
// the raw pixel space shared by all surrogates.
Image preprocess(const std::vector<std::uint8_t>& raster_bytes, const SurrogateHandle& handle);
Image preprocess_decoded(const Image& decoded, const SurrogateHandle& handle);

struct EnsembleCapture {
  std::vector<std::pair<SurrogateHandle, EncoderOutputs>> per_model;
};

// Encodes one shared-space image through every surrogate (resizing per model).
EnsembleCapture capture_ensemble(const std::vector<SurrogateHandle>& handles, const Image& shared_image);

}  // namespace vfa
