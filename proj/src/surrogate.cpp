#include "vfa/surrogate.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

namespace vfa {

using json = nlohmann::json;

Surrogate::Surrogate(SurrogateSpec spec, DualEncoderWeights weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {}

namespace {

void validate_spec_against_weights(const SurrogateSpec& spec, const DualEncoderWeights& w) {
  const auto& cfg = w.vision.cfg;
  if (spec.input_resolution != cfg.resolution)
    throw ConfigError(spec.model_id + ": input_resolution " + std::to_string(spec.input_resolution) +
                      " does not match weights (" + std::to_string(cfg.resolution) + ")");
  if (spec.patch_size != cfg.patch)
    throw ConfigError(spec.model_id + ": patch_size inconsistent with weight shapes");
  if (spec.num_heads != cfg.heads)
    throw ConfigError(spec.model_id + ": num_heads inconsistent with weights");
  if (spec.input_resolution % spec.patch_size != 0)
    throw ConfigError(spec.model_id + ": input_resolution not divisible by patch_size");
  for (int l : spec.layer_set)
    if (l < 1 || l > cfg.depth)
      throw ConfigError(spec.model_id + ": layer_set index " + std::to_string(l) +
                        " outside 1.." + std::to_string(cfg.depth));
}

}  // namespace

SurrogateHandle load_surrogate(const SurrogateSpec& spec_in, bool allow_fetch) {
  SurrogateSpec spec = spec_in;
  if (spec.weights_uri.rfind("http://", 0) == 0 || spec.weights_uri.rfind("https://", 0) == 0) {
    if (!allow_fetch)
      throw ConfigError(spec.model_id + ": remote weights_uri requires explicit fetch opt-in");
    throw ConfigError(spec.model_id + ": remote weight fetch is not wired up; download first");
  }
  if (!std::filesystem::exists(spec.weights_uri))
    throw IoError(spec.model_id + ": weights not found at " + spec.weights_uri);
  DualEncoderWeights w = load_weights(spec.weights_uri);
  if (spec.layer_set.empty()) spec.layer_set = {w.vision.cfg.depth};
  validate_spec_against_weights(spec, w);
  return std::make_shared<const Surrogate>(std::move(spec), std::move(w));
}

std::vector<SurrogateSpec> load_registry(const std::string& path) {
  auto bytes = read_file(path);
  json doc = json::parse(bytes.begin(), bytes.end());
  if (!doc.contains("surrogates") || !doc["surrogates"].is_array() || doc["surrogates"].empty())
    throw ConfigError("registry: missing or empty surrogates list");
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<SurrogateSpec> specs;
  std::set<std::string> seen;
  for (const auto& e : doc["surrogates"]) {
    SurrogateSpec s;
    s.model_id = e.at("model_id");
    s.input_resolution = e.at("input_resolution");
    s.patch_size = e.at("patch_size");
    s.num_heads = e.at("num_heads");
    if (e.contains("layer_set")) s.layer_set = e["layer_set"].get<std::vector<int>>();
    s.weights_uri = e.at("weights_uri");
    if (!s.weights_uri.empty() && s.weights_uri.rfind("http", 0) != 0 &&
        !std::filesystem::path(s.weights_uri).is_absolute())
      s.weights_uri = (base / s.weights_uri).string();
    if (!seen.insert(s.model_id).second) throw ConfigError("registry: duplicate model_id " + s.model_id);
    specs.push_back(std::move(s));
  }
  return specs;
}

EncoderOutputs encode_image(const SurrogateHandle& handle, const Image& image) {
  VisionCache cache;
  return encode_image_with_cache(handle, image, cache);
}

EncoderOutputs encode_image_with_cache(const SurrogateHandle& handle, const Image& image,
                                       VisionCache& cache) {
  std::set<int> layers(handle->spec().layer_set.begin(), handle->spec().layer_set.end());
  VisionCapture cap = vision_forward(handle->vision(), image, layers, &cache);
  EncoderOutputs out;
  out.patch_features = std::move(cap.patch_tokens);
  out.cls_feature = std::move(cap.cls);
  out.values = std::move(cap.values);
  int g = handle->vision().cfg.grid();
  out.grid_shape = {g, g};
  return out;
}

TextEmbedding encode_text(const SurrogateHandle& handle, const std::string& concept_text) {
  if (concept_text.empty()) throw InputError("encode_text: empty concept");
  TextEmbedding e;
  e.concept_text = concept_text;
  e.joint_vector = text_forward(handle->text(), concept_text);
  return e;
}

Vec project_to_joint(const SurrogateHandle& handle, const Vec& feature) {
  const Mat& proj = handle->vision().proj;
  if (feature.size() != proj.rows())
    throw ShapeError("project_to_joint: feature width " + std::to_string(feature.size()) +
                     " != projection input " + std::to_string(proj.rows()));
  return proj.transpose() * feature;
}

Mat joint_project_rows(const Surrogate& s, const Mat& features, bool pre_norm, ProjectionCache* cache) {
  const auto& tower = s.vision();
  if (features.cols() != tower.proj.rows()) throw ShapeError("joint_project_rows: feature width mismatch");
  if (cache) cache->pre_norm = pre_norm;
  if (pre_norm) {
    Mat normed = ln_forward(tower.ln_post, features, cache ? &cache->ln : nullptr);
    return normed * tower.proj;
  }
  return features * tower.proj;
}

Mat joint_project_rows_backward(const Surrogate& s, const ProjectionCache& cache, const Mat& dprojected) {
  const auto& tower = s.vision();
  Mat dnormed = dprojected * tower.proj.transpose();
  if (!cache.pre_norm) return dnormed;
  return ln_backward(tower.ln_post, cache.ln, dnormed);
}

Image preprocess(const std::vector<std::uint8_t>& raster_bytes, const SurrogateHandle& handle) {
  return preprocess_decoded(decode_image(raster_bytes), handle);
}

Image preprocess_decoded(const Image& decoded, const SurrogateHandle& handle) {
  int res = handle->vision().cfg.resolution;
  return resize_bilinear(decoded, res, res);
}

EnsembleCapture capture_ensemble(const std::vector<SurrogateHandle>& handles, const Image& shared_image) {
  if (handles.empty()) throw InputError("capture_ensemble: no surrogates");
  std::set<const Surrogate*> distinct;
  for (const auto& h : handles)
    if (!distinct.insert(h.get()).second) throw InputError("capture_ensemble: duplicate handle");
  EnsembleCapture ens;
  ens.per_model.reserve(handles.size());
  for (const auto& h : handles) {
    Image sized = preprocess_decoded(shared_image, h);
    ens.per_model.emplace_back(h, encode_image(h, sized));
  }
  return ens;
}

}  // namespace vfa
