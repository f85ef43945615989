#include "vfa/analysis.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace vfa {

using json = nlohmann::json;

double layer_entropy(const std::vector<double>& flat, int rows, int cols, int channels) {
  const size_t n = size_t(rows) * cols * channels;
  if (rows <= 0 || cols <= 0 || channels <= 0 || flat.size() != n)
    throw InputError("layer_entropy: empty or inconsistent tensor");
  if (n < 2) throw InputError("layer_entropy: needs at least two entries");
  for (double v : flat)
    if (!std::isfinite(v)) throw InputError("layer_entropy: non-finite entries");

  // H = log S - (1/S) sum w_i (z_i - m), with w_i = exp(z_i - m). This form
  // yields exactly 1.0 after normalization for constant tensors.
  double m = flat[0];
  for (double v : flat) m = std::max(m, v);
  double s = 0.0, weighted = 0.0;
  for (double v : flat) {
    double w = std::exp(v - m);
    s += w;
    weighted += w * (v - m);
  }
  double h_raw = std::log(s) - weighted / s;
  return h_raw / std::log(double(n));
}

double layer_entropy_tokens(const Mat& tokens, std::pair<int, int> grid) {
  if (tokens.rows() != Eigen::Index(grid.first) * grid.second)
    throw ShapeError("layer_entropy_tokens: grid does not match token count");
  std::vector<double> flat(size_t(tokens.rows()) * size_t(tokens.cols()));
  for (Eigen::Index r = 0; r < tokens.rows(); ++r)
    for (Eigen::Index c = 0; c < tokens.cols(); ++c)
      flat[size_t(r) * size_t(tokens.cols()) + size_t(c)] = tokens(r, c);
  return layer_entropy(flat, grid.first, grid.second, int(tokens.cols()));
}

namespace {

const Mat& final_values(const EncoderOutputs& capture) {
  if (capture.values.empty()) throw InputError("capture has no value matrices");
  return capture.values.rbegin()->second;
}

double cosine(const Vec& a, const Vec& b) {
  double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return a.dot(b) / denom;
}

}  // namespace

ChannelProfile channel_profile(const EncoderOutputs& capture, const SurrogateHandle& handle,
                               bool pre_projection_norm) {
  const Mat& x = capture.patch_features;
  const Mat& v = final_values(capture);
  if (x.cols() != handle->vision().proj.rows())
    throw ShapeError("channel_profile: capture width does not match handle projection");
  ChannelProfile p;
  p.x_profile = joint_project_rows(*handle, x, pre_projection_norm).colwise().mean().transpose();
  p.v_profile = joint_project_rows(*handle, v, pre_projection_norm).colwise().mean().transpose();
  Mat cls = capture.cls_feature.transpose();
  p.cls_profile = joint_project_rows(*handle, cls, pre_projection_norm).row(0).transpose();
  return p;
}

Vec token_norms(const Mat& patch_features) {
  require_finite(patch_features, "token_norms");
  return patch_features.rowwise().norm();
}

SimilarityMap text_alignment_map(const EncoderOutputs& capture, const SurrogateHandle& handle,
                                 const std::string& concept_text, const std::string& source,
                                 bool pre_projection_norm) {
  if (concept_text.empty()) throw InputError("text_alignment_map: empty concept");
  const Mat* feats = nullptr;
  if (source == "X")
    feats = &capture.patch_features;
  else if (source == "V")
    feats = &final_values(capture);
  else
    throw InputError("text_alignment_map: unknown source tag " + source);

  TextEmbedding text = encode_text(handle, concept_text);
  Mat projected = joint_project_rows(*handle, *feats, pre_projection_norm);

  auto [rows, cols] = capture.grid_shape;
  SimilarityMap map;
  map.source = source;
  map.grid.resize(rows, cols);
  double peak = -1.0;
  for (int t = 0; t < rows * cols; ++t) {
    double s = cosine(projected.row(t).transpose(), text.joint_vector);
    map.grid(t / cols, t % cols) = s;
    peak = std::max(peak, s);
  }
  map.peak = peak;
  return map;
}

AnalysisReport analyze_image(const SurrogateHandle& handle, const Image& image_at_res,
                             const std::vector<std::string>& concepts, bool pre_projection_norm) {
  AnalysisReport r;
  r.surrogate_id = handle->spec().model_id;
  r.pre_projection_norm = pre_projection_norm;
  int g = handle->vision().cfg.grid();
  r.grid_shape = {g, g};

  LayerDump dump = vision_forward_all(handle->vision(), image_at_res);
  for (const auto& x : dump.block_outputs) r.entropy_x.push_back(layer_entropy_tokens(x, r.grid_shape));
  for (const auto& v : dump.values) r.entropy_v.push_back(layer_entropy_tokens(v, r.grid_shape));

  EncoderOutputs capture = encode_image(handle, image_at_res);
  r.profile = channel_profile(capture, handle, pre_projection_norm);
  r.token_norms = token_norms(capture.patch_features);
  for (const auto& c : concepts) {
    r.maps_x[c] = text_alignment_map(capture, handle, c, "X", pre_projection_norm);
    r.maps_v[c] = text_alignment_map(capture, handle, c, "V", pre_projection_norm);
  }
  return r;
}

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  if (j.empty()) return Mat(0, 0);
  Mat m(Eigen::Index(j.size()), Eigen::Index(j[0].size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j[size_t(r)][size_t(c)];
  return m;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const json& j) {
  Vec v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[size_t(i)];
  return v;
}

json simmap_to_json(const SimilarityMap& m) {
  return json{{"grid", mat_to_json(m.grid)}, {"peak", m.peak}, {"source", m.source}};
}

SimilarityMap simmap_from_json(const json& j) {
  SimilarityMap m;
  m.grid = mat_from_json(j.at("grid"));
  m.peak = j.at("peak");
  m.source = j.at("source");
  return m;
}

}  // namespace

std::string report_to_json(const AnalysisReport& r) {
  json j;
  j["surrogate_id"] = r.surrogate_id;
  j["pre_projection_norm"] = r.pre_projection_norm;
  j["entropy_x"] = r.entropy_x;
  j["entropy_v"] = r.entropy_v;
  j["channel_profile"] = {{"x", vec_to_json(r.profile.x_profile)},
                          {"v", vec_to_json(r.profile.v_profile)},
                          {"cls", vec_to_json(r.profile.cls_profile)}};
  j["token_norms"] = vec_to_json(r.token_norms);
  j["grid_shape"] = {r.grid_shape.first, r.grid_shape.second};
  json mx = json::object(), mv = json::object();
  for (const auto& [concept_text, m] : r.maps_x) mx[concept_text] = simmap_to_json(m);
  for (const auto& [concept_text, m] : r.maps_v) mv[concept_text] = simmap_to_json(m);
  j["maps_x"] = mx;
  j["maps_v"] = mv;
  return j.dump(2);
}

AnalysisReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  AnalysisReport r;
  r.surrogate_id = j.at("surrogate_id");
  r.pre_projection_norm = j.at("pre_projection_norm");
  r.entropy_x = j.at("entropy_x").get<std::vector<double>>();
  r.entropy_v = j.at("entropy_v").get<std::vector<double>>();
  r.profile.x_profile = vec_from_json(j.at("channel_profile").at("x"));
  r.profile.v_profile = vec_from_json(j.at("channel_profile").at("v"));
  r.profile.cls_profile = vec_from_json(j.at("channel_profile").at("cls"));
  r.token_norms = vec_from_json(j.at("token_norms"));
  r.grid_shape = {j.at("grid_shape")[0], j.at("grid_shape")[1]};
  for (auto& [concept_text, m] : j.at("maps_x").items()) r.maps_x[concept_text] = simmap_from_json(m);
  for (auto& [concept_text, m] : j.at("maps_v").items()) r.maps_v[concept_text] = simmap_from_json(m);
  return r;
}

}  // namespace vfa
