#include "vfa/attack.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include <nlohmann/json.hpp>

#include "vfa/enhance.hpp"

namespace vfa {

using json = nlohmann::json;

void ConceptPair::validate() const {
  if (source.empty() || target.empty()) throw InputError("concept pair: empty concept");
  if (source == target) throw InputError("concept pair: source and target must differ");
}

std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::PgdSign: return "pgd_sign";
    case Optimizer::MiFgsm: return "mi_fgsm";
    case Optimizer::Adam: return "adam";
  }
  return "?";
}

std::string to_string(FeatureSource f) {
  switch (f) {
    case FeatureSource::Value: return "value";
    case FeatureSource::ValueEnhanced: return "value_enhanced";
    case FeatureSource::PatchAll: return "patch_all";
    case FeatureSource::PatchAligned: return "patch_aligned";
  }
  return "?";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "pgd_sign") return Optimizer::PgdSign;
  if (s == "mi_fgsm") return Optimizer::MiFgsm;
  if (s == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer: " + s);
}

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "value") return FeatureSource::Value;
  if (s == "value_enhanced") return FeatureSource::ValueEnhanced;
  if (s == "patch_all") return FeatureSource::PatchAll;
  if (s == "patch_aligned") return FeatureSource::PatchAligned;
  throw ConfigError("unknown feature_source: " + s);
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in (0,1]");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(alpha > 0.0 && alpha <= epsilon)) throw ConfigError("alpha must be in (0, epsilon]");
  if (!(crop_range[0] > 0.0 && crop_range[0] <= crop_range[1] && crop_range[1] <= 1.0))
    throw ConfigError("crop_range must satisfy 0 < a <= b <= 1");
  if (mu < 0.0) throw ConfigError("mu must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("beta1/beta2 must be in [0,1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
}

std::string apply_text_template(const std::string& tmpl, const std::string& concept_text) {
  if (tmpl.empty()) return concept_text;
  auto pos = tmpl.find("{}");
  if (pos == std::string::npos) throw TemplateError("text_template must contain '{}'");
  std::string out = tmpl;
  out.replace(pos, 2, concept_text);
  return out;
}

// --- crop-and-resize augmentation ------------------------------------------

CropParams sample_crop(int h, int w, std::array<double, 2> crop_range, Rng& rng) {
  double u = rng.uniform(crop_range[0], crop_range[1]);  // area fraction
  double side = std::sqrt(u);
  CropParams p;
  p.crop_h = std::clamp(int(std::lround(h * side)), 1, h);
  p.crop_w = std::clamp(int(std::lround(w * side)), 1, w);
  p.top = int(rng.uniform_int(0, h - p.crop_h));
  p.left = int(rng.uniform_int(0, w - p.crop_w));
  return p;
}

Image crop_and_resize(const Image& in, const CropParams& p) {
  Image out(in.h, in.w, in.c);
  const double sy_scale = double(p.crop_h) / in.h;
  const double sx_scale = double(p.crop_w) / in.w;
  const int y_lo = p.top, y_hi = p.top + p.crop_h - 1;
  const int x_lo = p.left, x_hi = p.left + p.crop_w - 1;
  for (int oy = 0; oy < in.h; ++oy) {
    double sy = (oy + 0.5) * sy_scale - 0.5 + p.top;
    int y0 = int(std::floor(sy));
    double fy = sy - y0;
    int y0c = std::clamp(y0, y_lo, y_hi);
    int y1c = std::clamp(y0 + 1, y_lo, y_hi);
    for (int ox = 0; ox < in.w; ++ox) {
      double sx = (ox + 0.5) * sx_scale - 0.5 + p.left;
      int x0 = int(std::floor(sx));
      double fx = sx - x0;
      int x0c = std::clamp(x0, x_lo, x_hi);
      int x1c = std::clamp(x0 + 1, x_lo, x_hi);
      for (int ch = 0; ch < in.c; ++ch)
        out.at(oy, ox, ch) = (1 - fy) * ((1 - fx) * in.at(y0c, x0c, ch) + fx * in.at(y0c, x1c, ch)) +
                             fy * ((1 - fx) * in.at(y1c, x0c, ch) + fx * in.at(y1c, x1c, ch));
    }
  }
  return out;
}

Image crop_and_resize(const Image& in, std::array<double, 2> crop_range, Rng& rng) {
  if (!(crop_range[0] > 0.0 && crop_range[0] <= crop_range[1] && crop_range[1] <= 1.0))
    throw ConfigError("crop_range must satisfy 0 < a <= b <= 1");
  return crop_and_resize(in, sample_crop(in.h, in.w, crop_range, rng));
}

void crop_and_resize_backward(Image& din, const CropParams& p, const Image& dout) {
  const double sy_scale = double(p.crop_h) / dout.h;
  const double sx_scale = double(p.crop_w) / dout.w;
  const int y_lo = p.top, y_hi = p.top + p.crop_h - 1;
  const int x_lo = p.left, x_hi = p.left + p.crop_w - 1;
  for (int oy = 0; oy < dout.h; ++oy) {
    double sy = (oy + 0.5) * sy_scale - 0.5 + p.top;
    int y0 = int(std::floor(sy));
    double fy = sy - y0;
    int y0c = std::clamp(y0, y_lo, y_hi);
    int y1c = std::clamp(y0 + 1, y_lo, y_hi);
    for (int ox = 0; ox < dout.w; ++ox) {
      double sx = (ox + 0.5) * sx_scale - 0.5 + p.left;
      int x0 = int(std::floor(sx));
      double fx = sx - x0;
      int x0c = std::clamp(x0, x_lo, x_hi);
      int x1c = std::clamp(x0 + 1, x_lo, x_hi);
      for (int ch = 0; ch < dout.c; ++ch) {
        double g = dout.at(oy, ox, ch);
        din.at(y0c, x0c, ch) += (1 - fy) * (1 - fx) * g;
        din.at(y0c, x1c, ch) += (1 - fy) * fx * g;
        din.at(y1c, x0c, ch) += fy * (1 - fx) * g;
        din.at(y1c, x1c, ch) += fy * fx * g;
      }
    }
  }
}

// --- optimizer steps ---------------------------------------------------------

namespace {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_grad(const Image& grad, int iteration) {
  if (!grad.finite())
    throw OptimError("non-finite gradient at iteration " + std::to_string(iteration));
}

// Ascend, then clip into the epsilon box intersected with the image box.
void apply_sign_step(PerturbationState& state, const Image& direction, double alpha, double epsilon,
                     const Image& x0) {
  for (size_t i = 0; i < state.delta.data.size(); ++i) {
    double d = state.delta.data[i] + alpha * sgn(direction.data[i]);
    double lo = std::max(-epsilon, -x0.data[i]);
    double hi = std::min(epsilon, 1.0 - x0.data[i]);
    state.delta.data[i] = std::min(hi, std::max(lo, d));
  }
}

}  // namespace

void pgd_step(PerturbationState& state, const Image& grad, double alpha, double epsilon,
              const Image& x0) {
  check_grad(grad, state.iteration + 1);
  apply_sign_step(state, grad, alpha, epsilon, x0);
  state.iteration += 1;
}

void mifgsm_step(PerturbationState& state, const Image& grad, double mu, double alpha, double epsilon,
                 const Image& x0) {
  check_grad(grad, state.iteration + 1);
  double l1 = 0.0;
  for (double g : grad.data) l1 += std::abs(g);
  if (l1 > 0.0) {
    for (size_t i = 0; i < grad.data.size(); ++i)
      state.momentum.data[i] = mu * state.momentum.data[i] + grad.data[i] / l1;
  } else {
    for (double& g : state.momentum.data) g *= mu;
    std::cerr << "warning: zero gradient at iteration " << state.iteration + 1
              << ", momentum decays only\n";
  }
  apply_sign_step(state, state.momentum, alpha, epsilon, x0);
  state.iteration += 1;
}

void adam_step(PerturbationState& state, const Image& grad, double beta1, double beta2, double eta,
               double alpha, double epsilon, const Image& x0) {
  check_grad(grad, state.iteration + 1);
  const int t = state.iteration + 1;
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  Image direction(state.delta.h, state.delta.w, state.delta.c);
  for (size_t i = 0; i < grad.data.size(); ++i) {
    double g = grad.data[i];
    state.m.data[i] = beta1 * state.m.data[i] + (1.0 - beta1) * g;
    state.v.data[i] = beta2 * state.v.data[i] + (1.0 - beta2) * g * g;
    double mhat = state.m.data[i] / c1;
    double vhat = state.v.data[i] / c2;
    direction.data[i] = mhat / (std::sqrt(vhat) + eta);
    if (!std::isfinite(direction.data[i]))
      throw OptimError("non-finite update at iteration " + std::to_string(t));
  }
  apply_sign_step(state, direction, alpha, epsilon, x0);
  state.iteration = t;
}

// --- loss ---------------------------------------------------------------------

namespace {

struct FeatureSet {
  int layer = 0;  // 0 for patch-feature sources
  Mat features;
  bool enhanced = false;
  EnhancedValues ev;
};

std::vector<FeatureSet> build_features(const EncoderOutputs& capture, FeatureSource source,
                                       double enhance_scale) {
  std::vector<FeatureSet> sets;
  if (source == FeatureSource::PatchAll || source == FeatureSource::PatchAligned) {
    FeatureSet fs;
    fs.layer = 0;
    fs.features = capture.patch_features;
    sets.push_back(std::move(fs));
    return sets;
  }
  if (capture.values.empty()) throw InputError("capture has no value matrices");
  for (const auto& [layer, values] : capture.values) {
    FeatureSet fs;
    fs.layer = layer;
    if (source == FeatureSource::ValueEnhanced) {
      EnhanceOptions eo;
      eo.scale = enhance_scale;
      fs.ev = self_value_enhance(values, layer, eo);
      fs.features = fs.ev.v_tilde;
      fs.enhanced = true;
    } else {
      fs.features = values;
    }
    sets.push_back(std::move(fs));
  }
  return sets;
}

// d cos(p, t) / dp for unit t
inline Vec cosine_grad(const Vec& p, const Vec& t, double s) {
  double nrm = p.norm();
  if (nrm == 0.0) return Vec::Zero(p.size());
  return t / nrm - (s / (nrm * nrm)) * p;
}

Vec cosine_rows(const Mat& projected, const Vec& t) {
  Vec s(projected.rows());
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    double nrm = projected.row(i).norm();
    s(i) = nrm == 0.0 ? 0.0 : projected.row(i).dot(t.transpose()) / nrm;
  }
  return s;
}

}  // namespace

double semantic_loss(const EnsembleCapture& ensemble,
                     const std::vector<std::vector<AlignmentMask>>& masks_per_model,
                     const std::vector<TextEmbedding>& source_embeddings,
                     const std::vector<TextEmbedding>& target_embeddings, const LossOptions& opt) {
  const size_t k = ensemble.per_model.size();
  if (k == 0) throw InputError("semantic_loss: empty ensemble");
  if (masks_per_model.size() != k || source_embeddings.size() != k || target_embeddings.size() != k)
    throw InputError("semantic_loss: per-model inputs must align with the ensemble");

  double total = 0.0;
  for (size_t mi = 0; mi < k; ++mi) {
    const auto& [handle, capture] = ensemble.per_model[mi];
    auto sets = build_features(capture, opt.source, opt.enhance_scale);
    if (masks_per_model[mi].size() != sets.size())
      throw InputError("semantic_loss: mask count does not match feature sets");
    double model_sum = 0.0;
    size_t selected = 0;
    for (size_t si = 0; si < sets.size(); ++si) {
      Mat projected = joint_project_rows(*handle, sets[si].features, opt.pre_projection_norm);
      Vec s_src = cosine_rows(projected, source_embeddings[mi].joint_vector);
      Vec s_tgt = cosine_rows(projected, target_embeddings[mi].joint_vector);
      for (int i : masks_per_model[mi][si].indices) {
        if (i < 0 || i >= int(s_src.size())) throw InputError("semantic_loss: mask index out of range");
        model_sum += -s_src(i) + s_tgt(i);
        ++selected;
      }
    }
    if (opt.normalize_per_model && selected > 0) model_sum /= double(selected);
    total += model_sum;
  }
  return total;
}

// --- full attack loop -----------------------------------------------------------

namespace {

struct StepEval {
  double loss = 0.0;
  std::vector<int> mask_sizes;                         // per surrogate, summed over layers
  std::vector<std::vector<AlignmentMask>> masks;        // per surrogate per feature set
  int fallbacks = 0;
  Image d_shared;                                       // gradient w.r.t. the shared-space image
};

AlignmentMask all_token_mask(const Vec& scores, const std::string& surrogate_id) {
  AlignmentMask m;
  m.scores = scores;
  m.tau = -2.0;  // below any cosine, selects everything
  m.indices.resize(size_t(scores.size()));
  for (int i = 0; i < int(scores.size()); ++i) m.indices[size_t(i)] = i;
  m.surrogate_id = surrogate_id;
  m.layer = 0;
  return m;
}

// One forward/backward evaluation of the ensemble loss at `shared` (the
// crop-resize output, full working resolution). When `frozen` is non-null its
// masks are reused instead of relocating.
StepEval evaluate_step(const Image& shared, const std::vector<SurrogateHandle>& surrogates,
                       const std::vector<TextEmbedding>& ts_emb, const std::vector<TextEmbedding>& tt_emb,
                       const AttackConfig& cfg,
                       const std::vector<std::vector<AlignmentMask>>* frozen, bool want_grad) {
  StepEval ev;
  if (want_grad) ev.d_shared = Image(shared.h, shared.w, shared.c);

  for (size_t mi = 0; mi < surrogates.size(); ++mi) {
    const auto& handle = surrogates[mi];
    const int res = handle->vision().cfg.resolution;
    Image sized = resize_bilinear(shared, res, res);

    VisionCache cache;
    EncoderOutputs capture = encode_image_with_cache(handle, sized, cache);
    auto sets = build_features(capture, cfg.feature_source, cfg.enhance_scale);

    // score + locate every feature set first (per-model normalization needs
    // the total selected count before gradients are scaled)
    struct SetEval {
      Mat projected;
      ProjectionCache pc;
      Vec s_src, s_tgt;
      AlignmentMask mask;
    };
    std::vector<SetEval> evs(sets.size());
    size_t selected_total = 0;
    for (size_t si = 0; si < sets.size(); ++si) {
      auto& se = evs[si];
      se.projected = joint_project_rows(*handle, sets[si].features, cfg.pre_projection_norm,
                                        want_grad ? &se.pc : nullptr);
      se.s_src = cosine_rows(se.projected, ts_emb[mi].joint_vector);
      se.s_tgt = cosine_rows(se.projected, tt_emb[mi].joint_vector);
      if (frozen) {
        se.mask = (*frozen)[mi][si];
      } else if (cfg.feature_source == FeatureSource::PatchAll) {
        se.mask = all_token_mask(se.s_src, handle->spec().model_id);
      } else {
        se.mask = make_mask(se.s_src, handle->spec().model_id, sets[si].layer);
      }
      if (se.mask.fallback_used) ev.fallbacks += 1;
      selected_total += se.mask.indices.size();
    }
    const double weight = (cfg.normalize_per_model && selected_total > 0)
                              ? 1.0 / double(selected_total)
                              : 1.0;

    VisionGrads grads;
    int model_mask_size = 0;
    for (size_t si = 0; si < sets.size(); ++si) {
      auto& se = evs[si];
      model_mask_size += int(se.mask.indices.size());
      double set_sum = 0.0;
      Mat dproj;
      if (want_grad) dproj = Mat::Zero(se.projected.rows(), se.projected.cols());
      for (int i : se.mask.indices) {
        set_sum += -se.s_src(i) + se.s_tgt(i);
        if (want_grad) {
          Vec p = se.projected.row(i).transpose();
          Vec dp = -cosine_grad(p, ts_emb[mi].joint_vector, se.s_src(i)) +
                   cosine_grad(p, tt_emb[mi].joint_vector, se.s_tgt(i));
          dproj.row(i) += weight * dp.transpose();
        }
      }
      ev.loss += weight * set_sum;
      if (want_grad) {
        Mat dfeat = joint_project_rows_backward(*handle, se.pc, dproj);
        if (sets[si].enhanced) {
          EnhanceOptions eo;
          eo.scale = cfg.enhance_scale;
          const Mat& raw = capture.values.at(sets[si].layer);
          dfeat = self_value_enhance_backward(raw, sets[si].ev, dfeat, eo);
        }
        if (sets[si].layer == 0) {
          if (grads.d_patch_tokens.size() == 0)
            grads.d_patch_tokens = Mat::Zero(capture.patch_features.rows(), capture.patch_features.cols());
          grads.d_patch_tokens += dfeat;
        } else {
          auto [it, inserted] = grads.d_values.try_emplace(sets[si].layer, std::move(dfeat));
          if (!inserted) it->second += dfeat;
        }
      }
      ev.masks.resize(surrogates.size());
      ev.masks[mi].push_back(std::move(se.mask));
    }
    ev.mask_sizes.push_back(model_mask_size);

    if (want_grad) {
      Image dsized = vision_backward(handle->vision(), cache, grads);
      resize_bilinear_backward(ev.d_shared, ev.d_shared, dsized);
    }
  }
  return ev;
}

Image add(const Image& a, const Image& b) {
  Image out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

}  // namespace

AttackResult run_attack(const Image& image, const ConceptPair& pair,
                        const std::vector<SurrogateHandle>& surrogates, const AttackConfig& cfg) {
  cfg.validate();
  pair.validate();
  if (surrogates.empty()) throw InputError("run_attack: no surrogates");
  if (!image.finite()) throw InputError("run_attack: non-finite input image");

  std::vector<TextEmbedding> ts_emb, tt_emb;
  for (const auto& h : surrogates) {
    ts_emb.push_back(encode_text(h, apply_text_template(cfg.text_template, pair.source)));
    tt_emb.push_back(encode_text(h, apply_text_template(cfg.text_template, pair.target)));
  }

  // clean-image masks: diagnostics, and the frozen variant's location
  StepEval clean_eval = evaluate_step(image, surrogates, ts_emb, tt_emb, cfg, nullptr, false);

  Rng rng(cfg.seed);
  PerturbationState state(image.h, image.w, image.c);
  AttackTrace trace;
  trace.feature_source = to_string(cfg.feature_source);

  StepEval last_eval;
  for (int t = 1; t <= cfg.steps; ++t) {
    auto t0 = std::chrono::steady_clock::now();
    CropParams crop = sample_crop(image.h, image.w, cfg.crop_range, rng);
    Image x_cur = clamp01(add(image, state.delta));
    Image x_aug = crop_and_resize(x_cur, crop);

    StepEval ev = evaluate_step(x_aug, surrogates, ts_emb, tt_emb, cfg,
                                cfg.freeze_mask ? &clean_eval.masks : nullptr, true);
    if (!std::isfinite(ev.loss)) throw OptimError("NaN loss at iteration " + std::to_string(t));

    Image ddelta(image.h, image.w, image.c);
    crop_and_resize_backward(ddelta, crop, ev.d_shared);

    switch (cfg.optimizer) {
      case Optimizer::PgdSign:
        pgd_step(state, ddelta, cfg.alpha, cfg.epsilon, image);
        break;
      case Optimizer::MiFgsm:
        mifgsm_step(state, ddelta, cfg.mu, cfg.alpha, cfg.epsilon, image);
        break;
      case Optimizer::Adam:
        adam_step(state, ddelta, cfg.beta1, cfg.beta2, cfg.eta, cfg.alpha, cfg.epsilon, image);
        break;
    }

    double linf = 0.0;
    for (double d : state.delta.data) linf = std::max(linf, std::abs(d));
    bool budget_ok = true;
    for (double d : state.delta.data)
      if (!(std::abs(d) <= cfg.epsilon)) budget_ok = false;
    Image emitted = clamp01(add(image, state.delta));
    bool box_ok = true;
    for (double v : emitted.data)
      if (!(v >= 0.0 && v <= 1.0)) box_ok = false;

    auto t1 = std::chrono::steady_clock::now();
    trace.loss.push_back(ev.loss);
    trace.mask_sizes.push_back(ev.mask_sizes);
    trace.delta_linf.push_back(linf);
    trace.budget_ok.push_back(budget_ok);
    trace.box_ok.push_back(box_ok);
    trace.step_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    trace.fallback_count += ev.fallbacks;
    last_eval = std::move(ev);
  }

  const size_t n = state.delta.data.size();
  double l1 = 0.0, l2 = 0.0, linf = 0.0;
  for (double d : state.delta.data) {
    l1 += std::abs(d);
    l2 += d * d;
    linf = std::max(linf, std::abs(d));
  }
  trace.final_l1 = l1 / double(n);
  trace.final_l2 = std::sqrt(l2 / double(n));
  trace.final_linf = linf;

  AttackResult result;
  result.adversarial = clamp01(add(image, state.delta));
  result.trace = std::move(trace);
  result.clean_masks = std::move(clean_eval.masks);
  result.final_masks = std::move(last_eval.masks);
  return result;
}

LossGrad semantic_loss_gradient(const Image& shared_image,
                                const std::vector<SurrogateHandle>& surrogates,
                                const ConceptPair& pair, const AttackConfig& cfg,
                                const std::vector<std::vector<AlignmentMask>>* frozen_masks) {
  pair.validate();
  if (surrogates.empty()) throw InputError("semantic_loss_gradient: no surrogates");
  std::vector<TextEmbedding> ts_emb, tt_emb;
  for (const auto& h : surrogates) {
    ts_emb.push_back(encode_text(h, apply_text_template(cfg.text_template, pair.source)));
    tt_emb.push_back(encode_text(h, apply_text_template(cfg.text_template, pair.target)));
  }
  StepEval ev = evaluate_step(shared_image, surrogates, ts_emb, tt_emb, cfg, frozen_masks, true);
  LossGrad out;
  out.loss = ev.loss;
  out.grad = std::move(ev.d_shared);
  out.masks = std::move(ev.masks);
  return out;
}

SimilaritySummary aligned_similarity(const Image& shared_image, const SurrogateHandle& handle,
                                     const ConceptPair& pair, const std::vector<int>& indices,
                                     const AttackConfig& cfg) {
  if (indices.empty()) throw InputError("aligned_similarity: empty index set");
  Image sized = preprocess_decoded(shared_image, handle);
  EncoderOutputs capture = encode_image(handle, sized);
  auto sets = build_features(capture, cfg.feature_source, cfg.enhance_scale);
  const Mat& features = sets.back().features;  // final configured layer

  TextEmbedding ts = encode_text(handle, apply_text_template(cfg.text_template, pair.source));
  TextEmbedding tt = encode_text(handle, apply_text_template(cfg.text_template, pair.target));
  Mat projected = joint_project_rows(*handle, features, cfg.pre_projection_norm);
  Vec s_src = cosine_rows(projected, ts.joint_vector);
  Vec s_tgt = cosine_rows(projected, tt.joint_vector);

  SimilaritySummary out;
  for (int i : indices) {
    out.mean_source += s_src(i);
    out.mean_target += s_tgt(i);
  }
  out.mean_source /= double(indices.size());
  out.mean_target /= double(indices.size());
  return out;
}

std::string trace_to_json(const AttackTrace& t) {
  json j;
  j["loss"] = t.loss;
  j["mask_sizes"] = t.mask_sizes;
  j["step_ms"] = t.step_ms;
  j["delta_linf"] = t.delta_linf;
  j["budget_ok"] = t.budget_ok;
  j["box_ok"] = t.box_ok;
  j["final_norms"] = {{"linf", t.final_linf}, {"l1", t.final_l1}, {"l2", t.final_l2}};
  j["fallback_count"] = t.fallback_count;
  j["feature_source"] = t.feature_source;
  return j.dump(2);
}

}  // namespace vfa
