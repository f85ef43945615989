#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/image.hpp"
#include "vfa/locate.hpp"
#include "vfa/surrogate.hpp"

namespace vfa {

struct ConceptPair {
  std::string source;  // concept to erase
  std::string target;  // concept to write
  void validate() const;
};

enum class Optimizer { PgdSign, MiFgsm, Adam };
enum class FeatureSource { Value, ValueEnhanced, PatchAll, PatchAligned };

std::string to_string(Optimizer o);
std::string to_string(FeatureSource f);
Optimizer optimizer_from_string(const std::string& s);
FeatureSource feature_source_from_string(const std::string& s);

struct AttackConfig {
  double epsilon = 16.0 / 255.0;  // L-inf budget in [0,1] pixel units
  int steps = 200;
  double alpha = 1.0 / 255.0;
  Optimizer optimizer = Optimizer::PgdSign;
  double mu = 1.0;                      // MI-FGSM momentum decay
  double beta1 = 0.9, beta2 = 0.999;    // ADAM moments
  double eta = 1e-8;                    // ADAM denominator guard
  std::array<double, 2> crop_range{0.75, 1.0};
  FeatureSource feature_source = FeatureSource::ValueEnhanced;
  std::uint64_t seed = 0;
  bool freeze_mask = false;             // reuse clean-image masks every step
  bool pre_projection_norm = true;
  std::string text_template;            // "" = bare concept, else "{}" slot
  bool normalize_per_model = false;     // divide each model's loss by its aligned count
  double enhance_scale = 0.0;           // 0 -> 1/sqrt(d_v)
  void validate() const;
};

struct PerturbationState {
  Image delta;
  Image momentum;  // MI-FGSM
  Image m, v;      // ADAM moments
  int iteration = 0;

  explicit PerturbationState(int h = 0, int w = 0, int c = 0)
      : delta(h, w, c), momentum(h, w, c), m(h, w, c), v(h, w, c) {}
};

struct AttackTrace {
  std::vector<double> loss;                    // per iteration
  std::vector<std::vector<int>> mask_sizes;    // [iteration][surrogate], summed over layers
  std::vector<double> step_ms;
  std::vector<double> delta_linf;              // after each step
  std::vector<bool> budget_ok;                 // bit-exact |delta| <= eps check
  std::vector<bool> box_ok;                    // x + delta in [0,1]
  double final_linf = 0.0, final_l1 = 0.0, final_l2 = 0.0;
  int fallback_count = 0;
  std::string feature_source;
};

std::string trace_to_json(const AttackTrace& t);

// --- ops -----------------------------------------------------------------

// Ensemble semantic loss: sum over models and aligned indices of
// [-sim(source) + sim(target)] on the configured feature rows. The attack
// ascends this value.
struct LossOptions {
  FeatureSource source = FeatureSource::ValueEnhanced;
  bool pre_projection_norm = true;
  double enhance_scale = 0.0;
  bool normalize_per_model = false;
};

double semantic_loss(const EnsembleCapture& ensemble,
                     const std::vector<std::vector<AlignmentMask>>& masks_per_model,
                     const std::vector<TextEmbedding>& source_embeddings,
                     const std::vector<TextEmbedding>& target_embeddings, const LossOptions& opt);

struct CropParams {
  int top = 0, left = 0, crop_h = 0, crop_w = 0;
};
CropParams sample_crop(int h, int w, std::array<double, 2> crop_range, Rng& rng);
Image crop_and_resize(const Image& in, const CropParams& p);
Image crop_and_resize(const Image& in, std::array<double, 2> crop_range, Rng& rng);
// Accumulates into din (same shape as the uncropped input).
void crop_and_resize_backward(Image& din, const CropParams& p, const Image& dout);

// Optimizer steps. Each ascends along the sign of its direction, clips delta
// into the epsilon box, then into the image box so x0 + delta stays in [0,1].
// sign(0) = 0 throughout.
void pgd_step(PerturbationState& state, const Image& grad, double alpha, double epsilon,
              const Image& x0);
void mifgsm_step(PerturbationState& state, const Image& grad, double mu, double alpha, double epsilon,
                 const Image& x0);
void adam_step(PerturbationState& state, const Image& grad, double beta1, double beta2, double eta,
               double alpha, double epsilon, const Image& x0);

struct AttackResult {
  Image adversarial;
  AttackTrace trace;
  std::vector<std::vector<AlignmentMask>> clean_masks;  // [surrogate][layer]
  std::vector<std::vector<AlignmentMask>> final_masks;
};

// One loss + gradient evaluation at `shared_image` (no crop; the caller owns
// any augmentation). With frozen_masks the given masks are reused, which makes
// the loss a smooth function suitable for finite-difference checks.
struct LossGrad {
  double loss = 0.0;
  Image grad;  // d(loss)/d(shared pixel)
  std::vector<std::vector<AlignmentMask>> masks;
};
LossGrad semantic_loss_gradient(const Image& shared_image,
                                const std::vector<SurrogateHandle>& surrogates,
                                const ConceptPair& pair, const AttackConfig& cfg,
                                const std::vector<std::vector<AlignmentMask>>* frozen_masks = nullptr);

AttackResult run_attack(const Image& image, const ConceptPair& pair,
                        const std::vector<SurrogateHandle>& surrogates, const AttackConfig& cfg);

// Deterministic (no crop) mean similarity of the given token indices to both
// concepts; used to compare clean vs adversarial images.
struct SimilaritySummary {
  double mean_source = 0.0;
  double mean_target = 0.0;
};
SimilaritySummary aligned_similarity(const Image& shared_image, const SurrogateHandle& handle,
                                     const ConceptPair& pair, const std::vector<int>& indices,
                                     const AttackConfig& cfg);

std::string apply_text_template(const std::string& tmpl, const std::string& concept_text);

}  // namespace vfa
