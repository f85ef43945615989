#pragma once

#include <string>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/surrogate.hpp"

// Text-guided value location: score tokens against the source concept,
// threshold at the midpoint of the score range, keep the indices above it.

namespace vfa {

struct AlignmentMask {
  Vec scores;                 // cosine similarity per token
  double tau = 0.0;           // midpoint threshold
  std::vector<int> indices;   // aligned token indices, ascending
  std::string surrogate_id;
  int layer = 0;
  bool fallback_used = false;  // empty set replaced by {argmax scores}
};

struct LocateOptions {
  bool pre_projection_norm = true;
  double enhance_scale = 0.0;  // forwarded to self_value_enhance when enhancing
};

// Cosine similarity between each projected token row and the text embedding.
Vec similarity_scores(const Mat& tokens, const TextEmbedding& text, const SurrogateHandle& handle,
                      bool pre_projection_norm = true);

// tau = (max + min) / 2 over the score vector.
double dynamic_threshold(const Vec& scores);

// Strictly-greater filter; may be empty for constant scores.
std::vector<int> alignment_set(const Vec& scores, double tau);

// Applies the documented degenerate-case fallback and packages the mask.
AlignmentMask make_mask(const Vec& scores, const std::string& surrogate_id, int layer);

// Full pipeline over a capture: (optionally) enhance each captured value
// matrix, score against the source concept, threshold, select. One mask per
// configured layer, recomputed fresh on every call.
std::vector<AlignmentMask> locate(const EncoderOutputs& capture, const SurrogateHandle& handle,
                                  const std::string& source_concept, bool enhance,
                                  const LocateOptions& opt = {});

std::string masks_to_json(const std::vector<AlignmentMask>& masks);

}  // namespace vfa
