#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/image.hpp"

// Minimal transformer dual encoder with hand-written backward passes.
// Only activation gradients are computed (the towers are frozen); the attack
// needs d(loss)/d(pixel), never parameter gradients.

namespace vfa {

struct LayerNorm {
  Vec gamma, beta;
  static constexpr double kEps = 1e-5;
};

struct LnCache {
  Mat xhat;
  Vec inv_sigma;
};

Mat ln_forward(const LayerNorm& ln, const Mat& x, LnCache* cache = nullptr);
Mat ln_backward(const LayerNorm& ln, const LnCache& cache, const Mat& dy);

struct Linear {
  Mat W;  // in x out
  Vec b;  // out
};

inline Mat lin_forward(const Linear& l, const Mat& x) { return (x * l.W).rowwise() + l.b.transpose(); }
inline Mat lin_backward_input(const Linear& l, const Mat& dy) { return dy * l.W.transpose(); }

Mat softmax_rows(const Mat& logits);
Mat softmax_rows_backward(const Mat& probs, const Mat& dprobs);

double gelu(double x);
double gelu_grad(double x);

// Pre-LN transformer block. The per-head value slices of `v` concatenate to
// the block's value matrix; the CLS row sits at row 0 everywhere.
struct Block {
  LayerNorm ln1, ln2;
  Linear wq, wk, wv, wo, fc1, fc2;
};

struct BlockCache {
  Mat z_in;
  LnCache ln1c;
  Mat q, k, v;
  std::vector<Mat> attn;  // per-head row-stochastic weights
  Mat u;
  LnCache ln2c;
  Mat pre_act;
};

Mat block_forward(const Block& blk, int heads, const Mat& z, BlockCache* cache = nullptr);

// dv_inject adds an external gradient on this block's value matrix (same
// shape as cache.v, CLS row included); pass an empty Mat when unused.
Mat block_backward(const Block& blk, int heads, const BlockCache& cache, const Mat& dout,
                   const Mat& dv_inject);

// --- vision tower -----------------------------------------------------------

struct VisionConfig {
  int resolution = 0, patch = 0, width = 0, heads = 0, depth = 0, mlp_hidden = 0, joint_dim = 0;
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.25, 0.25, 0.25};
  int grid() const { return resolution / patch; }
  int tokens() const { return grid() * grid(); }
};

struct VisionTower {
  VisionConfig cfg;
  Linear patch_embed;  // (patch*patch*3) -> width
  Vec cls_token;
  Mat pos_embed;  // (n+1) x width
  std::vector<Block> blocks;
  LayerNorm ln_post;
  Mat proj;  // width x joint_dim, the image-side joint projection
};

struct VisionCapture {
  Mat patch_tokens;          // final block output, CLS row dropped
  Vec cls;                   // final block CLS row (pre ln_post)
  std::map<int, Mat> values;  // 1-based block index -> n x width value matrix
};

struct VisionCache {
  std::vector<BlockCache> blocks;
};

VisionCapture vision_forward(const VisionTower& t, const Image& img, const std::set<int>& capture_layers,
                             VisionCache* cache = nullptr);

struct VisionGrads {
  Mat d_patch_tokens;         // n x width, may be empty
  Vec d_cls;                  // may be empty
  std::map<int, Mat> d_values;  // per captured layer, n x width (CLS excluded)
};

// Gradient w.r.t. the [0,1] input image (channel normalization is folded in).
Image vision_backward(const VisionTower& t, const VisionCache& cache, const VisionGrads& grads);

// Per-layer dump for the diagnostics: block outputs and value matrices for
// every block, CLS excluded. Forward only.
struct LayerDump {
  std::vector<Mat> block_outputs;
  std::vector<Mat> values;
};
LayerDump vision_forward_all(const VisionTower& t, const Image& img);

// --- text tower ---------------------------------------------------------------

struct TextConfig {
  int context = 0, width = 0, heads = 0, depth = 0, mlp_hidden = 0, joint_dim = 0;
  int vocab = 258;  // 256 byte values + BOS + EOS
};

struct TextTower {
  TextConfig cfg;
  Mat tok_embed;  // vocab x width
  Mat pos_embed;  // context x width
  std::vector<Block> blocks;
  LayerNorm ln_final;
  Mat proj;  // width x joint_dim, the text-side joint projection
};

std::vector<int> tokenize_bytes(const std::string& text, int context);
Vec text_forward(const TextTower& t, const std::string& text);  // unit norm

// --- weights ------------------------------------------------------------------

struct DualEncoderWeights {
  VisionTower vision;
  TextTower text;
};

void save_weights(const std::string& path, const DualEncoderWeights& w);
DualEncoderWeights load_weights(const std::string& path);

struct ToyParams {
  int resolution = 32, patch = 8, width = 32, heads = 2, depth = 2, mlp_hidden = 64, joint_dim = 32;
  int text_context = 32, text_width = 32, text_heads = 2, text_depth = 2, text_mlp_hidden = 64;
};

DualEncoderWeights make_toy_encoder(const ToyParams& p, std::uint64_t seed);

}  // namespace vfa
