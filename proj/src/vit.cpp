#include "vfa/vit.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace vfa {

using json = nlohmann::json;

Mat ln_forward(const LayerNorm& ln, const Mat& x, LnCache* cache) {
  const auto d = x.cols();
  Mat xhat(x.rows(), d);
  Vec inv_sigma(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + LayerNorm::kEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_sigma(r) = is;
  }
  Mat y = (xhat.array().rowwise() * ln.gamma.transpose().array()).rowwise() +
          ln.beta.transpose().array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_sigma = std::move(inv_sigma);
  }
  return y;
}

Mat ln_backward(const LayerNorm& ln, const LnCache& cache, const Mat& dy) {
  Mat dxhat = dy.array().rowwise() * ln.gamma.transpose().array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    double m1 = dxhat.row(r).mean();
    double m2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_sigma(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
  }
  return dx;
}

Mat softmax_rows(const Mat& logits) {
  Mat probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
    probs.row(r) = e / e.sum();
  }
  return probs;
}

Mat softmax_rows_backward(const Mat& probs, const Mat& dprobs) {
  Mat dlogits(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double dot = probs.row(r).dot(dprobs.row(r));
    dlogits.row(r) = probs.row(r).array() * (dprobs.row(r).array() - dot);
  }
  return dlogits;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Mat block_forward(const Block& blk, int heads, const Mat& z, BlockCache* cache) {
  const int d = int(z.cols());
  const int dh = d / heads;
  BlockCache local;
  BlockCache& c = cache ? *cache : local;

  c.z_in = z;
  Mat y = ln_forward(blk.ln1, z, &c.ln1c);
  c.q = lin_forward(blk.wq, y);
  c.k = lin_forward(blk.wk, y);
  c.v = lin_forward(blk.wv, y);

  const double scale = 1.0 / std::sqrt(double(dh));
  Mat attn_out(z.rows(), d);
  c.attn.resize(heads);
  for (int hd = 0; hd < heads; ++hd) {
    auto qh = c.q.middleCols(hd * dh, dh);
    auto kh = c.k.middleCols(hd * dh, dh);
    auto vh = c.v.middleCols(hd * dh, dh);
    Mat logits = qh * kh.transpose() * scale;
    c.attn[hd] = softmax_rows(logits);
    attn_out.middleCols(hd * dh, dh) = c.attn[hd] * vh;
  }
  c.u = z + lin_forward(blk.wo, attn_out);

  Mat m = ln_forward(blk.ln2, c.u, &c.ln2c);
  c.pre_act = lin_forward(blk.fc1, m);
  Mat act = c.pre_act.unaryExpr([](double v) { return gelu(v); });
  Mat out = c.u + lin_forward(blk.fc2, act);
  return out;
}

Mat block_backward(const Block& blk, int heads, const BlockCache& c, const Mat& dout,
                   const Mat& dv_inject) {
  const int d = int(c.z_in.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(double(dh));

  // MLP branch
  Mat dact = lin_backward_input(blk.fc2, dout);
  Mat dpre = dact.array() * c.pre_act.unaryExpr([](double v) { return gelu_grad(v); }).array();
  Mat dm = lin_backward_input(blk.fc1, dpre);
  Mat du = dout + ln_backward(blk.ln2, c.ln2c, dm);

  // attention branch
  Mat dz = du;
  Mat dattn_out = lin_backward_input(blk.wo, du);
  Mat dq = Mat::Zero(c.z_in.rows(), d);
  Mat dk = Mat::Zero(c.z_in.rows(), d);
  Mat dv = Mat::Zero(c.z_in.rows(), d);
  if (dv_inject.size() > 0) dv = dv_inject;
  for (int hd = 0; hd < heads; ++hd) {
    auto vh = c.v.middleCols(hd * dh, dh);
    auto qh = c.q.middleCols(hd * dh, dh);
    auto kh = c.k.middleCols(hd * dh, dh);
    Mat doh = dattn_out.middleCols(hd * dh, dh);
    Mat dA = doh * vh.transpose();
    dv.middleCols(hd * dh, dh) += c.attn[hd].transpose() * doh;
    Mat dS = softmax_rows_backward(c.attn[hd], dA);
    dq.middleCols(hd * dh, dh) = dS * kh * scale;
    dk.middleCols(hd * dh, dh) = dS.transpose() * qh * scale;
  }
  Mat dy = lin_backward_input(blk.wq, dq) + lin_backward_input(blk.wk, dk) +
           lin_backward_input(blk.wv, dv);
  dz += ln_backward(blk.ln1, c.ln1c, dy);
  return dz;
}

// --- vision tower -----------------------------------------------------------

namespace {

// Token features are ordered [dy][dx][channel] within each patch.
Mat patchify(const VisionTower& t, const Image& img) {
  const auto& cfg = t.cfg;
  const int g = cfg.grid();
  const int p = cfg.patch;
  Mat patches(cfg.tokens(), p * p * 3);
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      int tok = py * g + px;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int ch = 0; ch < 3; ++ch) {
            double v = img.at(py * p + dy, px * p + dx, ch);
            double norm = (v - cfg.mean[ch]) / cfg.stddev[ch];
            patches(tok, (dy * p + dx) * 3 + ch) = norm;
          }
    }
  return patches;
}

}  // namespace

VisionCapture vision_forward(const VisionTower& t, const Image& img, const std::set<int>& capture_layers,
                             VisionCache* cache) {
  const auto& cfg = t.cfg;
  if (img.h != cfg.resolution || img.w != cfg.resolution || img.c != 3)
    throw ShapeError("vision_forward: image must be " + std::to_string(cfg.resolution) + "x" +
                     std::to_string(cfg.resolution) + "x3");
  if (!img.finite()) throw InputError("vision_forward: non-finite pixels");
  for (int l : capture_layers)
    if (l < 1 || l > cfg.depth) throw ConfigError("capture layer out of range: " + std::to_string(l));

  Mat patches = patchify(t, img);
  Mat tokens = lin_forward(t.patch_embed, patches);
  const int n = cfg.tokens();
  Mat z(n + 1, cfg.width);
  z.row(0) = t.cls_token.transpose();
  z.bottomRows(n) = tokens;
  z += t.pos_embed;

  if (cache) cache->blocks.resize(cfg.depth);
  VisionCapture cap;
  for (int l = 0; l < cfg.depth; ++l) {
    BlockCache tmp;
    BlockCache& bc = cache ? cache->blocks[size_t(l)] : tmp;
    z = block_forward(t.blocks[size_t(l)], cfg.heads, z, &bc);
    if (capture_layers.count(l + 1)) cap.values[l + 1] = bc.v.bottomRows(n);
  }
  cap.patch_tokens = z.bottomRows(n);
  cap.cls = z.row(0).transpose();
  return cap;
}

Image vision_backward(const VisionTower& t, const VisionCache& cache, const VisionGrads& grads) {
  const auto& cfg = t.cfg;
  const int n = cfg.tokens();
  Mat dz = Mat::Zero(n + 1, cfg.width);
  if (grads.d_patch_tokens.size() > 0) dz.bottomRows(n) = grads.d_patch_tokens;
  if (grads.d_cls.size() > 0) dz.row(0) = grads.d_cls.transpose();

  for (int l = cfg.depth - 1; l >= 0; --l) {
    Mat dv_inject;
    auto it = grads.d_values.find(l + 1);
    if (it != grads.d_values.end()) {
      dv_inject = Mat::Zero(n + 1, cfg.width);
      dv_inject.bottomRows(n) = it->second;
    }
    dz = block_backward(t.blocks[size_t(l)], cfg.heads, cache.blocks[size_t(l)], dz, dv_inject);
  }

  Mat dtokens = dz.bottomRows(n);  // cls token and pos embeddings are constants
  Mat dpatches = lin_backward_input(t.patch_embed, dtokens);

  Image dimg(cfg.resolution, cfg.resolution, 3);
  const int g = cfg.grid();
  const int p = cfg.patch;
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      int tok = py * g + px;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int ch = 0; ch < 3; ++ch)
            dimg.at(py * p + dy, px * p + dx, ch) =
                dpatches(tok, (dy * p + dx) * 3 + ch) / cfg.stddev[ch];
    }
  return dimg;
}

LayerDump vision_forward_all(const VisionTower& t, const Image& img) {
  const auto& cfg = t.cfg;
  std::set<int> all;
  for (int l = 1; l <= cfg.depth; ++l) all.insert(l);
  VisionCache cache;
  vision_forward(t, img, all, &cache);

  LayerDump dump;
  const int n = cfg.tokens();
  dump.block_outputs.reserve(size_t(cfg.depth));
  dump.values.reserve(size_t(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    dump.values.push_back(cache.blocks[size_t(l)].v.bottomRows(n));
    // block output = next block's input, or the final features
    if (l + 1 < cfg.depth)
      dump.block_outputs.push_back(cache.blocks[size_t(l) + 1].z_in.bottomRows(n));
    else {
      // recompute the last block output from its cache
      Mat act = cache.blocks[size_t(l)].pre_act.unaryExpr([](double v) { return gelu(v); });
      Mat out = cache.blocks[size_t(l)].u + lin_forward(t.blocks[size_t(l)].fc2, act);
      dump.block_outputs.push_back(out.bottomRows(n));
    }
  }
  return dump;
}

// --- text tower ----------------------------------------------------------------

std::vector<int> tokenize_bytes(const std::string& text, int context) {
  constexpr int kBos = 256, kEos = 257;
  std::vector<int> ids;
  ids.reserve(text.size() + 2);
  ids.push_back(kBos);
  for (unsigned char ch : text) ids.push_back(int(ch));
  ids.push_back(kEos);
  if (int(ids.size()) > context) {
    ids.resize(size_t(context));
    ids.back() = kEos;
  }
  return ids;
}

Vec text_forward(const TextTower& t, const std::string& text) {
  if (text.empty()) throw InputError("encode_text: empty concept");
  auto ids = tokenize_bytes(text, t.cfg.context);
  const int len = int(ids.size());
  Mat z(len, t.cfg.width);
  for (int i = 0; i < len; ++i)
    z.row(i) = t.tok_embed.row(ids[size_t(i)]) + t.pos_embed.row(i);
  for (const auto& blk : t.blocks) z = block_forward(blk, t.cfg.heads, z);
  Mat pooled = z.colwise().mean();  // mean over positions
  Mat normed = ln_forward(t.ln_final, pooled);
  Vec joint = (normed * t.proj).row(0).transpose();
  double nrm = joint.norm();
  if (nrm == 0.0) throw InputError("encode_text: degenerate zero embedding");
  return joint / nrm;
}

// --- weights ---------------------------------------------------------------------

namespace {

// Tensor registry: maps stable names to matrix/vector storage so that save
// and load share one traversal.
struct TensorRef {
  std::string name;
  Mat* mat = nullptr;
  Vec* vec = nullptr;
};

void register_block(std::vector<TensorRef>& refs, const std::string& prefix, Block& b) {
  refs.push_back({prefix + ".ln1.gamma", nullptr, &b.ln1.gamma});
  refs.push_back({prefix + ".ln1.beta", nullptr, &b.ln1.beta});
  refs.push_back({prefix + ".ln2.gamma", nullptr, &b.ln2.gamma});
  refs.push_back({prefix + ".ln2.beta", nullptr, &b.ln2.beta});
  for (auto [tag, lin] : std::initializer_list<std::pair<const char*, Linear*>>{
           {"wq", &b.wq}, {"wk", &b.wk}, {"wv", &b.wv}, {"wo", &b.wo}, {"fc1", &b.fc1}, {"fc2", &b.fc2}}) {
    refs.push_back({prefix + "." + tag + ".W", &lin->W, nullptr});
    refs.push_back({prefix + "." + tag + ".b", nullptr, &lin->b});
  }
}

std::vector<TensorRef> registry(DualEncoderWeights& w) {
  std::vector<TensorRef> refs;
  refs.push_back({"vision.patch_embed.W", &w.vision.patch_embed.W, nullptr});
  refs.push_back({"vision.patch_embed.b", nullptr, &w.vision.patch_embed.b});
  refs.push_back({"vision.cls", nullptr, &w.vision.cls_token});
  refs.push_back({"vision.pos", &w.vision.pos_embed, nullptr});
  for (int l = 0; l < int(w.vision.blocks.size()); ++l)
    register_block(refs, "vision.blocks." + std::to_string(l), w.vision.blocks[size_t(l)]);
  refs.push_back({"vision.ln_post.gamma", nullptr, &w.vision.ln_post.gamma});
  refs.push_back({"vision.ln_post.beta", nullptr, &w.vision.ln_post.beta});
  refs.push_back({"vision.proj", &w.vision.proj, nullptr});

  refs.push_back({"text.tok", &w.text.tok_embed, nullptr});
  refs.push_back({"text.pos", &w.text.pos_embed, nullptr});
  for (int l = 0; l < int(w.text.blocks.size()); ++l)
    register_block(refs, "text.blocks." + std::to_string(l), w.text.blocks[size_t(l)]);
  refs.push_back({"text.ln_final.gamma", nullptr, &w.text.ln_final.gamma});
  refs.push_back({"text.ln_final.beta", nullptr, &w.text.ln_final.beta});
  refs.push_back({"text.proj", &w.text.proj, nullptr});
  return refs;
}

constexpr char kMagic[4] = {'V', 'F', 'A', 'W'};

}  // namespace

void save_weights(const std::string& path, const DualEncoderWeights& w_in) {
  auto& w = const_cast<DualEncoderWeights&>(w_in);
  auto refs = registry(w);

  json header;
  header["vision"] = {{"resolution", w.vision.cfg.resolution}, {"patch", w.vision.cfg.patch},
                      {"width", w.vision.cfg.width},           {"heads", w.vision.cfg.heads},
                      {"depth", w.vision.cfg.depth},           {"mlp_hidden", w.vision.cfg.mlp_hidden},
                      {"joint_dim", w.vision.cfg.joint_dim},   {"mean", w.vision.cfg.mean},
                      {"std", w.vision.cfg.stddev}};
  header["text"] = {{"context", w.text.cfg.context}, {"width", w.text.cfg.width},
                    {"heads", w.text.cfg.heads},     {"depth", w.text.cfg.depth},
                    {"mlp_hidden", w.text.cfg.mlp_hidden}, {"joint_dim", w.text.cfg.joint_dim},
                    {"vocab", w.text.cfg.vocab}};
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& r : refs) {
    std::uint64_t rows = r.mat ? std::uint64_t(r.mat->rows()) : std::uint64_t(r.vec->size());
    std::uint64_t cols = r.mat ? std::uint64_t(r.mat->cols()) : 1;
    tensors.push_back({{"name", r.name}, {"rows", rows}, {"cols", cols}, {"offset", offset}});
    offset += rows * cols * sizeof(double);
  }
  header["tensors"] = tensors;
  std::string hdr = header.dump();

  std::string blob;
  blob.reserve(4 + 4 + 8 + hdr.size() + offset);
  blob.append(kMagic, 4);
  std::uint32_t version = 1;
  blob.append(reinterpret_cast<const char*>(&version), 4);
  std::uint64_t hlen = hdr.size();
  blob.append(reinterpret_cast<const char*>(&hlen), 8);
  blob.append(hdr);
  for (const auto& r : refs) {
    if (r.mat) {
      // stored row-major
      for (Eigen::Index i = 0; i < r.mat->rows(); ++i) {
        Eigen::RowVectorXd row = r.mat->row(i);
        blob.append(reinterpret_cast<const char*>(row.data()), size_t(row.size()) * sizeof(double));
      }
    } else {
      blob.append(reinterpret_cast<const char*>(r.vec->data()), size_t(r.vec->size()) * sizeof(double));
    }
  }
  write_file_atomic(path, blob.data(), blob.size());
}

DualEncoderWeights load_weights(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a weights file: " + path);
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != 1) throw IoError("unsupported weights version");
  std::uint64_t hlen;
  std::memcpy(&hlen, bytes.data() + 8, 8);
  if (16 + hlen > bytes.size()) throw IoError("truncated weights header");
  json header = json::parse(std::string(bytes.begin() + 16, bytes.begin() + 16 + std::ptrdiff_t(hlen)));

  DualEncoderWeights w;
  auto& vc = w.vision.cfg;
  const auto& hv = header.at("vision");
  vc.resolution = hv.at("resolution");
  vc.patch = hv.at("patch");
  vc.width = hv.at("width");
  vc.heads = hv.at("heads");
  vc.depth = hv.at("depth");
  vc.mlp_hidden = hv.at("mlp_hidden");
  vc.joint_dim = hv.at("joint_dim");
  for (int i = 0; i < 3; ++i) {
    vc.mean[size_t(i)] = hv.at("mean")[size_t(i)];
    vc.stddev[size_t(i)] = hv.at("std")[size_t(i)];
  }
  auto& tc = w.text.cfg;
  const auto& ht = header.at("text");
  tc.context = ht.at("context");
  tc.width = ht.at("width");
  tc.heads = ht.at("heads");
  tc.depth = ht.at("depth");
  tc.mlp_hidden = ht.at("mlp_hidden");
  tc.joint_dim = ht.at("joint_dim");
  tc.vocab = ht.at("vocab");

  if (vc.patch <= 0 || vc.resolution % vc.patch != 0)
    throw ConfigError("weights header: resolution not divisible by patch");
  if (vc.width % vc.heads != 0) throw ConfigError("weights header: width not divisible by heads");

  w.vision.blocks.resize(size_t(vc.depth));
  w.text.blocks.resize(size_t(tc.depth));
  auto refs = registry(w);

  std::map<std::string, json> by_name;
  for (const auto& t : header.at("tensors")) by_name[t.at("name")] = t;

  const std::uint8_t* payload = bytes.data() + 16 + hlen;
  const size_t payload_len = bytes.size() - 16 - size_t(hlen);
  for (auto& r : refs) {
    auto it = by_name.find(r.name);
    if (it == by_name.end()) throw IoError("weights missing tensor " + r.name);
    std::uint64_t rows = it->second.at("rows"), cols = it->second.at("cols"),
                  offset = it->second.at("offset");
    if (offset + rows * cols * sizeof(double) > payload_len)
      throw IoError("weights payload truncated at " + r.name);
    const double* src = reinterpret_cast<const double*>(payload + offset);
    if (r.mat) {
      r.mat->resize(Eigen::Index(rows), Eigen::Index(cols));
      for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) (*r.mat)(Eigen::Index(i), Eigen::Index(j)) = src[i * cols + j];
    } else {
      if (cols != 1) throw IoError("vector tensor with cols != 1: " + r.name);
      r.vec->resize(Eigen::Index(rows));
      for (std::uint64_t i = 0; i < rows; ++i) (*r.vec)(Eigen::Index(i)) = src[i];
    }
  }

  // shape sanity against the declared architecture
  if (w.vision.patch_embed.W.rows() != vc.patch * vc.patch * 3 || w.vision.patch_embed.W.cols() != vc.width)
    throw ConfigError("weights: patch embedding shape inconsistent with declared patch size");
  if (w.vision.pos_embed.rows() != vc.tokens() + 1)
    throw ConfigError("weights: positional table inconsistent with resolution/patch");
  if (vc.joint_dim != tc.joint_dim) throw ConfigError("weights: image/text joint dims differ");
  return w;
}

namespace {

Mat randn_mat(Rng& rng, int rows, int cols, double scale) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal() * scale;
  return m;
}

Vec randn_vec(Rng& rng, int n, double scale) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal() * scale;
  return v;
}

Block make_block(Rng& rng, int width, int mlp_hidden) {
  Block b;
  b.ln1.gamma = Vec::Ones(width);
  b.ln1.beta = Vec::Zero(width);
  b.ln2.gamma = Vec::Ones(width);
  b.ln2.beta = Vec::Zero(width);
  double s = 1.0 / std::sqrt(double(width));
  b.wq = {randn_mat(rng, width, width, s), randn_vec(rng, width, 0.01)};
  b.wk = {randn_mat(rng, width, width, s), randn_vec(rng, width, 0.01)};
  b.wv = {randn_mat(rng, width, width, s), randn_vec(rng, width, 0.01)};
  b.wo = {randn_mat(rng, width, width, s), randn_vec(rng, width, 0.01)};
  b.fc1 = {randn_mat(rng, width, mlp_hidden, s), randn_vec(rng, mlp_hidden, 0.01)};
  b.fc2 = {randn_mat(rng, mlp_hidden, width, 1.0 / std::sqrt(double(mlp_hidden))),
           randn_vec(rng, width, 0.01)};
  return b;
}

}  // namespace

DualEncoderWeights make_toy_encoder(const ToyParams& p, std::uint64_t seed) {
  if (p.resolution % p.patch != 0) throw ConfigError("toy encoder: resolution % patch != 0");
  if (p.width % p.heads != 0 || p.text_width % p.text_heads != 0)
    throw ConfigError("toy encoder: width % heads != 0");
  Rng rng(seed);
  DualEncoderWeights w;

  auto& vc = w.vision.cfg;
  vc.resolution = p.resolution;
  vc.patch = p.patch;
  vc.width = p.width;
  vc.heads = p.heads;
  vc.depth = p.depth;
  vc.mlp_hidden = p.mlp_hidden;
  vc.joint_dim = p.joint_dim;
  int pdim = p.patch * p.patch * 3;
  w.vision.patch_embed = {randn_mat(rng, pdim, p.width, 1.0 / std::sqrt(double(pdim))),
                          randn_vec(rng, p.width, 0.01)};
  w.vision.cls_token = randn_vec(rng, p.width, 0.02);
  w.vision.pos_embed = randn_mat(rng, vc.tokens() + 1, p.width, 0.02);
  for (int l = 0; l < p.depth; ++l) w.vision.blocks.push_back(make_block(rng, p.width, p.mlp_hidden));
  w.vision.ln_post.gamma = Vec::Ones(p.width);
  w.vision.ln_post.beta = Vec::Zero(p.width);
  w.vision.proj = randn_mat(rng, p.width, p.joint_dim, 1.0 / std::sqrt(double(p.width)));

  auto& tc = w.text.cfg;
  tc.context = p.text_context;
  tc.width = p.text_width;
  tc.heads = p.text_heads;
  tc.depth = p.text_depth;
  tc.mlp_hidden = p.text_mlp_hidden;
  tc.joint_dim = p.joint_dim;
  w.text.tok_embed = randn_mat(rng, tc.vocab, tc.width, 1.0);
  w.text.pos_embed = randn_mat(rng, tc.context, tc.width, 0.05);
  for (int l = 0; l < tc.depth; ++l) w.text.blocks.push_back(make_block(rng, tc.width, tc.mlp_hidden));
  w.text.ln_final.gamma = Vec::Ones(tc.width);
  w.text.ln_final.beta = Vec::Zero(tc.width);
  w.text.proj = randn_mat(rng, tc.width, tc.joint_dim, 1.0 / std::sqrt(double(tc.width)));
  return w;
}

}  // namespace vfa
