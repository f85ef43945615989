#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vfa/attack.hpp"
#include "vfa/enhance.hpp"
#include "vfa/evalkit.hpp"

using namespace vfa;

namespace {

SurrogateHandle toy_handle(std::uint64_t seed = 7) {
  ToyParams p;
  auto weights = make_toy_encoder(p, seed);
  SurrogateSpec spec;
  spec.model_id = "toy-" + std::to_string(seed);
  spec.input_resolution = p.resolution;
  spec.patch_size = p.patch;
  spec.num_heads = p.heads;
  spec.layer_set = {p.depth};
  spec.weights_uri = "(in-memory)";
  return std::make_shared<const Surrogate>(spec, std::move(weights));
}

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

Image const_image(int h, int w, double v) {
  Image img(h, w, 3);
  for (double& x : img.data) x = v;
  return img;
}

AttackConfig toy_config() {
  AttackConfig cfg;
  cfg.steps = 10;
  cfg.alpha = 1.0 / 255.0;
  cfg.epsilon = 16.0 / 255.0;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

// --- semantic loss -----------------------------------------------------------

TEST_CASE("semantic_loss: single aligned token evaluates the signed difference") {
  auto h = toy_handle();
  Rng rng(3);
  Image img = random_image(48, 48, rng);
  auto ens = capture_ensemble({h}, img);

  // synthetic unit text vectors in joint space
  int d = h->joint_dim();
  Vec a = Vec::Zero(d), b = Vec::Zero(d);
  a(0) = 1.0;
  b(1) = 1.0;
  TextEmbedding ts{"src", a}, tt{"tgt", b};

  AlignmentMask mask;
  mask.scores = Vec::Zero(h->tokens());
  mask.tau = -2.0;
  mask.indices = {5};
  mask.surrogate_id = h->spec().model_id;
  mask.layer = 2;

  LossOptions opt;
  opt.source = FeatureSource::Value;
  opt.pre_projection_norm = false;
  double loss = semantic_loss(ens, {{mask}}, {ts}, {tt}, opt);

  Mat projected = joint_project_rows(*h, ens.per_model[0].second.values.at(2), false);
  Vec p = projected.row(5).transpose();
  double expect = -p.dot(a) / p.norm() + p.dot(b) / p.norm();
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));

  // token equidistant from both concepts contributes zero
  TextEmbedding same_a{"s", a}, same_b{"t", a};
  CHECK(semantic_loss(ens, {{mask}}, {same_a}, {same_b}, opt) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)semantic_loss(EnsembleCapture{}, {}, {}, {}, opt), InputError);
}

TEST_CASE("semantic_loss: two-surrogate naive double-loop oracle") {
  auto h1 = toy_handle(1);
  auto h2 = toy_handle(2);
  Rng rng(5);
  Image img = random_image(48, 48, rng);
  auto ens = capture_ensemble({h1, h2}, img);

  std::vector<TextEmbedding> ts{encode_text(h1, "dog"), encode_text(h2, "dog")};
  std::vector<TextEmbedding> tt{encode_text(h1, "cat"), encode_text(h2, "cat")};

  std::vector<std::vector<AlignmentMask>> masks(2);
  Rng pick(7);
  for (int k = 0; k < 2; ++k) {
    AlignmentMask m;
    m.layer = 2;
    for (int i = 0; i < 16; ++i)
      if (pick.uniform() < 0.4) m.indices.push_back(i);
    if (m.indices.empty()) m.indices.push_back(0);
    masks[size_t(k)].push_back(m);
  }

  LossOptions opt;
  opt.source = FeatureSource::ValueEnhanced;
  opt.pre_projection_norm = true;
  double loss = semantic_loss(ens, masks, ts, tt, opt);

  double expect = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& [handle, cap] = ens.per_model[size_t(k)];
    Mat vt = self_value_enhance(cap.values.at(2), 2).v_tilde;
    Mat projected = joint_project_rows(*handle, vt, true);
    for (int i : masks[size_t(k)][0].indices) {
      Vec p = projected.row(i).transpose();
      expect += -p.dot(ts[size_t(k)].joint_vector) / p.norm() + p.dot(tt[size_t(k)].joint_vector) / p.norm();
    }
  }
  CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
}

// --- crop and resize -----------------------------------------------------------

TEST_CASE("crop_and_resize: full-range crop is the identity") {
  Rng rng(9);
  Image img = random_image(20, 28, rng);
  Rng crop_rng(1);
  Image out = crop_and_resize(img, {1.0, 1.0}, crop_rng);
  for (size_t i = 0; i < img.data.size(); ++i) CHECK(out.data[i] == img.data[i]);
}

TEST_CASE("crop_and_resize: constant images are unchanged") {
  Image img = const_image(16, 16, 0.625);
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    Image out = crop_and_resize(img, {0.5, 1.0}, rng);
    for (double v : out.data) CHECK(v == doctest::Approx(0.625).epsilon(1e-12));
  }
}

TEST_CASE("crop_and_resize: seeded record-and-replay determinism") {
  Rng rng(13);
  Image img = random_image(24, 24, rng);
  Rng r1(77), r2(77);
  Image a = crop_and_resize(img, {0.75, 1.0}, r1);
  Image b = crop_and_resize(img, {0.75, 1.0}, r2);
  for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);

  // a second draw from the same rng differs (fresh crop each call)
  Image c = crop_and_resize(img, {0.75, 1.0}, r1);
  bool any_diff = false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != c.data[i]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("crop_and_resize backward matches finite differences") {
  Rng rng(15);
  Image img = random_image(12, 12, rng);
  CropParams p = sample_crop(12, 12, {0.5, 0.9}, rng);

  Image w = random_image(12, 12, rng);
  auto f = [&](const Image& x) {
    Image out = crop_and_resize(x, p);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * w.data[i];
    return acc;
  };

  Image dout = w;
  Image din(12, 12, 3);
  crop_and_resize_backward(din, p, dout);

  const double step = 1e-6;
  for (int trial = 0; trial < 12; ++trial) {
    size_t pix = size_t(rng.uniform_int(0, int(img.data.size()) - 1));
    Image plus = img, minus = img;
    plus.data[pix] += step;
    minus.data[pix] -= step;
    double fd = (f(plus) - f(minus)) / (2 * step);
    CHECK(std::abs(fd - din.data[pix]) < 1e-6);
  }
}

// --- optimizer steps --------------------------------------------------------------

TEST_CASE("pgd_step: sign ascent, budget clip, sign(0)=0") {
  Image x0 = const_image(2, 2, 0.5);
  PerturbationState st(2, 2, 3);
  Image grad(2, 2, 3);
  for (double& g : grad.data) g = 3.7;  // any positive value
  grad.data[0] = 0.0;

  pgd_step(st, grad, 1.0 / 255.0, 16.0 / 255.0, x0);
  CHECK(st.delta.data[0] == 0.0);  // sign(0) = 0 leaves it in place
  for (size_t i = 1; i < st.delta.data.size(); ++i)
    CHECK(st.delta.data[i] == doctest::Approx(1.0 / 255.0).epsilon(1e-15));

  // saturate at the budget
  for (int t = 0; t < 40; ++t) pgd_step(st, grad, 1.0 / 255.0, 16.0 / 255.0, x0);
  for (size_t i = 1; i < st.delta.data.size(); ++i) CHECK(st.delta.data[i] == 16.0 / 255.0);

  Image bad = grad;
  bad.data[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(pgd_step(st, bad, 1.0 / 255.0, 16.0 / 255.0, x0), OptimError);
}

TEST_CASE("pgd_step: image box keeps x+delta in [0,1]") {
  Image x0(1, 2, 3);
  for (size_t i = 0; i < x0.data.size(); ++i) x0.data[i] = (i % 2 == 0) ? 0.01 : 0.99;
  PerturbationState st(1, 2, 3);
  Image grad(1, 2, 3);
  for (size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = (i % 2 == 0) ? -1.0 : 1.0;
  for (int t = 0; t < 30; ++t) pgd_step(st, grad, 2.0 / 255.0, 32.0 / 255.0, x0);
  for (size_t i = 0; i < x0.data.size(); ++i) {
    double y = x0.data[i] + st.delta.data[i];
    CHECK(y >= -1e-15);
    CHECK(y <= 1.0 + 1e-15);
  }
}

TEST_CASE("mifgsm_step: momentum recurrence and PGD equivalence at mu=0") {
  Image x0 = const_image(1, 1, 0.5);

  // g = mu*g + grad/||grad||_1 with ||.||_1 = 2 here
  PerturbationState st(1, 1, 3);
  Image grad(1, 1, 3);
  grad.data = {1.0, -1.0, 0.0};
  mifgsm_step(st, grad, 1.0, 1.0 / 255.0, 16.0 / 255.0, x0);
  CHECK(st.momentum.data[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(st.momentum.data[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(st.momentum.data[2] == 0.0);

  // mu = 0 reproduces the PGD delta sequence on an identical gradient stream
  Rng rng(21);
  PerturbationState pgd(2, 2, 3), mif(2, 2, 3);
  Image x1 = const_image(2, 2, 0.5);
  for (int t = 0; t < 25; ++t) {
    Image g(2, 2, 3);
    for (double& v : g.data) v = rng.normal();
    pgd_step(pgd, g, 1.0 / 255.0, 8.0 / 255.0, x1);
    mifgsm_step(mif, g, 0.0, 1.0 / 255.0, 8.0 / 255.0, x1);
    for (size_t i = 0; i < pgd.delta.data.size(); ++i) CHECK(pgd.delta.data[i] == mif.delta.data[i]);
  }
}

TEST_CASE("mifgsm_step: three-step hand-unrolled recurrence") {
  Image x0 = const_image(1, 1, 0.5);
  PerturbationState st(1, 1, 3);
  const double mu = 0.8, alpha = 1.0 / 255.0, eps = 16.0 / 255.0;

  Image g1(1, 1, 3), g2(1, 1, 3), g3(1, 1, 3);
  g1.data = {2.0, -1.0, 1.0};
  g2.data = {0.5, 0.5, -1.0};
  g3.data = {-3.0, 1.0, 0.0};

  double m[3] = {0, 0, 0};
  double delta[3] = {0, 0, 0};
  for (const Image* g : {&g1, &g2, &g3}) {
    double l1 = std::abs(g->data[0]) + std::abs(g->data[1]) + std::abs(g->data[2]);
    for (int i = 0; i < 3; ++i) {
      m[i] = mu * m[i] + g->data[i] / l1;
      double step = m[i] > 0 ? alpha : (m[i] < 0 ? -alpha : 0.0);
      delta[i] = std::clamp(delta[i] + step, -eps, eps);
    }
  }
  mifgsm_step(st, g1, mu, alpha, eps, x0);
  mifgsm_step(st, g2, mu, alpha, eps, x0);
  mifgsm_step(st, g3, mu, alpha, eps, x0);
  for (int i = 0; i < 3; ++i) {
    CHECK(st.momentum.data[size_t(i)] == doctest::Approx(m[i]).epsilon(1e-9));
    CHECK(st.delta.data[size_t(i)] == doctest::Approx(delta[i]).epsilon(1e-9));
  }
}

TEST_CASE("adam_step: first step direction is sign(g); zero grad freezes delta") {
  Image x0 = const_image(1, 1, 0.5);
  PerturbationState st(1, 1, 3);
  Image g(1, 1, 3);
  g.data = {0.3, -2.0, 0.0};
  adam_step(st, g, 0.9, 0.999, 1e-8, 1.0 / 255.0, 16.0 / 255.0, x0);
  CHECK(st.delta.data[0] == doctest::Approx(1.0 / 255.0).epsilon(1e-15));
  CHECK(st.delta.data[1] == doctest::Approx(-1.0 / 255.0).epsilon(1e-15));
  CHECK(st.delta.data[2] == 0.0);

  PerturbationState frozen(1, 1, 3);
  Image zero(1, 1, 3);
  adam_step(frozen, zero, 0.9, 0.999, 1e-8, 1.0 / 255.0, 16.0 / 255.0, x0);
  for (double d : frozen.delta.data) CHECK(d == 0.0);
}

TEST_CASE("adam_step: two steps on a scalar against hand computation") {
  Image x0 = const_image(1, 1, 0.5);
  const double b1 = 0.9, b2 = 0.999, eta = 1e-8, alpha = 1.0 / 255.0, eps = 16.0 / 255.0;

  double g1 = 0.7, g2 = -0.2;
  double m = 0, v = 0, delta = 0;
  int t = 0;
  for (double g : {g1, g2}) {
    t += 1;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, t));
    double vhat = v / (1 - std::pow(b2, t));
    double dir = mhat / (std::sqrt(vhat) + eta);
    delta = std::clamp(delta + alpha * (dir > 0 ? 1.0 : (dir < 0 ? -1.0 : 0.0)), -eps, eps);
  }

  PerturbationState st(1, 1, 3);
  Image gi(1, 1, 3);
  gi.data = {g1, g1, g1};
  adam_step(st, gi, b1, b2, eta, alpha, eps, x0);
  gi.data = {g2, g2, g2};
  adam_step(st, gi, b1, b2, eta, alpha, eps, x0);
  CHECK(st.delta.data[0] == doctest::Approx(delta).epsilon(1e-9));
}

// --- full attack ----------------------------------------------------------------

TEST_CASE("run_attack: budget contract after one step") {
  auto h = toy_handle();
  Rng rng(25);
  Image img = random_image(48, 48, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 1;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  double linf = 0;
  for (size_t i = 0; i < img.data.size(); ++i)
    linf = std::max(linf, std::abs(result.adversarial.data[i] - img.data[i]));
  CHECK(linf <= 16.0 / 255.0 + 1e-9);
  CHECK(result.trace.loss.size() == 1);
  CHECK(result.trace.budget_ok[0]);
  CHECK(result.trace.box_ok[0]);
}

TEST_CASE("run_attack: patch_all baseline selects every token every iteration") {
  auto h = toy_handle();
  Rng rng(27);
  Image img = random_image(48, 48, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 4;
  cfg.feature_source = FeatureSource::PatchAll;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  for (const auto& sizes : result.trace.mask_sizes) {
    REQUIRE(sizes.size() == 1);
    CHECK(sizes[0] == h->tokens());
  }
}

TEST_CASE("run_attack: white-box ascent over 200 steps on the toy encoder") {
  auto h = toy_handle(99);
  Rng rng(29);
  Image img = random_image(48, 48, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 200;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  CHECK(result.trace.loss.back() > result.trace.loss.front());
}

TEST_CASE("run_attack: deterministic bytes for identical seed/config/weights/image") {
  auto h = toy_handle(31);
  Rng rng(33);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 6;

  auto a = run_attack(img, {"dog", "cat"}, {h}, cfg);
  auto b = run_attack(img, {"dog", "cat"}, {h}, cfg);
  auto pa = encode_png(a.adversarial, 16);
  auto pb = encode_png(b.adversarial, 16);
  CHECK(pa == pb);

  cfg.seed += 1;
  auto c = run_attack(img, {"dog", "cat"}, {h}, cfg);
  CHECK(encode_png(c.adversarial, 16) != pa);
}

TEST_CASE("run_attack: trace norms agree with imperceptibility on the same delta") {
  auto h = toy_handle();
  Rng rng(35);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 5;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  Image delta(img.h, img.w, img.c);
  for (size_t i = 0; i < delta.data.size(); ++i)
    delta.data[i] = result.adversarial.data[i] - img.data[i];
  auto im = imperceptibility(delta);
  CHECK(std::abs(im.l1 - result.trace.final_l1) < 1e-9);
  CHECK(std::abs(im.l2 - result.trace.final_l2) < 1e-9);
}

TEST_CASE("run_attack: feature-source switch changes only mask content, not schema") {
  auto h = toy_handle();
  Rng rng(37);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 3;

  cfg.feature_source = FeatureSource::ValueEnhanced;
  auto v = run_attack(img, {"dog", "cat"}, {h}, cfg);
  cfg.feature_source = FeatureSource::PatchAligned;
  auto x = run_attack(img, {"dog", "cat"}, {h}, cfg);

  CHECK(v.trace.loss.size() == x.trace.loss.size());
  CHECK(v.trace.mask_sizes.size() == x.trace.mask_sizes.size());
  CHECK(v.trace.mask_sizes[0].size() == x.trace.mask_sizes[0].size());
  CHECK(v.trace.feature_source != x.trace.feature_source);
}

TEST_CASE("run_attack: frozen masks reuse the clean-image location") {
  auto h = toy_handle();
  Rng rng(39);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 3;
  cfg.freeze_mask = true;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  size_t clean_size = result.clean_masks[0][0].indices.size();
  for (const auto& sizes : result.trace.mask_sizes) CHECK(sizes[0] == int(clean_size));
  CHECK(result.final_masks[0][0].indices == result.clean_masks[0][0].indices);
}

TEST_CASE("run_attack: ensemble of two surrogates runs and traces both") {
  auto h1 = toy_handle(1);
  auto h2 = toy_handle(2);
  Rng rng(41);
  Image img = random_image(48, 48, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 2;

  auto result = run_attack(img, {"dog", "cat"}, {h1, h2}, cfg);
  CHECK(result.trace.mask_sizes[0].size() == 2);
  CHECK(result.clean_masks.size() == 2);
}

TEST_CASE("loss gradient survives the shared-space resize (non-native image size)") {
  auto h = toy_handle(47);  // 32px surrogate fed from a 44x44 working image
  Rng rng(49);
  Image img = random_image(44, 44, rng);
  ConceptPair pair{"dog", "cat"};
  AttackConfig cfg = toy_config();

  auto base = semantic_loss_gradient(img, {h}, pair, cfg);
  const auto frozen = base.masks;
  auto fixed = semantic_loss_gradient(img, {h}, pair, cfg, &frozen);

  const double step = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 10; ++trial) {
    size_t pix = size_t(rng.uniform_int(0, int(img.data.size()) - 1));
    Image plus = img, minus = img;
    plus.data[pix] += step;
    minus.data[pix] -= step;
    double fd = (semantic_loss_gradient(plus, {h}, pair, cfg, &frozen).loss -
                 semantic_loss_gradient(minus, {h}, pair, cfg, &frozen).loss) /
                (2 * step);
    double bp = fixed.grad.data[pix];
    double denom = std::max(std::abs(fd), std::abs(bp));
    if (denom < 1e-12) continue;
    CHECK(std::abs(fd - bp) / denom < 1e-2);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("gradient accumulation is order-independent across surrogates") {
  auto h1 = toy_handle(51);
  auto h2 = toy_handle(52);
  Rng rng(53);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();

  auto ab = semantic_loss_gradient(img, {h1, h2}, {"dog", "cat"}, cfg);
  auto ba = semantic_loss_gradient(img, {h2, h1}, {"dog", "cat"}, cfg);
  CHECK(std::abs(ab.loss - ba.loss) < 1e-9);
  double max_diff = 0;
  for (size_t i = 0; i < ab.grad.data.size(); ++i)
    max_diff = std::max(max_diff, std::abs(ab.grad.data[i] - ba.grad.data[i]));
  CHECK(max_diff < 1e-6);
}

TEST_CASE("multi-layer capture sums the loss over the layer set") {
  ToyParams p;
  p.depth = 4;
  auto weights = make_toy_encoder(p, 61);
  SurrogateSpec spec;
  spec.model_id = "multi";
  spec.input_resolution = p.resolution;
  spec.patch_size = p.patch;
  spec.num_heads = p.heads;
  spec.layer_set = {1, 2, 3, 4};  // final four blocks
  spec.weights_uri = "(in-memory)";
  auto h = std::make_shared<const Surrogate>(spec, std::move(weights));

  Rng rng(63);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 2;

  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  CHECK(result.clean_masks[0].size() == 4);  // one mask per captured layer

  // the joint loss equals the sum of the per-layer masked contributions
  auto lg = semantic_loss_gradient(img, {h}, {"dog", "cat"}, cfg);
  EnsembleCapture ens = capture_ensemble({h}, img);
  LossOptions opt;
  opt.source = cfg.feature_source;
  opt.pre_projection_norm = cfg.pre_projection_norm;
  double via_op = semantic_loss(ens, {lg.masks[0]}, {encode_text(h, "dog")}, {encode_text(h, "cat")}, opt);
  CHECK(lg.loss == doctest::Approx(via_op).epsilon(1e-9));
}

TEST_CASE("run_attack works with the momentum and adaptive optimizers") {
  auto h = toy_handle(71);
  Rng rng(73);
  Image img = random_image(40, 40, rng);

  AttackConfig cfg = toy_config();
  cfg.steps = 30;
  cfg.crop_range = {1.0, 1.0};

  cfg.optimizer = Optimizer::MiFgsm;
  auto mi = run_attack(img, {"dog", "cat"}, {h}, cfg);
  CHECK(mi.trace.loss.back() > mi.trace.loss.front());
  CHECK(mi.trace.final_linf <= cfg.epsilon);

  cfg.optimizer = Optimizer::Adam;
  auto ad = run_attack(img, {"dog", "cat"}, {h}, cfg);
  CHECK(ad.trace.loss.back() > ad.trace.loss.front());
  CHECK(ad.trace.final_linf <= cfg.epsilon);
}

TEST_CASE("run_attack input validation") {
  auto h = toy_handle();
  Rng rng(43);
  Image img = random_image(32, 32, rng);
  AttackConfig cfg = toy_config();

  CHECK_THROWS_AS((void)run_attack(img, {"dog", "dog"}, {h}, cfg), InputError);
  CHECK_THROWS_AS((void)run_attack(img, {"", "cat"}, {h}, cfg), InputError);

  cfg.epsilon = 1.5;
  CHECK_THROWS_AS((void)run_attack(img, {"dog", "cat"}, {h}, cfg), ConfigError);
  cfg = toy_config();
  cfg.alpha = cfg.epsilon * 2;
  CHECK_THROWS_AS((void)run_attack(img, {"dog", "cat"}, {h}, cfg), ConfigError);
  cfg = toy_config();
  cfg.crop_range = {0.0, 1.0};
  CHECK_THROWS_AS((void)run_attack(img, {"dog", "cat"}, {h}, cfg), ConfigError);
}

TEST_CASE("apply_text_template") {
  CHECK(apply_text_template("", "dog") == "dog");
  CHECK(apply_text_template("a photo of a {}", "dog") == "a photo of a dog");
  CHECK_THROWS_AS((void)apply_text_template("no slot", "dog"), TemplateError);
}

TEST_CASE("trace serializes to JSON") {
  auto h = toy_handle();
  Rng rng(45);
  Image img = random_image(40, 40, rng);
  AttackConfig cfg = toy_config();
  cfg.steps = 2;
  auto result = run_attack(img, {"dog", "cat"}, {h}, cfg);
  std::string js = trace_to_json(result.trace);
  CHECK(js.find("\"loss\"") != std::string::npos);
  CHECK(js.find("\"mask_sizes\"") != std::string::npos);
  CHECK(js.find("\"final_norms\"") != std::string::npos);
}
