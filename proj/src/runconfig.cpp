#include "vfa/runconfig.hpp"

#include <filesystem>

namespace vfa {

using json = nlohmann::json;

namespace {

json defense_to_json(const DefenseSpec& d) {
  json j{{"kind", d.name()}};
  switch (d.kind) {
    case DefenseKind::GaussianBlur:
      j["kernel"] = d.kernel;
      j["sigma"] = d.sigma;
      break;
    case DefenseKind::Jpeg:
      j["quality"] = d.quality;
      break;
    case DefenseKind::Dropout:
      j["drop_prob"] = d.drop_prob;
      j["seed"] = d.seed;
      break;
    case DefenseKind::None:
      break;
  }
  return j;
}

DefenseSpec defense_from_json(const json& j) {
  DefenseSpec d = defense_from_name(j.at("kind"));
  if (j.contains("kernel")) d.kernel = j["kernel"];
  if (j.contains("sigma")) d.sigma = j["sigma"];
  if (j.contains("quality")) d.quality = j["quality"];
  if (j.contains("drop_prob")) d.drop_prob = j["drop_prob"];
  if (j.contains("seed")) d.seed = j["seed"];
  d.validate();
  return d;
}

json endpoint_to_json(const EndpointConfig& e) {
  return json{{"name", e.name},
              {"base_url", e.base_url},
              {"model", e.model},
              {"credential_env", e.credential_env},
              {"timeout_s", e.timeout_s},
              {"max_retries", e.max_retries},
              {"backoff_s", e.backoff_s}};
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig e;
  e.name = j.at("name");
  e.base_url = j.at("base_url");
  e.model = j.value("model", "");
  e.credential_env = j.value("credential_env", "");
  e.timeout_s = j.value("timeout_s", 60);
  e.max_retries = j.value("max_retries", 3);
  e.backoff_s = j.value("backoff_s", 0.5);
  return e;
}

}  // namespace

json config_to_json(const RunConfig& cfg) {
  json a{{"epsilon", cfg.attack.epsilon},
         {"steps", cfg.attack.steps},
         {"alpha", cfg.attack.alpha},
         {"optimizer", to_string(cfg.attack.optimizer)},
         {"mu", cfg.attack.mu},
         {"beta1", cfg.attack.beta1},
         {"beta2", cfg.attack.beta2},
         {"eta", cfg.attack.eta},
         {"crop_range", cfg.attack.crop_range},
         {"feature_source", to_string(cfg.attack.feature_source)},
         {"seed", cfg.attack.seed},
         {"freeze_mask", cfg.attack.freeze_mask},
         {"pre_projection_norm", cfg.attack.pre_projection_norm},
         {"text_template", cfg.attack.text_template},
         {"normalize_per_model", cfg.attack.normalize_per_model},
         {"enhance_scale", cfg.attack.enhance_scale}};

  json defenses = json::array();
  for (const auto& d : cfg.evaluate.defenses) defenses.push_back(defense_to_json(d));
  json endpoints = json::array();
  for (const auto& e : cfg.evaluate.endpoints) endpoints.push_back(endpoint_to_json(e));

  return json{{"registry", cfg.registry},
              {"dataset", cfg.dataset},
              {"output_dir", cfg.output_dir},
              {"bit_depth", cfg.bit_depth},
              {"attack", a},
              {"analysis",
               {{"image", cfg.analysis.image},
                {"surrogate_id", cfg.analysis.surrogate_id},
                {"concepts", cfg.analysis.concepts},
                {"emit_plots", cfg.analysis.emit_plots}}},
              {"evaluate",
               {{"endpoints", endpoints},
                {"judge", cfg.evaluate.judge},
                {"defenses", defenses},
                {"tasks", cfg.evaluate.tasks},
                {"offline_responses", cfg.evaluate.offline_responses}}}};
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  cfg.registry = j.at("registry");
  cfg.dataset = j.at("dataset");
  cfg.output_dir = j.at("output_dir");
  cfg.bit_depth = j.value("bit_depth", 8);
  if (cfg.bit_depth != 8 && cfg.bit_depth != 16) throw ConfigError("bit_depth must be 8 or 16");

  if (j.contains("attack")) {
    const auto& a = j["attack"];
    auto& atk = cfg.attack;
    if (a.contains("epsilon")) atk.epsilon = a["epsilon"];
    if (a.contains("steps")) atk.steps = a["steps"];
    if (a.contains("alpha")) atk.alpha = a["alpha"];
    if (a.contains("optimizer")) atk.optimizer = optimizer_from_string(a["optimizer"]);
    if (a.contains("mu")) atk.mu = a["mu"];
    if (a.contains("beta1")) atk.beta1 = a["beta1"];
    if (a.contains("beta2")) atk.beta2 = a["beta2"];
    if (a.contains("eta")) atk.eta = a["eta"];
    if (a.contains("crop_range")) {
      atk.crop_range[0] = a["crop_range"][0];
      atk.crop_range[1] = a["crop_range"][1];
    }
    if (a.contains("feature_source")) atk.feature_source = feature_source_from_string(a["feature_source"]);
    if (a.contains("seed")) atk.seed = a["seed"];
    if (a.contains("freeze_mask")) atk.freeze_mask = a["freeze_mask"];
    if (a.contains("pre_projection_norm")) atk.pre_projection_norm = a["pre_projection_norm"];
    if (a.contains("text_template")) atk.text_template = a["text_template"];
    if (a.contains("normalize_per_model")) atk.normalize_per_model = a["normalize_per_model"];
    if (a.contains("enhance_scale")) atk.enhance_scale = a["enhance_scale"];
    atk.validate();
  }

  if (j.contains("analysis")) {
    const auto& an = j["analysis"];
    cfg.analysis.image = an.value("image", "");
    cfg.analysis.surrogate_id = an.value("surrogate_id", "");
    if (an.contains("concepts")) cfg.analysis.concepts = an["concepts"].get<std::vector<std::string>>();
    cfg.analysis.emit_plots = an.value("emit_plots", true);
  }

  if (j.contains("evaluate")) {
    const auto& ev = j["evaluate"];
    for (const auto& e : ev.value("endpoints", json::array()))
      cfg.evaluate.endpoints.push_back(endpoint_from_json(e));
    cfg.evaluate.judge = ev.value("judge", "rubric");
    for (const auto& d : ev.value("defenses", json::array()))
      cfg.evaluate.defenses.push_back(defense_from_json(d));
    if (ev.contains("tasks")) cfg.evaluate.tasks = ev["tasks"].get<std::vector<std::string>>();
    cfg.evaluate.offline_responses = ev.value("offline_responses", "");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  namespace fs = std::filesystem;
  auto bytes = read_file(path);
  json j = json::parse(bytes.begin(), bytes.end());
  RunConfig cfg = config_from_json(j);

  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && !fs::path(p).is_absolute()) p = (base / p).string();
  };
  resolve(cfg.registry);
  resolve(cfg.dataset);
  resolve(cfg.output_dir);
  resolve(cfg.analysis.image);
  resolve(cfg.evaluate.offline_responses);

  if (cfg.registry.empty() || !fs::exists(cfg.registry))
    throw ConfigError("config: registry not found: " + cfg.registry);
  if (!cfg.dataset.empty() && !fs::exists(cfg.dataset))
    throw ConfigError("config: dataset not found: " + cfg.dataset);
  if (!cfg.analysis.image.empty() && !fs::exists(cfg.analysis.image))
    throw ConfigError("config: analysis image not found: " + cfg.analysis.image);
  if (!cfg.evaluate.offline_responses.empty() && !fs::exists(cfg.evaluate.offline_responses))
    throw ConfigError("config: offline responses not found: " + cfg.evaluate.offline_responses);
  if (cfg.output_dir.empty()) throw ConfigError("config: output_dir is required");
  return cfg;
}

}  // namespace vfa
