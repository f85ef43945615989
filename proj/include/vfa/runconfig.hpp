#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfa/attack.hpp"
#include "vfa/evalkit.hpp"

namespace vfa {

struct AnalysisConfig {
  std::string image;                  // probe image path
  std::string surrogate_id;           // registry entry; empty = first
  std::vector<std::string> concepts;  // text prompts for alignment maps
  bool emit_plots = true;
};

struct EvaluateConfig {
  std::vector<EndpointConfig> endpoints;
  std::string judge = "rubric";        // "rubric" or an endpoint name
  std::vector<DefenseSpec> defenses;   // empty means {none}
  std::vector<std::string> tasks{"cap", "vqa"};
  std::string offline_responses;       // canned replies JSONL (offline mode)
};

struct RunConfig {
  std::string registry;
  std::string dataset;
  std::string output_dir;
  int bit_depth = 8;  // adversarial PNG depth; 16 avoids quantizing small deltas
  AttackConfig attack;
  AnalysisConfig analysis;
  EvaluateConfig evaluate;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Parses, resolves paths relative to the config file, and checks that every
// referenced input exists.
RunConfig load_config(const std::string& path);

}  // namespace vfa
