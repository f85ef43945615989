#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vfa/vit.hpp"

namespace vfa {

struct CliOptions {
  std::string config_path;
  int jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  bool force = false;
  bool offline = false;
  bool dump_masks = false;
  std::string defense_override;  // --defense NAME restricts evaluation to one defense
};

int cmd_attack(const CliOptions& opt);
int cmd_analyze(const CliOptions& opt);
int cmd_evaluate(const CliOptions& opt);

int cmd_gen_surrogate(const std::string& out_path, const ToyParams& params, std::uint64_t seed);
int cmd_init_demo(const std::string& out_dir, std::uint64_t seed);
int cmd_render_prompt(const std::string& kind, const std::string& object_name,
                      const std::string& image_ref, const std::string& response,
                      const std::string& original_kw, const std::string& target_kw);

}  // namespace vfa
