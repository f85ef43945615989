#include <CLI11.hpp>
#include <iostream>

#include "vfa/cli.hpp"
#include "vfa/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vfa - targeted local semantic adversarial attacks on vision-language encoders"};
  app.require_subcommand(1);

  vfa::CliOptions opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "run configuration JSON")->required();
    cmd->add_option("--jobs", opt.jobs, "parallel workers across records");
    cmd->add_option("--seed", opt.seed, "override the configured seed");
  };

  auto* attack = app.add_subcommand("attack", "craft adversarial images for every dataset record");
  add_common(attack);
  attack->add_flag("--force", opt.force, "recompute records that already have outputs");
  attack->add_flag("--dump-masks", opt.dump_masks, "write per-record alignment masks as JSON");

  auto* analyze = app.add_subcommand("analyze", "feature diagnostics: entropy, profiles, alignment maps");
  add_common(analyze);

  auto* evaluate = app.add_subcommand("evaluate", "collect model responses, judge, and aggregate ASR");
  add_common(evaluate);
  evaluate->add_flag("--offline", opt.offline, "use canned responses and the local rubric judge");
  evaluate->add_option("--defense", opt.defense_override,
                       "evaluate a single defense (none|gaussian_blur|jpeg|dropout)");

  std::string out_path, demo_dir = "demo", prompt_kind, object_name, image_ref, response_text,
                        original_kw, target_kw;
  std::uint64_t gen_seed = 0;
  vfa::ToyParams toy;

  auto* gen = app.add_subcommand("gen-surrogate", "write a random-weight dual-encoder weights file");
  gen->add_option("--out", out_path, "output weights path")->required();
  gen->add_option("--seed", gen_seed, "weight init seed");
  gen->add_option("--resolution", toy.resolution);
  gen->add_option("--patch", toy.patch);
  gen->add_option("--width", toy.width);
  gen->add_option("--heads", toy.heads);
  gen->add_option("--depth", toy.depth);
  gen->add_option("--mlp-hidden", toy.mlp_hidden);
  gen->add_option("--joint-dim", toy.joint_dim);

  auto* demo = app.add_subcommand("init-demo", "create a ready-to-run demo workspace");
  demo->add_option("--out", demo_dir, "demo directory");
  demo->add_option("--seed", gen_seed, "seed for weights and images");

  auto* prompt = app.add_subcommand("render-prompt", "print a dataset-construction or judge prompt");
  prompt->add_option("--kind", prompt_kind, "primary-object|similar-object|vqa-gen|judge")->required();
  prompt->add_option("--object", object_name, "object name slot");
  prompt->add_option("--image-ref", image_ref, "image reference (primary-object)");
  prompt->add_option("--response", response_text, "response to score (judge)");
  prompt->add_option("--original", original_kw, "original keyword (judge)");
  prompt->add_option("--target", target_kw, "target keyword (judge)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (attack->parsed()) return vfa::cmd_attack(opt);
    if (analyze->parsed()) return vfa::cmd_analyze(opt);
    if (evaluate->parsed()) return vfa::cmd_evaluate(opt);
    if (gen->parsed()) return vfa::cmd_gen_surrogate(out_path, toy, gen_seed);
    if (demo->parsed()) return vfa::cmd_init_demo(demo_dir, gen_seed);
    if (prompt->parsed())
      return vfa::cmd_render_prompt(prompt_kind, object_name, image_ref, response_text, original_kw,
                                    target_kw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
