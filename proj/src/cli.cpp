#include "vfa/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "vfa/analysis.hpp"
#include "vfa/attack.hpp"
#include "vfa/evalkit.hpp"
#include "vfa/manifest.hpp"
#include "vfa/plots.hpp"
#include "vfa/runconfig.hpp"

namespace vfa {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::mutex g_log_mutex;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cout << line << "\n";
}

std::vector<SurrogateHandle> load_all_surrogates(const std::string& registry_path) {
  std::vector<SurrogateHandle> handles;
  for (const auto& spec : load_registry(registry_path)) handles.push_back(load_surrogate(spec));
  return handles;
}

std::uint64_t record_seed(std::uint64_t base, const std::string& image_id) {
  return base ^ fnv1a64(image_id);
}

void write_manifest(const RunConfig& cfg, const std::string& config_path,
                    const std::vector<DatasetRecord>& records) {
  json m;
  m["tool"] = "vfa";
  m["config"] = config_to_json(cfg);
  m["config_sha256"] = sha256_hex(config_to_json(cfg).dump());
  m["config_path"] = config_path;
  m["resampling"] = "bilinear";
  m["bit_depth"] = cfg.bit_depth;
  json weights = json::object();
  for (const auto& spec : load_registry(cfg.registry)) weights[spec.model_id] = sha256_file(spec.weights_uri);
  m["weight_sha256"] = weights;
  m["dataset_sha256"] = sha256_file(cfg.dataset);
  json seeds = json::object();
  for (const auto& r : records) seeds[r.image_id] = record_seed(cfg.attack.seed, r.image_id);
  m["record_seeds"] = seeds;
  write_file_atomic((fs::path(cfg.output_dir) / "manifest.json").string(), m.dump(2));
}

}  // namespace

int cmd_attack(const CliOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  if (opt.seed) cfg.attack.seed = *opt.seed;
  cfg.attack.validate();
  if (cfg.dataset.empty()) throw ConfigError("attack: config has no dataset");

  auto handles = load_all_surrogates(cfg.registry);
  auto records = load_dataset(cfg.dataset);
  fs::create_directories(fs::path(cfg.output_dir) / "adv");
  fs::create_directories(fs::path(cfg.output_dir) / "trace");
  if (opt.dump_masks) fs::create_directories(fs::path(cfg.output_dir) / "masks");
  write_manifest(cfg, opt.config_path, records);

  std::atomic<size_t> next{0};
  std::atomic<int> failures{0};
  std::atomic<int> skipped{0};
  std::atomic<int> done{0};

  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      const auto& rec = records[i];
      std::string adv_path = (fs::path(cfg.output_dir) / "adv" / (rec.image_id + ".png")).string();
      std::string trace_path = (fs::path(cfg.output_dir) / "trace" / (rec.image_id + ".json")).string();
      if (!opt.force && fs::exists(adv_path) && fs::exists(trace_path)) {
        skipped.fetch_add(1);
        log_line("skip " + rec.image_id + " (already complete)");
        continue;
      }
      try {
        Image original = load_image(rec.image_path);
        ConceptPair pair{rec.source_concept, rec.target_concept};
        AttackConfig acfg = cfg.attack;
        acfg.seed = record_seed(cfg.attack.seed, rec.image_id);
        AttackResult result = run_attack(original, pair, handles, acfg);
        save_png(adv_path, result.adversarial, cfg.bit_depth);
        write_file_atomic(trace_path, trace_to_json(result.trace));
        if (opt.dump_masks) {
          json masks;
          json clean = json::array(), final_ = json::array();
          for (const auto& per_model : result.clean_masks)
            clean.push_back(json::parse(masks_to_json(per_model)));
          for (const auto& per_model : result.final_masks)
            final_.push_back(json::parse(masks_to_json(per_model)));
          masks["clean"] = clean;
          masks["final"] = final_;
          write_file_atomic((fs::path(cfg.output_dir) / "masks" / (rec.image_id + ".json")).string(),
                            masks.dump(2));
        }
        int d = done.fetch_add(1) + 1;
        std::ostringstream line;
        line << "attacked " << rec.image_id << " loss " << result.trace.loss.back() << " linf "
             << result.trace.final_linf << " (" << d << "/" << records.size() << ")";
        log_line(line.str());
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        log_line("FAILED " + rec.image_id + ": " + e.what());
      }
    }
  };

  int jobs = std::max(1, opt.jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  log_line("attack complete: " + std::to_string(done.load()) + " done, " +
           std::to_string(skipped.load()) + " skipped, " + std::to_string(failures.load()) + " failed");
  return failures.load() == 0 ? 0 : 1;
}

int cmd_analyze(const CliOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  if (cfg.analysis.image.empty()) throw ConfigError("analyze: config has no analysis.image");

  auto specs = load_registry(cfg.registry);
  SurrogateHandle handle;
  for (const auto& s : specs)
    if (cfg.analysis.surrogate_id.empty() || s.model_id == cfg.analysis.surrogate_id) {
      handle = load_surrogate(s);
      break;
    }
  if (!handle) throw ConfigError("analyze: surrogate not found: " + cfg.analysis.surrogate_id);

  Image probe = preprocess(read_file(cfg.analysis.image), handle);
  AnalysisReport report =
      analyze_image(handle, probe, cfg.analysis.concepts, cfg.attack.pre_projection_norm);

  fs::path dir = fs::path(cfg.output_dir) / "analysis";
  fs::create_directories(dir);
  std::string report_path = (dir / "report.json").string();
  write_file_atomic(report_path, report_to_json(report));

  if (cfg.analysis.emit_plots) {
    // plots render from the persisted JSON, not from in-memory state
    auto bytes = read_file(report_path);
    AnalysisReport persisted = report_from_json(std::string(bytes.begin(), bytes.end()));

    std::vector<CurveSeries> curves{{"X", persisted.entropy_x}, {"V", persisted.entropy_v}};
    render_curves_png((dir / "entropy_layers.png").string(), curves, 0.0, 1.0);
    render_bars_png((dir / "channel_profile_x.png").string(), persisted.profile.x_profile);
    render_bars_png((dir / "channel_profile_v.png").string(), persisted.profile.v_profile);
    render_bars_png((dir / "channel_profile_cls.png").string(), persisted.profile.cls_profile);

    auto [rows, cols] = persisted.grid_shape;
    Mat norm_grid(rows, cols);
    for (int t = 0; t < rows * cols; ++t)
      norm_grid(t / cols, t % cols) = persisted.token_norms(t);
    render_heatmap_png((dir / "token_norms.png").string(), norm_grid);

    for (const auto& [concept_text, m] : persisted.maps_x)
      render_heatmap_png((dir / ("align_x_" + concept_text + ".png")).string(), m.grid, 24, m.peak);
    for (const auto& [concept_text, m] : persisted.maps_v)
      render_heatmap_png((dir / ("align_v_" + concept_text + ".png")).string(), m.grid, 24, m.peak);
  }

  for (const auto& [concept_text, m] : report.maps_v) {
    double xpeak = report.maps_x.at(concept_text).peak;
    std::ostringstream line;
    line << "concept '" << concept_text << "': V peak " << m.peak << " vs X peak " << xpeak;
    log_line(line.str());
  }
  log_line("analysis written to " + dir.string());
  return 0;
}

namespace {

struct VerdictRow {
  std::string image_id;
  std::string endpoint;
  std::string defense;
  Task task = Task::Cap;
  int question_index = 0;
  JudgeVerdict verdict;
  bool response_error = false;
};

}  // namespace

int cmd_evaluate(const CliOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  auto records = load_dataset(cfg.dataset);

  std::vector<DefenseSpec> defenses = cfg.evaluate.defenses;
  if (!opt.defense_override.empty()) defenses = {defense_from_name(opt.defense_override)};
  if (defenses.empty()) defenses = {DefenseSpec{}};

  // collectors: offline replays canned responses and scores with the rubric
  std::vector<std::unique_ptr<ResponseCollector>> collectors;
  std::unique_ptr<Judge> judge;
  if (opt.offline) {
    if (cfg.evaluate.offline_responses.empty())
      throw ConfigError("evaluate --offline: config has no evaluate.offline_responses");
    collectors.push_back(make_canned_collector(cfg.evaluate.offline_responses));
    judge = make_rubric_judge();
  } else {
    if (cfg.evaluate.endpoints.empty()) throw ConfigError("evaluate: no endpoints configured");
    for (const auto& e : cfg.evaluate.endpoints) collectors.push_back(make_http_collector(e));
    if (cfg.evaluate.judge == "rubric") {
      judge = make_rubric_judge();
    } else {
      const EndpointConfig* je = nullptr;
      for (const auto& e : cfg.evaluate.endpoints)
        if (e.name == cfg.evaluate.judge) je = &e;
      if (!je) throw ConfigError("evaluate: judge endpoint not found: " + cfg.evaluate.judge);
      judge = make_http_judge(*je);
    }
  }

  fs::path dir = fs::path(cfg.output_dir) / "eval";
  fs::create_directories(dir);

  // imperceptibility from the stored adversarial rasters
  json impercept = json::object();
  double sum_l1 = 0.0, sum_l2 = 0.0;
  int impercept_n = 0;
  for (const auto& rec : records) {
    std::string adv_path = (fs::path(cfg.output_dir) / "adv" / (rec.image_id + ".png")).string();
    if (!fs::exists(adv_path)) continue;
    Image adv = load_image(adv_path);
    Image orig = load_image(rec.image_path);
    Imperceptibility im = imperceptibility(adv, orig);
    impercept[rec.image_id] = {{"l1", im.l1}, {"l2", im.l2}};
    sum_l1 += im.l1;
    sum_l2 += im.l2;
    impercept_n += 1;
  }

  std::vector<Task> tasks;
  for (const auto& t : cfg.evaluate.tasks) {
    if (t == "cap")
      tasks.push_back(Task::Cap);
    else if (t == "vqa")
      tasks.push_back(Task::Vqa);
    else
      throw ConfigError("evaluate: unknown task " + t);
  }

  // append-only record streams keyed by (image_id, task, question_index);
  // raw replies are flushed to disk before judging starts on each batch
  std::ofstream responses_out((dir / "responses.jsonl").string(), std::ios::trunc);
  std::ofstream verdicts_out((dir / "verdicts.jsonl").string(), std::ios::trunc);
  if (!responses_out || !verdicts_out) throw IoError("cannot open evaluation record files");

  std::vector<VerdictRow> rows;
  std::set<std::string> missing_records;
  std::set<std::string> errored_records;

  for (const auto& rec : records) {
    std::string adv_path = (fs::path(cfg.output_dir) / "adv" / (rec.image_id + ".png")).string();
    if (!fs::exists(adv_path)) {
      missing_records.insert(rec.image_id);
      log_line("missing adversarial image for " + rec.image_id + "; excluded from evaluation");
    }
  }

  for (auto& collector : collectors) {
    for (const auto& defense : defenses) {
      std::vector<EvalItem> items;
      for (const auto& rec : records) {
        if (missing_records.count(rec.image_id)) continue;
        std::string adv_path = (fs::path(cfg.output_dir) / "adv" / (rec.image_id + ".png")).string();
        items.push_back({rec, apply_defense(load_image(adv_path), defense)});
      }

      for (Task task : tasks) {
        auto responses = collect_responses(items, *collector, task);
        for (const auto& r : responses) {
          json line{{"image_id", r.image_id},       {"endpoint", collector->id()},
                    {"defense", defense.name()},    {"task", to_string(r.task)},
                    {"question_index", r.question_index}, {"prompt", r.prompt},
                    {"response", r.text},           {"error", r.error},
                    {"error_message", r.error_message}};
          responses_out << line.dump() << "\n";
        }
        responses_out.flush();

        std::map<std::string, const DatasetRecord*> by_id;
        for (const auto& item : items) by_id[item.record.image_id] = &item.record;
        for (const auto& r : responses) {
          VerdictRow row;
          row.image_id = r.image_id;
          row.endpoint = collector->id();
          row.defense = defense.name();
          row.task = task;
          row.question_index = r.question_index;
          row.response_error = r.error;
          if (!r.error) {
            const DatasetRecord* rec = by_id.at(r.image_id);
            row.verdict = judge->judge(r.text, rec->source_concept, rec->target_concept, task);
          } else {
            errored_records.insert(r.image_id);
          }
          json line{{"image_id", row.image_id},
                    {"endpoint", row.endpoint},
                    {"defense", row.defense},
                    {"task", to_string(row.task)},
                    {"question_index", row.question_index},
                    {"response_error", row.response_error},
                    {"score", row.verdict.score},
                    {"valid", row.verdict.valid},
                    {"judge_id", row.verdict.judge_id},
                    {"judge_raw", row.verdict.raw_response}};
          verdicts_out << line.dump() << "\n";
          rows.push_back(std::move(row));
        }
        verdicts_out.flush();
      }
    }
  }

  int record_failures = int(missing_records.size() + errored_records.size());

  // aggregate ASR per (endpoint, task, defense)
  json asr_table = json::array();
  for (auto& collector : collectors) {
    for (const auto& defense : defenses) {
      for (Task task : tasks) {
        std::vector<double> flat_scores;
        std::map<std::string, std::vector<double>> per_record;
        int invalid = 0, errored = 0;
        for (const auto& row : rows) {
          if (row.endpoint != collector->id() || row.defense != defense.name() || row.task != task)
            continue;
          if (row.response_error) {
            errored += 1;
            continue;
          }
          if (!row.verdict.valid) {
            invalid += 1;
            continue;
          }
          flat_scores.push_back(row.verdict.score);
          per_record[row.image_id].push_back(row.verdict.score);
        }
        json entry{{"endpoint", collector->id()},
                   {"task", to_string(task)},
                   {"defense", defense.name()},
                   {"scored", flat_scores.size()},
                   {"errored", errored},
                   {"invalid_judge", invalid}};
        if (!flat_scores.empty()) {
          entry["asr_per_question"] = compute_asr(flat_scores);
          std::vector<double> record_means;
          for (const auto& [id, scores] : per_record) record_means.push_back(compute_asr(scores));
          entry["asr"] = compute_asr(record_means);  // per-record mean first
        } else {
          entry["asr"] = nullptr;
          entry["asr_per_question"] = nullptr;
        }
        asr_table.push_back(std::move(entry));
      }
    }
  }

  json report;
  report["asr"] = asr_table;
  report["imperceptibility"] = {{"per_image", impercept},
                                {"mean_l1", impercept_n ? sum_l1 / impercept_n : 0.0},
                                {"mean_l2", impercept_n ? sum_l2 / impercept_n : 0.0},
                                {"images", impercept_n}};
  report["coverage"] = {{"records", records.size()}, {"record_failures", record_failures}};
  write_file_atomic((dir / "report.json").string(), report.dump(2));

  log_line("evaluation report written to " + (dir / "report.json").string());
  return record_failures == 0 ? 0 : 1;
}

int cmd_gen_surrogate(const std::string& out_path, const ToyParams& params, std::uint64_t seed) {
  DualEncoderWeights w = make_toy_encoder(params, seed);
  save_weights(out_path, w);
  log_line("wrote " + out_path);
  return 0;
}

namespace {

// deterministic synthetic photo: gradient background + colored disk + stripes
Image synth_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  Image img(size, size, 3);
  double base_r = rng.uniform(0.2, 0.8), base_g = rng.uniform(0.2, 0.8), base_b = rng.uniform(0.2, 0.8);
  double cx = rng.uniform(0.3, 0.7) * size, cy = rng.uniform(0.3, 0.7) * size;
  double radius = rng.uniform(0.15, 0.3) * size;
  double disk_r = rng.uniform(0.0, 1.0), disk_g = rng.uniform(0.0, 1.0), disk_b = rng.uniform(0.0, 1.0);
  int stripe = 3 + int(rng.uniform_int(0, 4));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double gy = double(y) / size, gx = double(x) / size;
      double r = base_r * (0.5 + 0.5 * gy), g = base_g * (0.5 + 0.5 * gx), b = base_b;
      if ((x / stripe) % 2 == 0) b = std::min(1.0, b + 0.15);
      double d = std::hypot(x - cx, y - cy);
      if (d < radius) {
        r = disk_r;
        g = disk_g;
        b = disk_b;
      }
      img.at(y, x, 0) = std::clamp(r, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(g, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(b, 0.0, 1.0);
    }
  return img;
}

}  // namespace

int cmd_init_demo(const std::string& out_dir, std::uint64_t seed) {
  fs::create_directories(fs::path(out_dir) / "weights");
  fs::create_directories(fs::path(out_dir) / "images");

  ToyParams pa;  // defaults: 32px, patch 8, width 32
  ToyParams pb;
  pb.width = 48;
  pb.heads = 3;
  pb.mlp_hidden = 96;
  save_weights((fs::path(out_dir) / "weights" / "toy-a.vfw").string(), make_toy_encoder(pa, seed));
  save_weights((fs::path(out_dir) / "weights" / "toy-b.vfw").string(), make_toy_encoder(pb, seed + 1));

  json registry{{"surrogates",
                 json::array({json{{"model_id", "toy-a"},
                                   {"input_resolution", pa.resolution},
                                   {"patch_size", pa.patch},
                                   {"num_heads", pa.heads},
                                   {"layer_set", json::array({pa.depth})},
                                   {"weights_uri", "weights/toy-a.vfw"}},
                              json{{"model_id", "toy-b"},
                                   {"input_resolution", pb.resolution},
                                   {"patch_size", pb.patch},
                                   {"num_heads", pb.heads},
                                   {"layer_set", json::array({pb.depth})},
                                   {"weights_uri", "weights/toy-b.vfw"}}})}};
  write_file_atomic((fs::path(out_dir) / "registry.json").string(), registry.dump(2));

  struct DemoRecord {
    const char* id;
    const char* src;
    const char* tgt;
  };
  const DemoRecord demo[] = {{"img-0", "dog", "cat"}, {"img-1", "banana", "apple"}, {"img-2", "taxi", "tuk-tuk"}};

  std::ostringstream dataset;
  std::ostringstream canned;
  int idx = 0;
  for (const auto& d : demo) {
    std::string img_rel = "images/" + std::string(d.id) + ".png";
    save_png((fs::path(out_dir) / img_rel).string(), synth_image(48, seed + 10 + std::uint64_t(idx)), 8);
    json rec{{"image_id", d.id},
             {"image_path", img_rel},
             {"source_concept", d.src},
             {"target_concept", d.tgt},
             {"vqa_questions",
              json::array({"What is resting near the center of the scene?",
                           "What activity does the main subject appear engaged in?",
                           "What type of thing is most prominent in the picture?"})}};
    dataset << rec.dump() << "\n";

    // canned replies covering all three rubric branches
    canned << json{{"image_id", d.id}, {"task", "cap"}, {"question_index", 0},
                   {"response", std::string("a ") + d.tgt + " in a colorful scene"}}
                  .dump()
           << "\n";
    canned << json{{"image_id", d.id}, {"task", "vqa"}, {"question_index", 0},
                   {"response", std::string("a ") + d.tgt}}
                  .dump()
           << "\n";
    canned << json{{"image_id", d.id}, {"task", "vqa"}, {"question_index", 1},
                   {"response", std::string("a ") + d.src}}
                  .dump()
           << "\n";
    canned << json{{"image_id", d.id}, {"task", "vqa"}, {"question_index", 2},
                   {"response", "something indistinct"}}
                  .dump()
           << "\n";
    ++idx;
  }
  write_file_atomic((fs::path(out_dir) / "dataset.jsonl").string(), dataset.str());
  write_file_atomic((fs::path(out_dir) / "canned_responses.jsonl").string(), canned.str());

  RunConfig cfg;
  cfg.registry = "registry.json";
  cfg.dataset = "dataset.jsonl";
  cfg.output_dir = "out";
  cfg.bit_depth = 16;
  cfg.attack.steps = 40;
  cfg.attack.seed = seed;
  cfg.analysis.image = "images/img-0.png";
  cfg.analysis.surrogate_id = "toy-a";
  cfg.analysis.concepts = {"dog", "cat"};
  cfg.evaluate.offline_responses = "canned_responses.jsonl";
  cfg.evaluate.defenses = {DefenseSpec{},
                           DefenseSpec{DefenseKind::GaussianBlur},
                           DefenseSpec{DefenseKind::Jpeg},
                           DefenseSpec{DefenseKind::Dropout}};
  write_file_atomic((fs::path(out_dir) / "config.json").string(), config_to_json(cfg).dump(2));

  log_line("demo workspace ready under " + out_dir);
  log_line("next: vfa attack --config " + (fs::path(out_dir) / "config.json").string());
  return 0;
}

int cmd_render_prompt(const std::string& kind, const std::string& object_name,
                      const std::string& image_ref, const std::string& response,
                      const std::string& original_kw, const std::string& target_kw) {
  if (kind == "judge") {
    std::cout << render_judge_prompt(response, original_kw, target_kw) << "\n";
    return 0;
  }
  PromptKind pk;
  if (kind == "primary-object")
    pk = PromptKind::PrimaryObject;
  else if (kind == "similar-object")
    pk = PromptKind::SimilarObject;
  else if (kind == "vqa-gen")
    pk = PromptKind::VqaGen;
  else
    throw ConfigError("unknown prompt kind: " + kind);
  std::cout << render_dataset_prompt(pk, PromptContext{object_name, image_ref}) << "\n";
  return 0;
}

}  // namespace vfa
