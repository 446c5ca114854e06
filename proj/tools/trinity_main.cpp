// Batch CLI for the joint CS/CA segmentation stack: dataset generation,
// training, evaluation, inference and overlay rendering.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trinity/checkpoint.hpp"
#include "trinity/config.hpp"
#include "trinity/datagen.hpp"
#include "trinity/dataset_io.hpp"
#include "trinity/error.hpp"
#include "trinity/io_util.hpp"
#include "trinity/metrics.hpp"
#include "trinity/model.hpp"
#include "trinity/parallel.hpp"
#include "trinity/training.hpp"
#include "trinity/visualize.hpp"

namespace fs = std::filesystem;
using namespace trinity;

namespace {

// --config file merged with `--set key=value` overrides.
KeyValues load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  KeyValues kv = config_path.empty() ? KeyValues() : KeyValues::parse_file(config_path);
  for (const auto& item : overrides) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got \"" + item + "\"");
    }
    kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  return kv;
}

void reject_unknown_keys(const KeyValues& kv) {
  const auto leftover = kv.unconsumed();
  if (leftover.empty()) return;
  std::string joined;
  for (const auto& k : leftover) joined += (joined.empty() ? "" : ", ") + k;
  throw ConfigError(kv.source() + ": unknown keys: " + joined);
}

// Consumes every section a full run config may carry so a shared file
// validates cleanly in any command.
void consume_all_sections(const KeyValues& kv) {
  GenConfig::from_config(kv);
  ModelConfig::from_config(kv, 1, 1);
  TrainConfig::from_config(kv);
}

void save_text(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

int cmd_generate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const uint64_t* seed_flag, size_t count, const std::string& out_dir) {
  KeyValues kv = load_run_config(config_path, overrides);
  if (seed_flag) kv.set_int("gen.seed", static_cast<int64_t>(*seed_flag));
  consume_all_sections(kv);
  reject_unknown_keys(kv);
  const GenConfig cfg = GenConfig::from_config(kv);
  const Manifest manifest = generate_dataset(cfg, count, out_dir, worker_count_from_env());
  std::cout << "wrote " << manifest.samples.size() << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::vector<std::string>& manifests, const uint64_t* seed_flag,
              const uint64_t* steps_flag, const std::string& out_path) {
  KeyValues kv = load_run_config(config_path, overrides);
  if (seed_flag) kv.set_int("train.seed", static_cast<int64_t>(*seed_flag));
  if (steps_flag) kv.set_int("train.steps", static_cast<int64_t>(*steps_flag));
  consume_all_sections(kv);
  reject_unknown_keys(kv);

  const Dataset dataset = load_dataset(manifests, "train");
  const ModelConfig model_cfg =
      ModelConfig::from_config(kv, dataset.taxonomy.num_cs(), dataset.taxonomy.ca_slot_count);
  const TrainConfig train_cfg = TrainConfig::from_config(kv);

  TrinityNet model(model_cfg);
  const auto hook = [&](size_t step, const TrinityNet& m) {
    save_checkpoint(out_path + ".step" + std::to_string(step), m.named_parameters());
  };
  const std::vector<TraceRow> trace = train(model, dataset, train_cfg, hook);

  // sidecars let eval/infer rebuild the exact model
  KeyValues sidecar;
  model_cfg.to_config(sidecar);
  train_cfg.to_config(sidecar);
  sidecar.save(out_path + ".config");
  dataset.taxonomy.save(out_path + ".taxonomy");
  save_text(out_path + ".loss.csv", trace_to_csv(trace));
  save_checkpoint(out_path, model.named_parameters());
  std::cout << "trained " << trace.size() << " steps on " << dataset.samples.size()
            << " samples; final loss " << (trace.empty() ? 0.0 : trace.back().total) << "\n";
  return 0;
}

TrinityNet load_model(const std::string& checkpoint_path, size_t expect_cs, size_t expect_slots) {
  const KeyValues kv = KeyValues::parse_file(checkpoint_path + ".config");
  const Taxonomy tax = Taxonomy::load(checkpoint_path + ".taxonomy");
  if (tax.num_cs() != expect_cs || tax.ca_slot_count != expect_slots) {
    throw ConfigError("checkpoint taxonomy (" + std::to_string(tax.num_cs()) + " CS, " +
                      std::to_string(tax.ca_slot_count) + " slots) does not match dataset (" +
                      std::to_string(expect_cs) + " CS, " + std::to_string(expect_slots) +
                      " slots)");
  }
  const ModelConfig cfg = ModelConfig::from_config(kv, tax.num_cs(), tax.ca_slot_count);
  TrinityNet model(cfg);
  model.load_parameters(load_checkpoint(checkpoint_path));
  return model;
}

TrinityNet load_model_standalone(const std::string& checkpoint_path) {
  const Taxonomy tax = Taxonomy::load(checkpoint_path + ".taxonomy");
  return load_model(checkpoint_path, tax.num_cs(), tax.ca_slot_count);
}

int cmd_eval(const std::string& checkpoint, const std::string& proposal_dir,
             const std::vector<std::string>& manifest_paths, const std::string& split,
             double threshold, const std::string& out_path) {
  if ((checkpoint.empty()) == (proposal_dir.empty())) {
    throw ConfigError("eval needs exactly one of --checkpoint or --proposal-dir");
  }
  if (threshold < 0.0 || threshold >= 1.0) {
    throw ConfigError("eval: --threshold must be in [0, 1)");
  }
  if (manifest_paths.empty()) throw ConfigError("eval: at least one --manifest required");

  struct Item {
    SampleRecord record;
    const Manifest* manifest;
  };
  std::vector<Manifest> manifests;
  manifests.reserve(manifest_paths.size());
  Taxonomy tax;
  bool have_tax = false;
  for (const auto& path : manifest_paths) {
    manifests.push_back(Manifest::load(path));
    const Taxonomy t = Taxonomy::load(manifests.back().resolve(manifests.back().taxonomy_path));
    if (!have_tax) {
      tax = t;
      have_tax = true;
    } else if (t.num_cs() != tax.num_cs() || t.ca_slot_count != tax.ca_slot_count) {
      throw ConfigError("eval: taxonomy mismatch between manifests (" + path + ")");
    }
  }
  std::vector<Item> items;
  for (const auto& m : manifests) {
    for (const auto& rec : m.split_samples(split)) items.push_back(Item{rec, &m});
  }
  if (items.empty()) {
    throw ConfigError("eval: no samples in split \"" + split + "\"");
  }

  std::vector<LabelMap> predictions(items.size());
  if (!checkpoint.empty()) {
    const TrinityNet model = load_model(checkpoint, tax.num_cs(), tax.ca_slot_count);
    parallel_for_indexed(items.size(), worker_count_from_env(), [&](size_t i) {
      const Image image = read_image(items[i].manifest->resolve(items[i].record.image_path));
      const ModelOutput out = model.forward(image);
      predictions[i] = prediction_from_logits(out.logits);
    });
  } else {
    parallel_for_indexed(items.size(), worker_count_from_env(), [&](size_t i) {
      const std::string path =
          (fs::path(proposal_dir) / (items[i].record.id + ".tlbl")).string();
      predictions[i] = read_labels(path);
    });
  }

  Evaluator evaluator(tax, threshold);
  for (size_t i = 0; i < items.size(); ++i) {
    const LabelMap gt = read_labels(items[i].manifest->resolve(items[i].record.labels_path));
    evaluator.add_image(predictions[i], gt, items[i].record.region_names);
  }
  const MetricsReport report = evaluator.report();
  save_text(out_path, report.to_json());
  std::cout << report.to_table();
  std::cout << "evaluated " << evaluator.images_seen() << " images (" << split << "); report at "
            << out_path << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path,
              const std::string& out_path) {
  const TrinityNet model = load_model_standalone(checkpoint);
  const Image image = read_image(image_path);
  const ModelOutput out = model.forward(image);
  write_labels(out_path, prediction_from_logits(out.logits));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_visualize(const std::string& image_path, const std::string& labels_path,
                  const std::string& taxonomy_path, uint64_t seed, const std::string& out_path) {
  const Image image = read_image(image_path);
  const LabelMap labels = read_labels(labels_path);
  const Taxonomy tax = Taxonomy::load(taxonomy_path);
  write_image(out_path, visualize_overlay(image, labels, tax, seed));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint class-specific / class-agnostic terrain segmentation"};
  app.require_subcommand(1);

  std::string config_path, out_path, proposal_dir, checkpoint, image_path, labels_path;
  std::string taxonomy_path, split = "test";
  std::vector<std::string> overrides, manifests;
  uint64_t seed_flag = 0, steps_flag = 0;
  size_t count = 100;
  double threshold = 0.0;
  uint64_t vis_seed = 0;

  CLI::App* generate = app.add_subcommand("generate", "render a synthetic dataset");
  generate->add_option("--config", config_path, "run config file");
  generate->add_option("--set", overrides, "override config keys (key=value)");
  generate->add_option("--seed", seed_flag, "dataset master seed");
  generate->add_option("-n,--count", count, "number of scenes")->required();
  generate->add_option("--out", out_path, "output directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on one or more manifests");
  train_cmd->add_option("--config", config_path, "run config file");
  train_cmd->add_option("--set", overrides, "override config keys (key=value)");
  train_cmd->add_option("--manifest", manifests, "dataset manifest (repeatable)")->required();
  train_cmd->add_option("--seed", seed_flag, "training seed");
  train_cmd->add_option("--steps", steps_flag, "training steps");
  train_cmd->add_option("--out", out_path, "checkpoint output path")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or proposal directory");
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval_cmd->add_option("--proposal-dir", proposal_dir, "directory of <id>.tlbl predictions");
  eval_cmd->add_option("--manifest", manifests, "dataset manifest (repeatable)")->required();
  eval_cmd->add_option("--split", split, "dataset split to score (default test)");
  eval_cmd->add_option("--threshold", threshold, "minimum IoU for a match to count");
  eval_cmd->add_option("--out", out_path, "report JSON path")->required();

  CLI::App* infer = app.add_subcommand("infer", "run a checkpoint on one image");
  infer->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  infer->add_option("--image", image_path, "input PPM image")->required();
  infer->add_option("--out", out_path, "output label map path")->required();

  CLI::App* visualize = app.add_subcommand("visualize", "overlay labels on an image");
  visualize->add_option("--image", image_path, "input PPM image")->required();
  visualize->add_option("--labels", labels_path, "label map or prediction")->required();
  visualize->add_option("--taxonomy", taxonomy_path, "taxonomy file")->required();
  visualize->add_option("--seed", vis_seed, "region color seed");
  visualize->add_option("--out", out_path, "output PPM path")->required();

  try {
    app.parse(argc, argv);
    if (generate->parsed()) {
      return cmd_generate(config_path, overrides,
                          generate->count("--seed") ? &seed_flag : nullptr, count, out_path);
    }
    if (train_cmd->parsed()) {
      return cmd_train(config_path, overrides, manifests,
                       train_cmd->count("--seed") ? &seed_flag : nullptr,
                       train_cmd->count("--steps") ? &steps_flag : nullptr, out_path);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(checkpoint, proposal_dir, manifests, split, threshold, out_path);
    }
    if (infer->parsed()) return cmd_infer(checkpoint, image_path, out_path);
    if (visualize->parsed()) return cmd_visualize(image_path, labels_path, taxonomy_path, vis_seed, out_path);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
