#include "trinity/training.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "trinity/error.hpp"
#include "trinity/optim.hpp"
#include "trinity/rng.hpp"

namespace trinity {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
  if (steps == 0) throw ConfigError("train: steps must be >= 1");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (aux_weight < 0.0) throw ConfigError("train: aux_weight must be >= 0");
}

TrainConfig TrainConfig::from_config(const KeyValues& kv) {
  TrainConfig cfg;
  cfg.lr = kv.get_double("train.lr", 3e-4);
  cfg.steps = kv.get_u64("train.steps", 1);
  cfg.batch_size = kv.get_u64("train.batch_size", 4);
  cfg.aux_weight = kv.get_double("train.aux_weight", 0.5);
  cfg.seed = kv.get_u64("train.seed", 0);
  cfg.checkpoint_every = kv.get_u64("train.checkpoint_every", 0);
  for (const auto& item : kv.get_list("train.class_weights", {})) {
    try {
      cfg.class_weights.push_back(std::stod(item));
    } catch (...) {
      throw ConfigError("train.class_weights: not a number: \"" + item + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

void TrainConfig::to_config(KeyValues& kv) const {
  kv.set_double("train.lr", lr);
  kv.set_int("train.steps", static_cast<int64_t>(steps));
  kv.set_int("train.batch_size", static_cast<int64_t>(batch_size));
  kv.set_double("train.aux_weight", aux_weight);
  kv.set_int("train.seed", static_cast<int64_t>(seed));
  kv.set_int("train.checkpoint_every", static_cast<int64_t>(checkpoint_every));
}

std::vector<double> binary_split_target(const LabelMap& labels, const Taxonomy& tax, size_t hf,
                                        size_t wf) {
  if (hf == 0 || wf == 0 || labels.height % hf != 0 || labels.width % wf != 0) {
    throw DimensionError("binary_split_target: label dims " + std::to_string(labels.width) + "x" +
                         std::to_string(labels.height) + " not divisible by feature dims " +
                         std::to_string(wf) + "x" + std::to_string(hf));
  }
  const size_t patch_h = labels.height / hf;
  const size_t patch_w = labels.width / wf;
  const size_t num_cs = tax.num_cs();
  std::vector<double> target(hf * wf, 0.0);
  for (size_t py = 0; py < hf; ++py) {
    for (size_t px = 0; px < wf; ++px) {
      size_t cs = 0, ca = 0;
      for (size_t y = py * patch_h; y < (py + 1) * patch_h; ++y) {
        for (size_t x = px * patch_w; x < (px + 1) * patch_w; ++x) {
          const uint16_t code = labels.at(x, y);
          if (is_void_code(code, tax)) continue;
          if (code < num_cs) {
            ++cs;
          } else {
            ++ca;
          }
        }
      }
      // ties resolve to CA
      target[py * wf + px] = cs > ca ? 1.0 : 0.0;
    }
  }
  return target;
}

Tensor aux_split_loss(const Tensor& aux_logits, const std::vector<double>& binary_target,
                      size_t n_split_cs) {
  if (aux_logits.rank() != 3) {
    throw DimensionError("aux_split_loss: logits must be [n,Hf,Wf], got " +
                         shape_to_string(aux_logits.shape()));
  }
  const size_t n = aux_logits.dim(0);
  const size_t pixels = aux_logits.dim(1) * aux_logits.dim(2);
  if (binary_target.size() != pixels) {
    throw DimensionError("aux_split_loss: target size " + std::to_string(binary_target.size()) +
                         " vs " + std::to_string(pixels) + " feature pixels");
  }
  if (n_split_cs > n) {
    throw DimensionError("aux_split_loss: n_split_cs " + std::to_string(n_split_cs) +
                         " exceeds query count " + std::to_string(n));
  }
  std::vector<double> targets(n * pixels);
  for (size_t q = 0; q < n; ++q) {
    const bool cs_branch = q < n_split_cs;
    for (size_t p = 0; p < pixels; ++p) {
      targets[q * pixels + p] = cs_branch ? binary_target[p] : 1.0 - binary_target[p];
    }
  }
  return bce_with_logits(aux_logits, targets);
}

CostMatrix match_cost_matrix(const std::vector<double>& ca_probs, size_t num_slots, size_t pixels,
                             const std::vector<std::vector<uint8_t>>& gt_masks,
                             std::vector<size_t>* kept_regions) {
  if (ca_probs.size() != num_slots * pixels) {
    throw DimensionError("match_cost_matrix: " + std::to_string(ca_probs.size()) + " probs for " +
                         std::to_string(num_slots) + " slots x " + std::to_string(pixels) +
                         " pixels");
  }
  std::vector<size_t> kept;
  for (size_t r = 0; r < gt_masks.size(); ++r) {
    if (gt_masks[r].size() != pixels) {
      throw DimensionError("match_cost_matrix: mask " + std::to_string(r) + " has " +
                           std::to_string(gt_masks[r].size()) + " pixels, expected " +
                           std::to_string(pixels));
    }
    size_t area = 0;
    for (uint8_t v : gt_masks[r]) area += v;
    if (area == 0) {
      std::cerr << "warning: empty ground-truth region " << r << " excluded from matching\n";
      continue;
    }
    kept.push_back(r);
  }

  std::vector<double> costs(num_slots * kept.size());
  constexpr double kDiceEps = 1e-7;
  for (size_t m = 0; m < num_slots; ++m) {
    const double* p = ca_probs.data() + m * pixels;
    double p_sum = 0.0;
    for (size_t i = 0; i < pixels; ++i) p_sum += p[i];
    for (size_t ki = 0; ki < kept.size(); ++ki) {
      const auto& g = gt_masks[kept[ki]];
      double inter = 0.0, g_sum = 0.0;
      for (size_t i = 0; i < pixels; ++i) {
        if (g[i]) {
          inter += p[i];
          g_sum += 1.0;
        }
      }
      costs[m * kept.size() + ki] = 1.0 - 2.0 * inter / (p_sum + g_sum + kDiceEps);
    }
  }
  if (kept_regions) *kept_regions = kept;
  return CostMatrix(num_slots, kept.size(), std::move(costs));
}

MatchedTarget build_matched_target(const LabelMap& labels, const Taxonomy& tax,
                                   const Assignment& assignment,
                                   const std::vector<size_t>& matched_region_ids) {
  const size_t num_cs = tax.num_cs();
  const std::vector<size_t> present = region_ids(labels, tax);

  MatchedTarget out;
  const size_t max_region = present.empty() ? 0 : present.back() + 1;
  out.slot_of_region.assign(max_region, Assignment::npos);
  for (const auto& [slot, gt_index] : assignment.pairs) {
    if (gt_index >= matched_region_ids.size()) {
      throw ContractError("build_matched_target: assignment gt index " + std::to_string(gt_index) +
                          " outside matched region list");
    }
    const size_t region = matched_region_ids[gt_index];
    if (region >= out.slot_of_region.size()) out.slot_of_region.resize(region + 1, Assignment::npos);
    out.slot_of_region[region] = slot;
  }
  for (size_t region : present) {
    if (out.slot_of_region[region] == Assignment::npos) {
      throw ContractError("build_matched_target: GT region " + std::to_string(region) +
                          " has no assigned slot");
    }
  }

  out.channels.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    const uint16_t code = labels.codes[i];
    if (is_void_code(code, tax)) {
      out.channels[i] = kIgnoreLabel;
    } else if (code < num_cs) {
      out.channels[i] = static_cast<int64_t>(code);
    } else {
      const size_t slot = out.slot_of_region[code - num_cs];
      out.channels[i] = static_cast<int64_t>(num_cs + slot);
    }
  }
  return out;
}

LossParts total_loss(const ModelOutput& output, const LabelMap& labels, const Taxonomy& tax,
                     double aux_weight, const std::vector<double>& class_weights) {
  const size_t num_cs = tax.num_cs();
  const size_t num_slots = tax.ca_slot_count;
  const size_t channels = num_cs + num_slots;
  if (output.logits.rank() != 3 || output.logits.dim(0) != channels ||
      output.logits.dim(1) != labels.height || output.logits.dim(2) != labels.width) {
    throw DimensionError("total_loss: logits " + shape_to_string(output.logits.shape()) +
                         " vs labels " + std::to_string(labels.width) + "x" +
                         std::to_string(labels.height) + " with " + std::to_string(channels) +
                         " channels");
  }
  const size_t pixels = labels.size();

  // CA probabilities for the matcher: plain values, softmax over all
  // channels; the discrete matching never carries gradient.
  std::vector<double> ca_probs(num_slots * pixels);
  {
    const auto& lv = output.logits.values();
    for (size_t i = 0; i < pixels; ++i) {
      double mx = lv[i];
      for (size_t ch = 1; ch < channels; ++ch) mx = std::max(mx, lv[ch * pixels + i]);
      double denom = 0.0;
      for (size_t ch = 0; ch < channels; ++ch) denom += std::exp(lv[ch * pixels + i] - mx);
      for (size_t m = 0; m < num_slots; ++m) {
        ca_probs[m * pixels + i] = std::exp(lv[(num_cs + m) * pixels + i] - mx) / denom;
      }
    }
  }

  const std::vector<size_t> regions = region_ids(labels, tax);
  std::vector<std::vector<uint8_t>> masks;
  masks.reserve(regions.size());
  for (size_t r : regions) masks.push_back(region_mask(labels, tax, r));

  std::vector<size_t> kept;
  CostMatrix costs = match_cost_matrix(ca_probs, num_slots, pixels, masks, &kept);
  Assignment assignment = hungarian(costs);
  std::vector<size_t> kept_region_ids(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) kept_region_ids[i] = regions[kept[i]];
  MatchedTarget target = build_matched_target(labels, tax, assignment, kept_region_ids);

  Tensor per_pixel_logits = transpose(reshape(output.logits, {channels, pixels}));
  Tensor ce = cross_entropy(per_pixel_logits, target.channels, class_weights);

  const size_t hf = output.aux_split_logits.dim(1);
  const size_t wf = output.aux_split_logits.dim(2);
  const size_t n_split_cs = output.updated_split_cs.dim(0);
  Tensor aux = aux_split_loss(output.aux_split_logits, binary_split_target(labels, tax, hf, wf),
                              n_split_cs);

  LossParts parts;
  parts.ce = ce.item();
  parts.aux = aux.item();
  parts.total = add(ce, scale(aux, aux_weight));
  parts.assignment = std::move(assignment);
  return parts;
}

Dataset load_dataset(const std::vector<std::string>& manifest_paths, const std::string& split) {
  if (manifest_paths.empty()) throw ConfigError("load_dataset: no manifests given");
  Dataset ds;
  bool first = true;
  for (const auto& path : manifest_paths) {
    const Manifest manifest = Manifest::load(path);
    const Taxonomy tax = Taxonomy::load(manifest.resolve(manifest.taxonomy_path));
    if (first) {
      ds.taxonomy = tax;
      first = false;
    } else if (tax.num_cs() != ds.taxonomy.num_cs() ||
               tax.ca_slot_count != ds.taxonomy.ca_slot_count) {
      throw ConfigError("load_dataset: taxonomy mismatch between manifests (" + path + ")");
    }
    for (const auto& rec : manifest.split_samples(split)) {
      TrainSample sample;
      sample.image = read_image(manifest.resolve(rec.image_path));
      sample.labels = read_labels(manifest.resolve(rec.labels_path));
      validate_labels(sample.labels, ds.taxonomy);
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

std::vector<TraceRow> train(TrinityNet& model, const Dataset& dataset, const TrainConfig& cfg,
                            const CheckpointHook& on_checkpoint) {
  cfg.validate();
  if (dataset.samples.empty()) throw ConfigError("train: empty dataset");
  if (!cfg.class_weights.empty() &&
      cfg.class_weights.size() != dataset.taxonomy.num_cs() + dataset.taxonomy.ca_slot_count) {
    throw ConfigError("train: class_weights size " + std::to_string(cfg.class_weights.size()) +
                      " vs " +
                      std::to_string(dataset.taxonomy.num_cs() + dataset.taxonomy.ca_slot_count) +
                      " channels");
  }

  auto params = model.named_parameters();
  std::vector<AdamState> states(params.size());
  AdamConfig adam;
  adam.lr = cfg.lr;

  Rng rng(cfg.seed);
  std::vector<size_t> order(dataset.samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();  // forces a shuffle on first use

  std::vector<TraceRow> trace;
  trace.reserve(cfg.steps);
  for (size_t step = 0; step < cfg.steps; ++step) {
    // assemble batch indices from a seeded shuffle, reshuffling per epoch
    std::vector<size_t> batch;
    batch.reserve(cfg.batch_size);
    while (batch.size() < cfg.batch_size) {
      if (cursor >= order.size()) {
        for (size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    Tensor batch_loss;
    double ce_sum = 0.0, aux_sum = 0.0;
    for (size_t idx : batch) {
      const TrainSample& sample = dataset.samples[idx];
      ModelOutput out = model.forward(sample.image);
      LossParts parts =
          total_loss(out, sample.labels, dataset.taxonomy, cfg.aux_weight, cfg.class_weights);
      ce_sum += parts.ce;
      aux_sum += parts.aux;
      batch_loss = batch_loss.defined() ? add(batch_loss, parts.total) : parts.total;
    }
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    batch_loss = scale(batch_loss, inv_b);

    for (auto& [name, tensor] : params) tensor.zero_grad();
    backward(batch_loss);
    for (size_t i = 0; i < params.size(); ++i) {
      adam_step(params[i].second, params[i].second.grad(), states[i], adam);
    }

    trace.push_back(TraceRow{step, batch_loss.item(), ce_sum * inv_b, aux_sum * inv_b});
    if (cfg.checkpoint_every > 0 && on_checkpoint && (step + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(step + 1, model);
    }
  }
  return trace;
}

std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "step,total,ce,aux\n";
  os.precision(9);
  for (const auto& row : rows) {
    os << row.step << "," << row.total << "," << row.ce << "," << row.aux << "\n";
  }
  return os.str();
}

}  // namespace trinity
