#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trinity/assignment.hpp"
#include "trinity/config.hpp"
#include "trinity/dataset_io.hpp"
#include "trinity/model.hpp"
#include "trinity/tensor.hpp"

namespace trinity {

struct TrainConfig {
  double lr = 3e-4;
  size_t steps = 1;
  size_t batch_size = 4;
  double aux_weight = 0.5;  // lambda
  uint64_t seed = 0;
  size_t checkpoint_every = 0;              // 0 disables cadence checkpoints
  std::vector<double> class_weights;        // optional CE weights over K+M channels

  void validate() const;
  static TrainConfig from_config(const KeyValues& kv);
  void to_config(KeyValues& kv) const;
};

// Pixel-level CS/CA mask reduced to feature resolution by per-patch majority
// vote; returns 1.0 where CS wins, ties resolve to CA. Void pixels abstain.
std::vector<double> binary_split_target(const LabelMap& labels, const Taxonomy& tax, size_t hf,
                                        size_t wf);

// Per-query binary cross-entropy on sigmoid similarity logits: the first
// n_split_cs query rows target the CS mask, the remaining rows its
// complement. Mean over queries and pixels.
Tensor aux_split_loss(const Tensor& aux_logits, const std::vector<double>& binary_target,
                      size_t n_split_cs);

// Soft-Dice matching cost between predicted CA slot probabilities and GT
// region masks: cost = 1 - 2*sum(p*g) / (sum(p) + sum(g) + 1e-7).
// Empty masks are excluded (kept_regions reports the surviving indices) with
// a warning on stderr.
CostMatrix match_cost_matrix(const std::vector<double>& ca_probs, size_t num_slots, size_t pixels,
                             const std::vector<std::vector<uint8_t>>& gt_masks,
                             std::vector<size_t>* kept_regions = nullptr);

// Per-pixel channel targets in [0, K+M) or kIgnoreLabel for void.
struct MatchedTarget {
  std::vector<int64_t> channels;    // H*W
  std::vector<size_t> slot_of_region;  // region id -> matched slot
};

MatchedTarget build_matched_target(const LabelMap& labels, const Taxonomy& tax,
                                   const Assignment& assignment,
                                   const std::vector<size_t>& matched_region_ids);

struct LossParts {
  Tensor total;
  double ce = 0.0;
  double aux = 0.0;
  Assignment assignment;
};

// Hungarian-matched cross-entropy over the full output plus the weighted
// auxiliary split loss. The matching is recomputed from current
// probabilities; no gradient flows through it.
LossParts total_loss(const ModelOutput& output, const LabelMap& labels, const Taxonomy& tax,
                     double aux_weight, const std::vector<double>& class_weights = {});

struct TrainSample {
  Image image;
  LabelMap labels;
};

struct Dataset {
  Taxonomy taxonomy;
  std::vector<TrainSample> samples;
};

// Loads and concatenates the given manifests (split filter optional; empty
// loads every sample). Taxonomies must agree on K and M.
Dataset load_dataset(const std::vector<std::string>& manifest_paths, const std::string& split);

struct TraceRow {
  size_t step;
  double total;
  double ce;
  double aux;
};

using CheckpointHook = std::function<void(size_t step, const TrinityNet& model)>;

// Seeded-shuffle Adam training loop; fully reproducible per seed.
std::vector<TraceRow> train(TrinityNet& model, const Dataset& dataset, const TrainConfig& cfg,
                            const CheckpointHook& on_checkpoint = nullptr);

// Loss trace CSV: header `step,total,ce,aux`, f64 with 9 significant digits.
std::string trace_to_csv(const std::vector<TraceRow>& rows);

}  // namespace trinity
