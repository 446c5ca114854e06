#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trinity/assignment.hpp"
#include "trinity/dataset_io.hpp"
#include "trinity/tensor.hpp"

namespace trinity {

struct MetricsReport {
  std::map<std::string, double> cs_iou;  // per scored class with nonzero union
  double cs_miou = 0.0;
  std::map<std::string, double> ca_iou;  // per GT terrain name
  double ca_miou = 0.0;
  double ca_mpre = 0.0;
  double ca_mrec = 0.0;
  double res_r = 0.0;
  std::vector<double> per_image_res_r;

  std::string to_json() const;
  std::string to_table() const;  // aligned text, one class per row
};

// Binary masks proposed as class-agnostic regions. Argmax-derived proposals
// are pairwise disjoint; external sets may overlap.
struct RegionProposalSet {
  enum class Source { ArgmaxChannels, External };
  std::vector<std::vector<uint8_t>> masks;
  Source source = Source::External;
};

// Per-pixel argmax over all channels of a [C,H,W] logit tensor.
std::vector<uint16_t> argmax_channels(const Tensor& logits);

// Prediction label map from logits: CS channels keep their class id, CA
// winner pixels get code K + slot (codes equal channel indices).
LabelMap prediction_from_logits(const Tensor& logits);

// One binary mask per CA slot that wins at least one pixel.
RegionProposalSet extract_ca_proposals(const Tensor& logits, size_t num_cs);

// Proposals read back from a prediction label map (codes >= K each form one
// mask); the entry point for scoring external mask sets.
RegionProposalSet proposals_from_labels(const LabelMap& prediction, const Taxonomy& tax);

struct CaMatch {
  struct Pair {
    size_t proposal;
    size_t region;
    uint64_t intersection;
    uint64_t proposal_size;
    uint64_t region_size;
    double iou;
  };
  std::vector<Pair> matched;
  std::vector<size_t> unmatched_proposals;
  std::vector<size_t> unmet_regions;  // GT regions without a surviving match
};

// Hungarian matching over 1 - IoU. Proposals are padded with dummies when
// fewer than regions; matches at or below the IoU threshold are demoted to
// unmatched (threshold 0 demotes exactly the zero-overlap pairs).
CaMatch match_ca(const RegionProposalSet& proposals,
                 const std::vector<std::vector<uint8_t>>& gt_masks, double iou_threshold = 0.0);

// |union of masks| / (h*w).
double residual_recall(const std::vector<std::vector<uint8_t>>& unmatched_masks, size_t h,
                       size_t w);

// Streaming accumulator; per-image matching, dataset-level aggregation.
class Evaluator {
 public:
  Evaluator(Taxonomy taxonomy, double iou_threshold = 0.0);

  // region_names maps the image's region ids to GT terrain names for
  // per-terrain accumulation; missing entries fall back to the taxonomy's
  // terrain list and then to "terrain_<id>".
  void add_image(const LabelMap& prediction, const LabelMap& ground_truth,
                 const std::vector<std::string>& region_names = {});

  MetricsReport report() const;
  size_t images_seen() const { return images_; }

 private:
  Taxonomy tax_;
  double iou_threshold_;
  size_t images_ = 0;
  std::vector<uint64_t> cs_intersection_, cs_union_;
  std::map<std::string, std::pair<uint64_t, uint64_t>> ca_inter_union_;
  std::vector<double> recalls_;     // one per GT region instance
  std::vector<double> precisions_;  // one per surviving matched pair
  std::vector<double> res_r_;       // one per image
};

}  // namespace trinity
