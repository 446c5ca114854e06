#include "trinity/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "trinity/error.hpp"

namespace trinity {

std::vector<uint16_t> argmax_channels(const Tensor& logits) {
  if (logits.rank() != 3) {
    throw DimensionError("argmax_channels: logits must be [C,H,W], got " +
                         shape_to_string(logits.shape()));
  }
  const size_t channels = logits.dim(0);
  const size_t pixels = logits.dim(1) * logits.dim(2);
  const auto& lv = logits.values();
  std::vector<uint16_t> out(pixels, 0);
  for (size_t i = 0; i < pixels; ++i) {
    double best = lv[i];
    uint16_t arg = 0;
    for (size_t ch = 1; ch < channels; ++ch) {
      const double v = lv[ch * pixels + i];
      if (v > best) {
        best = v;
        arg = static_cast<uint16_t>(ch);
      }
    }
    out[i] = arg;
  }
  return out;
}

LabelMap prediction_from_logits(const Tensor& logits) {
  LabelMap pred;
  pred.height = logits.dim(1);
  pred.width = logits.dim(2);
  pred.codes = argmax_channels(logits);
  return pred;
}

RegionProposalSet extract_ca_proposals(const Tensor& logits, size_t num_cs) {
  const std::vector<uint16_t> winners = argmax_channels(logits);
  const size_t channels = logits.dim(0);
  if (num_cs >= channels) {
    throw DimensionError("extract_ca_proposals: num_cs " + std::to_string(num_cs) +
                         " leaves no CA channels of " + std::to_string(channels));
  }
  RegionProposalSet set;
  set.source = RegionProposalSet::Source::ArgmaxChannels;
  for (size_t slot = num_cs; slot < channels; ++slot) {
    std::vector<uint8_t> mask(winners.size(), 0);
    size_t area = 0;
    for (size_t i = 0; i < winners.size(); ++i) {
      if (winners[i] == slot) {
        mask[i] = 1;
        ++area;
      }
    }
    if (area > 0) set.masks.push_back(std::move(mask));  // empty slots emit nothing
  }
  return set;
}

RegionProposalSet proposals_from_labels(const LabelMap& prediction, const Taxonomy& tax) {
  RegionProposalSet set;
  set.source = RegionProposalSet::Source::External;
  for (size_t region : region_ids(prediction, tax)) {
    set.masks.push_back(region_mask(prediction, tax, region));
  }
  return set;
}

CaMatch match_ca(const RegionProposalSet& proposals,
                 const std::vector<std::vector<uint8_t>>& gt_masks, double iou_threshold) {
  const size_t n_prop = proposals.masks.size();
  const size_t n_gt = gt_masks.size();
  CaMatch result;
  if (n_gt == 0) {
    for (size_t p = 0; p < n_prop; ++p) result.unmatched_proposals.push_back(p);
    return result;
  }

  // Pad the proposal side with dummy rows (IoU 0 with everything) so the
  // matcher always has n_pred >= n_gt; dummy matches surface as unmet.
  const size_t n_rows = std::max(n_prop, n_gt);
  std::vector<double> costs(n_rows * n_gt, 1.0);
  std::vector<CaMatch::Pair> stats(n_prop * n_gt);
  for (size_t p = 0; p < n_prop; ++p) {
    const auto& pm = proposals.masks[p];
    uint64_t p_size = 0;
    for (uint8_t v : pm) p_size += v;
    for (size_t g = 0; g < n_gt; ++g) {
      const auto& gm = gt_masks[g];
      if (gm.size() != pm.size()) {
        throw DimensionError("match_ca: proposal and region mask sizes differ (" +
                             std::to_string(pm.size()) + " vs " + std::to_string(gm.size()) + ")");
      }
      uint64_t inter = 0, g_size = 0;
      for (size_t i = 0; i < gm.size(); ++i) {
        g_size += gm[i];
        inter += static_cast<uint64_t>(pm[i] & gm[i]);
      }
      const uint64_t uni = p_size + g_size - inter;
      const double iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
      stats[p * n_gt + g] = CaMatch::Pair{p, g, inter, p_size, g_size, iou};
      costs[p * n_gt + g] = 1.0 - iou;
    }
  }

  Assignment assignment = hungarian(CostMatrix(n_rows, n_gt, std::move(costs)));
  std::vector<char> proposal_matched(n_prop, 0);
  std::vector<char> region_met(n_gt, 0);
  for (const auto& [p, g] : assignment.pairs) {
    if (p >= n_prop) continue;  // dummy row
    const CaMatch::Pair& pair = stats[p * n_gt + g];
    if (pair.iou > iou_threshold) {
      result.matched.push_back(pair);
      proposal_matched[p] = 1;
      region_met[g] = 1;
    }
  }
  for (size_t p = 0; p < n_prop; ++p) {
    if (!proposal_matched[p]) result.unmatched_proposals.push_back(p);
  }
  for (size_t g = 0; g < n_gt; ++g) {
    if (!region_met[g]) result.unmet_regions.push_back(g);
  }
  return result;
}

double residual_recall(const std::vector<std::vector<uint8_t>>& unmatched_masks, size_t h,
                       size_t w) {
  if (h == 0 || w == 0) throw DimensionError("residual_recall: empty image");
  if (unmatched_masks.empty()) return 0.0;
  std::vector<uint8_t> residual(h * w, 0);
  for (const auto& mask : unmatched_masks) {
    if (mask.size() != residual.size()) {
      throw DimensionError("residual_recall: mask size " + std::to_string(mask.size()) + " vs " +
                           std::to_string(residual.size()) + " pixels");
    }
    for (size_t i = 0; i < mask.size(); ++i) residual[i] |= mask[i];
  }
  uint64_t covered = 0;
  for (uint8_t v : residual) covered += v;
  return static_cast<double>(covered) / static_cast<double>(h * w);
}

Evaluator::Evaluator(Taxonomy taxonomy, double iou_threshold)
    : tax_(std::move(taxonomy)), iou_threshold_(iou_threshold) {
  tax_.validate();
  cs_intersection_.assign(tax_.num_cs(), 0);
  cs_union_.assign(tax_.num_cs(), 0);
}

void Evaluator::add_image(const LabelMap& prediction, const LabelMap& ground_truth,
                          const std::vector<std::string>& region_names) {
  if (prediction.width != ground_truth.width || prediction.height != ground_truth.height) {
    throw DimensionError("evaluate: prediction " + std::to_string(prediction.width) + "x" +
                         std::to_string(prediction.height) + " vs ground truth " +
                         std::to_string(ground_truth.width) + "x" +
                         std::to_string(ground_truth.height));
  }
  const size_t num_cs = tax_.num_cs();

  // class-specific confusion: CA or void predictions count as "not this class"
  for (size_t i = 0; i < ground_truth.size(); ++i) {
    const uint16_t gt = ground_truth.codes[i];
    if (is_void_code(gt, tax_)) continue;
    const uint16_t pred = prediction.codes[i];
    const bool pred_cs = !is_void_code(pred, tax_) && pred < num_cs;
    for (size_t c = 0; c < num_cs; ++c) {
      const bool in_gt = gt == c;
      const bool in_pred = pred_cs && pred == c;
      if (in_gt && in_pred) ++cs_intersection_[c];
      if (in_gt || in_pred) ++cs_union_[c];
    }
  }

  // class-agnostic side: per-image matching, per-terrain accumulation
  const std::vector<size_t> regions = region_ids(ground_truth, tax_);
  std::vector<std::vector<uint8_t>> gt_masks;
  gt_masks.reserve(regions.size());
  for (size_t r : regions) gt_masks.push_back(region_mask(ground_truth, tax_, r));

  const RegionProposalSet proposals = proposals_from_labels(prediction, tax_);
  const CaMatch match = match_ca(proposals, gt_masks, iou_threshold_);

  auto terrain_name = [&](size_t gt_index) -> std::string {
    const size_t region = regions[gt_index];
    if (region < region_names.size()) return region_names[region];
    if (region < tax_.ca_terrain_names.size()) return tax_.ca_terrain_names[region];
    return "terrain_" + std::to_string(region);
  };

  for (const auto& pair : match.matched) {
    auto& [inter, uni] = ca_inter_union_[terrain_name(pair.region)];
    inter += pair.intersection;
    uni += pair.proposal_size + pair.region_size - pair.intersection;
    recalls_.push_back(static_cast<double>(pair.intersection) /
                       static_cast<double>(pair.region_size));
    precisions_.push_back(pair.proposal_size == 0
                              ? 0.0
                              : static_cast<double>(pair.intersection) /
                                    static_cast<double>(pair.proposal_size));
  }
  for (size_t g : match.unmet_regions) {
    uint64_t g_size = 0;
    for (uint8_t v : gt_masks[g]) g_size += v;
    auto& [inter, uni] = ca_inter_union_[terrain_name(g)];
    uni += g_size;
    recalls_.push_back(0.0);
  }

  std::vector<std::vector<uint8_t>> unmatched;
  for (size_t p : match.unmatched_proposals) unmatched.push_back(proposals.masks[p]);
  res_r_.push_back(residual_recall(unmatched, ground_truth.height, ground_truth.width));
  ++images_;
}

namespace {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

}  // namespace

MetricsReport Evaluator::report() const {
  MetricsReport rep;
  double cs_sum = 0.0;
  size_t cs_count = 0;
  for (size_t c = 0; c < tax_.num_cs(); ++c) {
    if (cs_union_[c] == 0) continue;  // absent classes are excluded
    const double iou =
        static_cast<double>(cs_intersection_[c]) / static_cast<double>(cs_union_[c]);
    rep.cs_iou[tax_.cs_names[c]] = iou;
    if (!tax_.cs_unscored.count(tax_.cs_names[c])) {
      cs_sum += iou;
      ++cs_count;
    }
  }
  rep.cs_miou = cs_count == 0 ? 0.0 : cs_sum / static_cast<double>(cs_count);

  double ca_sum = 0.0;
  size_t ca_count = 0;
  for (const auto& [name, iu] : ca_inter_union_) {
    if (iu.second == 0) continue;
    const double iou = static_cast<double>(iu.first) / static_cast<double>(iu.second);
    rep.ca_iou[name] = iou;
    ca_sum += iou;
    ++ca_count;
  }
  rep.ca_miou = ca_count == 0 ? 0.0 : ca_sum / static_cast<double>(ca_count);
  rep.ca_mpre = mean(precisions_);
  rep.ca_mrec = mean(recalls_);
  rep.res_r = mean(res_r_);
  rep.per_image_res_r = res_r_;
  return rep;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["cs_iou"] = cs_iou;
  j["cs_miou"] = cs_miou;
  j["ca_iou"] = ca_iou;
  j["ca_miou"] = ca_miou;
  j["ca_mpre"] = ca_mpre;
  j["ca_mrec"] = ca_mrec;
  j["res_r"] = res_r;
  j["per_image_res_r"] = per_image_res_r;
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  size_t width = 12;
  for (const auto& [name, iou] : cs_iou) width = std::max(width, name.size() + 2);
  for (const auto& [name, iou] : ca_iou) width = std::max(width, name.size() + 2);

  os << "class-specific\n";
  for (const auto& [name, iou] : cs_iou) {
    os << "  " << std::left << std::setw(static_cast<int>(width)) << name << iou << "\n";
  }
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "mIoU" << cs_miou << "\n";
  os << "class-agnostic\n";
  for (const auto& [name, iou] : ca_iou) {
    os << "  " << std::left << std::setw(static_cast<int>(width)) << name << iou << "\n";
  }
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "mIoU" << ca_miou << "\n";
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "mPre" << ca_mpre << "\n";
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "mRec" << ca_mrec << "\n";
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "resR" << res_r << "\n";
  return os.str();
}

}  // namespace trinity
