#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "trinity/datagen.hpp"
#include "trinity/error.hpp"
#include "trinity/metrics.hpp"
#include "trinity/rng.hpp"

using namespace trinity;

namespace {

Taxonomy small_taxonomy(size_t num_cs, size_t slots) {
  Taxonomy tax;
  for (size_t i = 0; i < num_cs; ++i) tax.cs_names.push_back("cls" + std::to_string(i));
  tax.ca_slot_count = slots;
  return tax;
}

LabelMap make_labels(size_t w, size_t h, std::vector<uint16_t> codes) {
  LabelMap m;
  m.width = w;
  m.height = h;
  m.codes = std::move(codes);
  return m;
}

std::vector<uint8_t> box_mask(size_t w, size_t h, size_t x0, size_t y0, size_t x1, size_t y1) {
  std::vector<uint8_t> mask(w * h, 0);
  for (size_t y = y0; y < y1; ++y) {
    for (size_t x = x0; x < x1; ++x) mask[y * w + x] = 1;
  }
  return mask;
}

double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) ++inter;
    if (a[i] || b[i]) ++uni;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("cs confusion hand case") {
  const Taxonomy tax = small_taxonomy(3, 2);
  // 4x4 ground truth: rows of class 0, 1, 2, then CA region 0 (code 3)
  const LabelMap gt = make_labels(4, 4, {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3});
  // prediction: class 0 perfect, class 1 half right (other half class 2),
  // class 2 fully missed (predicted CA), region row predicted class 0
  const LabelMap pred = make_labels(4, 4, {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 3, 3, 0, 0, 0, 0});

  Evaluator ev(tax);
  ev.add_image(pred, gt);
  const MetricsReport rep = ev.report();
  // class 0: I=4, U = 4 gt + 4 stray predictions = 8
  CHECK(rep.cs_iou.at("cls0") == doctest::Approx(4.0 / 8.0));
  // class 1: I=2, U=4
  CHECK(rep.cs_iou.at("cls1") == doctest::Approx(2.0 / 4.0));
  // class 2: I=0, U = 4 gt + 2 stray = 6
  CHECK(rep.cs_iou.at("cls2") == doctest::Approx(0.0));
  CHECK(rep.cs_miou == doctest::Approx((0.5 + 0.5 + 0.0) / 3.0));

  // identical maps give IoU 1 everywhere
  Evaluator self(tax);
  self.add_image(gt, gt);
  for (const auto& [name, iou] : self.report().cs_iou) CHECK(iou == 1.0);

  CHECK_THROWS_AS(ev.add_image(make_labels(2, 2, {0, 0, 0, 0}), gt), DimensionError);
}

TEST_CASE("proposal extraction from logits") {
  // 2 CS + 3 CA channels over a 2x2 image
  const size_t pixels = 4;
  std::vector<double> logits(5 * pixels, 0.0);
  // pixel 0: CS channel 1 wins; pixels 1,2: slot 0 (ch 2); pixel 3: slot 2 (ch 4)
  logits[1 * pixels + 0] = 5.0;
  logits[2 * pixels + 1] = 5.0;
  logits[2 * pixels + 2] = 5.0;
  logits[4 * pixels + 3] = 5.0;
  const Tensor t({5, 2, 2}, logits);

  const RegionProposalSet set = extract_ca_proposals(t, 2);
  REQUIRE(set.masks.size() == 2);  // slot 1 never wins, emits nothing
  CHECK(set.masks[0] == std::vector<uint8_t>{0, 1, 1, 0});
  CHECK(set.masks[1] == std::vector<uint8_t>{0, 0, 0, 1});

  // proposal masks and CS winners tile the image exactly
  std::vector<uint8_t> covered(pixels, 0);
  const auto winners = argmax_channels(t);
  for (size_t i = 0; i < pixels; ++i) {
    if (winners[i] < 2) covered[i] = 1;
  }
  for (const auto& mask : set.masks) {
    for (size_t i = 0; i < pixels; ++i) {
      CHECK(!(covered[i] && mask[i]));  // disjoint
      covered[i] |= mask[i];
    }
  }
  CHECK(std::count(covered.begin(), covered.end(), 1) == 4);

  // all pixels winning CS channels -> empty set
  std::vector<double> cs_only(5 * pixels, 0.0);
  for (size_t i = 0; i < pixels; ++i) cs_only[i] = 9.0;
  CHECK(extract_ca_proposals(Tensor({5, 2, 2}, cs_only), 2).masks.empty());
}

TEST_CASE("match_ca basics and brute-force agreement") {
  const size_t w = 8, h = 8;
  const std::vector<std::vector<uint8_t>> regions = {
      box_mask(w, h, 0, 0, 4, 8),  // left half
      box_mask(w, h, 4, 0, 8, 8),  // right half
  };

  // proposals identical to regions: perfect match
  RegionProposalSet exact;
  exact.masks = regions;
  const CaMatch perfect = match_ca(exact, regions);
  REQUIRE(perfect.matched.size() == 2);
  for (const auto& pair : perfect.matched) CHECK(pair.iou == 1.0);
  CHECK(perfect.unmatched_proposals.empty());
  CHECK(perfect.unmet_regions.empty());

  // zero proposals: all regions unmet, nothing unmatched
  const CaMatch none = match_ca(RegionProposalSet{}, regions);
  CHECK(none.matched.empty());
  CHECK(none.unmet_regions.size() == 2);
  CHECK(none.unmatched_proposals.empty());

  // 3 proposals vs 2 regions with overlaps: agree with exhaustive best pairing
  RegionProposalSet three;
  three.masks = {
      box_mask(w, h, 0, 0, 3, 8),  // mostly left
      box_mask(w, h, 3, 0, 6, 8),  // straddles the middle
      box_mask(w, h, 6, 0, 8, 8),  // right edge
  };
  const CaMatch got = match_ca(three, regions);

  // brute force over all injective region -> proposal pairings, maximizing
  // total IoU (equivalently minimizing total 1 - IoU)
  double best_total = -1.0;
  std::vector<int> best_pick;
  for (int p0 = 0; p0 < 3; ++p0) {
    for (int p1 = 0; p1 < 3; ++p1) {
      if (p0 == p1) continue;
      const double total =
          mask_iou(three.masks[p0], regions[0]) + mask_iou(three.masks[p1], regions[1]);
      if (total > best_total) {
        best_total = total;
        best_pick = {p0, p1};
      }
    }
  }
  double got_total = 0.0;
  for (const auto& pair : got.matched) got_total += pair.iou;
  CHECK(got_total == doctest::Approx(best_total).epsilon(1e-12));
  for (const auto& pair : got.matched) {
    CHECK(static_cast<int>(pair.proposal) == best_pick[pair.region]);
  }

  // zero-overlap matches are demoted to unmatched
  RegionProposalSet stray;
  stray.masks = {box_mask(w, h, 0, 0, 4, 8)};
  const std::vector<std::vector<uint8_t>> far = {box_mask(w, h, 5, 0, 8, 8)};
  const CaMatch demoted = match_ca(stray, far);
  CHECK(demoted.matched.empty());
  CHECK(demoted.unmatched_proposals == std::vector<size_t>{0});
  CHECK(demoted.unmet_regions == std::vector<size_t>{0});
}

TEST_CASE("residual recall definitional cases") {
  CHECK(residual_recall({}, 10, 10) == 0.0);

  const std::vector<uint8_t> full(100, 1);
  CHECK(residual_recall({full}, 10, 10) == 1.0);

  // masks of 10 and 8 pixels sharing 3: union 15 of 100 -> 0.15
  std::vector<uint8_t> a(100, 0), b(100, 0);
  for (size_t i = 0; i < 10; ++i) a[i] = 1;
  for (size_t i = 7; i < 15; ++i) b[i] = 1;
  CHECK(residual_recall({a, b}, 10, 10) == doctest::Approx(0.15).epsilon(1e-15));

  // monotone: adding an unmatched mask never decreases resR
  Rng rng(7);
  std::vector<std::vector<uint8_t>> masks;
  double last = 0.0;
  for (int round = 0; round < 12; ++round) {
    std::vector<uint8_t> m(100, 0);
    for (int k = 0; k < 9; ++k) m[rng.uniform_int(100)] = 1;
    masks.push_back(m);
    const double now = residual_recall(masks, 10, 10);
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("precision and recall per matched pair") {
  const size_t w = 5, h = 5;
  const std::vector<std::vector<uint8_t>> regions = {box_mask(w, h, 1, 1, 4, 4)};  // 9 px

  // proposal strictly containing the region: recall 1, precision |G|/|P|
  RegionProposalSet superset;
  superset.masks = {box_mask(w, h, 0, 0, 5, 5)};  // 25 px
  Taxonomy tax = small_taxonomy(1, 4);

  Evaluator ev(tax);
  LabelMap gt = make_labels(w, h, std::vector<uint16_t>(w * h, 0));
  for (size_t y = 1; y < 4; ++y) {
    for (size_t x = 1; x < 4; ++x) gt.at(x, y) = 1;  // region 0 (code 1)
  }
  LabelMap pred = make_labels(w, h, std::vector<uint16_t>(w * h, 1));
  ev.add_image(pred, gt);
  MetricsReport rep = ev.report();
  CHECK(rep.ca_mrec == doctest::Approx(1.0));
  CHECK(rep.ca_mpre == doctest::Approx(9.0 / 25.0));
  CHECK(rep.ca_iou.at("terrain_0") == doctest::Approx(9.0 / 25.0));

  // hand 5x5 case: proposal covers 6 of 9 region pixels plus 2 outside
  Evaluator ev2(tax);
  LabelMap pred2 = make_labels(w, h, std::vector<uint16_t>(w * h, 0));
  for (size_t y = 1; y < 3; ++y) {
    for (size_t x = 1; x < 4; ++x) pred2.at(x, y) = 1;  // 6 inside
  }
  pred2.at(0, 0) = 1;
  pred2.at(4, 4) = 1;  // 2 outside
  ev2.add_image(pred2, gt);
  MetricsReport rep2 = ev2.report();
  CHECK(rep2.ca_mrec == doctest::Approx(6.0 / 9.0));
  CHECK(rep2.ca_mpre == doctest::Approx(6.0 / 8.0));
}

TEST_CASE("evaluate ground truth against itself on generated scenes") {
  GenConfig cfg = GenConfig::defaults();
  cfg.seed = 4242;
  const Taxonomy tax = cfg.taxonomy();
  Evaluator ev(tax);
  for (size_t i = 0; i < 24; ++i) {
    const Scene scene = generate_scene(cfg, cfg.seed + i);
    ev.add_image(scene.labels, scene.labels, scene.region_names);
  }
  const MetricsReport rep = ev.report();
  for (const auto& [name, iou] : rep.cs_iou) CHECK(iou == 1.0);
  for (const auto& [name, iou] : rep.ca_iou) CHECK(iou == 1.0);
  CHECK(rep.cs_miou == 1.0);
  CHECK(rep.ca_miou == 1.0);
  CHECK(rep.ca_mpre == 1.0);
  CHECK(rep.ca_mrec == 1.0);
  CHECK(rep.res_r == 0.0);
  CHECK(rep.per_image_res_r.size() == 24);
}

TEST_CASE("all-void predictions zero every metric") {
  GenConfig cfg = GenConfig::defaults();
  const Taxonomy tax = cfg.taxonomy();
  const Scene scene = generate_scene(cfg, 9);
  LabelMap voided = scene.labels;
  std::fill(voided.codes.begin(), voided.codes.end(), kVoidLabel);

  Evaluator ev(tax);
  ev.add_image(voided, scene.labels, scene.region_names);
  const MetricsReport rep = ev.report();
  CHECK(rep.cs_miou == 0.0);
  CHECK(rep.ca_miou == 0.0);
  CHECK(rep.ca_mpre == 0.0);
  CHECK(rep.ca_mrec == 0.0);
  CHECK(rep.res_r == 0.0);
}

TEST_CASE("report is invariant to proposal order") {
  GenConfig cfg = GenConfig::defaults();
  const Taxonomy tax = cfg.taxonomy();
  const Scene scene = generate_scene(cfg, 17);

  // degrade GT into an imperfect prediction so matching is non-trivial:
  // swap two region labels on part of the image and blank a stripe to a
  // fresh region id
  LabelMap pred = scene.labels;
  const size_t num_cs = tax.num_cs();
  const auto regions = region_ids(scene.labels, tax);
  REQUIRE(regions.size() >= 2);
  for (size_t i = 0; i < pred.size() / 2; ++i) {
    if (pred.codes[i] == num_cs) pred.codes[i] = static_cast<uint16_t>(num_cs + 1);
  }
  for (size_t i = 0; i < pred.width * 3; ++i) {
    pred.codes[i] = static_cast<uint16_t>(num_cs + regions.size());
  }

  // reorder proposal identities by permuting region codes in the prediction
  LabelMap shuffled = pred;
  const auto pred_regions = region_ids(pred, tax);
  for (auto& code : shuffled.codes) {
    if (code < num_cs || code == kVoidLabel) continue;
    const size_t r = code - num_cs;
    // rotate region ids
    size_t pos = 0;
    for (size_t i = 0; i < pred_regions.size(); ++i) {
      if (pred_regions[i] == r) pos = i;
    }
    shuffled.codes[&code - shuffled.codes.data()] =
        static_cast<uint16_t>(num_cs + pred_regions[(pos + 1) % pred_regions.size()]);
  }

  Evaluator ev_a(tax), ev_b(tax);
  ev_a.add_image(pred, scene.labels, scene.region_names);
  ev_b.add_image(shuffled, scene.labels, scene.region_names);
  const MetricsReport ra = ev_a.report();
  const MetricsReport rb = ev_b.report();
  CHECK(ra.ca_miou == doctest::Approx(rb.ca_miou).epsilon(1e-12));
  CHECK(ra.ca_mpre == doctest::Approx(rb.ca_mpre).epsilon(1e-12));
  CHECK(ra.ca_mrec == doctest::Approx(rb.ca_mrec).epsilon(1e-12));
  CHECK(ra.res_r == doctest::Approx(rb.res_r).epsilon(1e-12));
}

TEST_CASE("json report carries the stable key set") {
  const Taxonomy tax = small_taxonomy(1, 2);
  Evaluator ev(tax);
  const LabelMap gt = make_labels(2, 2, {0, 0, 1, 1});
  ev.add_image(gt, gt);
  const std::string json = ev.report().to_json();
  for (const char* key :
       {"cs_iou", "cs_miou", "ca_iou", "ca_miou", "ca_mpre", "ca_mrec", "res_r"}) {
    CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
  }
}

TEST_CASE("argmax proposals equal proposals read back from the prediction map") {
  Rng rng(808);
  const size_t num_cs = 3, slots = 5, h = 6, w = 7;
  Taxonomy tax = small_taxonomy(num_cs, slots);
  std::vector<double> logits((num_cs + slots) * h * w);
  for (auto& v : logits) v = rng.normal() * 3.0;
  const Tensor t({num_cs + slots, h, w}, logits);

  const RegionProposalSet direct = extract_ca_proposals(t, num_cs);
  const RegionProposalSet via_map = proposals_from_labels(prediction_from_logits(t), tax);
  REQUIRE(direct.masks.size() == via_map.masks.size());
  for (size_t i = 0; i < direct.masks.size(); ++i) CHECK(direct.masks[i] == via_map.masks[i]);
}
