#include <doctest.h>

#include <algorithm>

#include "segcal/seg_metrics.hpp"
#include "support/oracles.hpp"

using namespace segcal;

namespace {

LabelMap row(std::vector<std::uint8_t> values) {
  LabelMap map;
  map.height = 1;
  map.width = static_cast<std::uint32_t>(values.size());
  map.data = std::move(values);
  return map;
}

}  // namespace

TEST_CASE("accumulate skips ignore pixels") {
  ConfusionMatrix cm(2);
  cm.accumulate(row({0, 1}), row({0, kIgnoreId}));
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.total() == 1);
}

TEST_CASE("hand example: gt=[0,0,1,1], pred=[0,1,1,1]") {
  ConfusionMatrix cm(2);
  cm.accumulate(row({0, 1, 1, 1}), row({0, 0, 1, 1}));
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.at(1, 0) == 0);

  const auto iou = cm.iou_per_class();
  REQUIRE(iou.size() == 2);
  CHECK(*iou[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(*iou[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cm.miou() == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
  CHECK(cm.pixel_accuracy() == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("empty accumulation stays all-zero and errors on metrics") {
  ConfusionMatrix cm(3);
  CHECK(cm.total() == 0);
  CHECK_THROWS_AS(cm.pixel_accuracy(), Error);
  CHECK_THROWS_AS(cm.miou(), Error);
}

TEST_CASE("perfect diagonal gives IoU 1 everywhere") {
  ConfusionMatrix cm(3);
  LabelMap same = row({0, 1, 2, 0, 1, 2});
  cm.accumulate(same, same);
  for (const auto& v : cm.iou_per_class()) CHECK(*v == 1.0);
  CHECK(cm.miou() == 1.0);
  CHECK(cm.pixel_accuracy() == 1.0);
}

TEST_CASE("class absent from gt and pred is excluded from the mean") {
  ConfusionMatrix cm(3);
  // Class 2 never appears anywhere; class 1 appears in gt but never predicted.
  cm.accumulate(row({0, 0, 0, 0}), row({0, 0, 0, 1}));
  const auto iou = cm.iou_per_class();
  CHECK(iou[0].has_value());
  CHECK(*iou[1] == 0.0);      // present in gt, never predicted: scores 0
  CHECK(!iou[2].has_value()); // absent from both: excluded
  CHECK(cm.miou() == doctest::Approx((0.75 + 0.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("single defined class: mIoU equals that IoU") {
  ConfusionMatrix cm(4);
  cm.accumulate(row({0, 1, 1, 1}), row({0, 0, 0, 0}));
  // class 0: diag 1, union 4 -> 0.25; class 1 predicted but absent in gt -> 0.
  const auto iou = cm.iou_per_class();
  CHECK(*iou[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(*iou[1] == 0.0);
  CHECK(!iou[2].has_value());
  CHECK(!iou[3].has_value());
}

TEST_CASE("all wrong predictions give pixel accuracy 0") {
  ConfusionMatrix cm(2);
  cm.accumulate(row({1, 1, 0}), row({0, 0, 1}));
  CHECK(cm.pixel_accuracy() == 0.0);
}

TEST_CASE("shape and class-range violations are rejected") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.accumulate(row({0}), row({0, 1})), Error);
  CHECK_THROWS_AS(cm.accumulate(row({5}), row({0})), Error);
  CHECK_THROWS_AS(cm.accumulate(row({0}), row({5})), Error);
  // Predictions must be real classes; the ignore id is not allowed there.
  CHECK_THROWS_AS(cm.accumulate(row({kIgnoreId}), row({0})), Error);
}

TEST_CASE("merge identity, commutativity, and the tiling law") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t classes = static_cast<std::uint32_t>(2 + rng.below(5));
    const std::uint32_t w = static_cast<std::uint32_t>(4 + rng.below(20));
    const LabelMap gt = testing::random_labelmap(rng, 2, w, classes, 0.15);
    const LabelMap pred = testing::random_labelmap(rng, 2, w, classes);

    ConfusionMatrix whole(classes);
    whole.accumulate(pred, gt);

    // merge(x, zero) == x
    ConfusionMatrix with_zero = whole;
    with_zero.merge(ConfusionMatrix(classes));
    CHECK(with_zero == whole);
    ConfusionMatrix zero_first(classes);
    zero_first.merge(whole);
    CHECK(zero_first == whole);

    // Split the pixel range at a random column into two tiles.
    const std::uint32_t cut = static_cast<std::uint32_t>(1 + rng.below(w - 1));
    auto tile = [&](const LabelMap& src, std::uint32_t x0, std::uint32_t x1) {
      LabelMap t;
      t.height = 2;
      t.width = x1 - x0;
      for (std::uint32_t y = 0; y < 2; ++y)
        for (std::uint32_t x = x0; x < x1; ++x) t.data.push_back(src.at(y, x));
      return t;
    };
    ConfusionMatrix left(classes), right(classes);
    left.accumulate(tile(pred, 0, cut), tile(gt, 0, cut));
    right.accumulate(tile(pred, cut, w), tile(gt, cut, w));

    ConfusionMatrix ab = left;
    ab.merge(right);
    ConfusionMatrix ba = right;
    ba.merge(left);
    CHECK(ab == whole);  // tiled == whole, exact integer equality
    CHECK(ba == whole);  // commutative
  }
}

TEST_CASE("ignore-only ground truth changes nothing") {
  ConfusionMatrix cm(3);
  cm.accumulate(row({0, 1, 2}), row({0, 1, 2}));
  const ConfusionMatrix before = cm;
  cm.accumulate(row({0, 1, 2}), row({kIgnoreId, kIgnoreId, kIgnoreId}));
  CHECK(cm == before);
}

TEST_CASE("iou is invariant under a simultaneous class permutation") {
  Rng rng(77);
  const std::uint32_t classes = 4;
  const LabelMap gt = testing::random_labelmap(rng, 4, 16, classes, 0.1);
  const LabelMap pred = testing::random_labelmap(rng, 4, 16, classes);

  // permutation 0->2, 1->0, 2->3, 3->1
  const std::array<std::uint8_t, 4> perm = {2, 0, 3, 1};
  auto apply = [&](const LabelMap& src) {
    LabelMap out = src;
    for (auto& v : out.data)
      if (v != kIgnoreId) v = perm[v];
    return out;
  };

  ConfusionMatrix a(classes), b(classes);
  a.accumulate(pred, gt);
  b.accumulate(apply(pred), apply(gt));

  const auto iou_a = a.iou_per_class();
  const auto iou_b = b.iou_per_class();
  for (std::uint32_t c = 0; c < classes; ++c) {
    REQUIRE(iou_a[c].has_value() == iou_b[perm[c]].has_value());
    if (iou_a[c]) CHECK(*iou_a[c] == *iou_b[perm[c]]);
  }
}

TEST_CASE("report serialization carries the spec'd keys") {
  ConfusionMatrix cm(2);
  cm.accumulate(row({0, 1, 1, 1}), row({0, 0, 1, 1}));
  const MetricReport report = make_report(cm);
  const std::string json = metric_report_json(report);
  CHECK(json.find("\"miou\"") != std::string::npos);
  CHECK(json.find("\"pixel_accuracy\"") != std::string::npos);
  CHECK(json.find("\"per_class_iou\"") != std::string::npos);
  CHECK(json.find("\"valid_pixels\":4") != std::string::npos);

  const std::string csv = metric_report_csv(report);
  CHECK(csv.find("miou,pixel_accuracy,valid_pixels") == 0);
}
