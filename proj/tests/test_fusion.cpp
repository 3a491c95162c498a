#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rsmap/fusion.hpp"
#include "rsmap/synth.hpp"
#include "test_util.hpp"

namespace rsmap {
namespace {

CameraCalibration small_camera() {
  CameraCalibration c;
  c.f = 1.0;
  c.u0 = 4.5;
  c.v0 = 3.5;
  c.image_width = 10;
  c.image_height = 8;
  return c;
}

std::uint8_t id_of(const LabelMask& m, ElementClass cls) { return *label_of(m.class_table, cls); }

LabeledPoints make_labeled(std::vector<std::pair<ElementClass, Point3>> items,
                           Provenance prov = Provenance::kFromImage) {
  LabeledPoints out;
  for (const auto& [cls, p] : items) out.by_class[cls].push_back({p, prov, 0});
  return out;
}

LabeledPoints sorted(LabeledPoints lp) {
  for (auto& [cls, pts] : lp.by_class) sort_points(pts);
  return lp;
}

bool same_points(const LabeledPoints& a, const LabeledPoints& b) {
  for (auto cls : kMapClasses) {
    auto pa = a.points(cls), pb = b.points(cls);
    auto less = [](const Point3& l, const Point3& r) {
      return std::tie(l.x, l.y, l.z, l.intensity) < std::tie(r.x, r.y, r.z, r.intensity);
    };
    std::sort(pa.begin(), pa.end(), less);
    std::sort(pb.begin(), pb.end(), less);
    if (pa != pb) return false;
  }
  return true;
}

TEST(LabelByImage, AllBackgroundIsEmpty) {
  PointCloud cloud;
  cloud.points = {{0, 0, 1}, {0.5, 0.5, 2}};
  EXPECT_TRUE(label_by_image(cloud, make_label_mask(10, 8), small_camera()).empty());
}

TEST(LabelByImage, SinglePointOnStopLinePixel) {
  auto mask = make_label_mask(10, 8);
  mask.at(6, 3) = id_of(mask, ElementClass::kStopLine);
  PointCloud cloud;
  cloud.frame_id = 4;
  cloud.points = {{3.0, -1.0, 2.0}};  // u = 6.0, v = 3.0
  const auto out = label_by_image(cloud, mask, small_camera());
  ASSERT_EQ(out.count(ElementClass::kStopLine), 1u);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(out.by_class.at(ElementClass::kStopLine)[0].frame_id, 4u);
  EXPECT_EQ(out.by_class.at(ElementClass::kStopLine)[0].provenance, Provenance::kFromImage);
}

TEST(LabelByImage, HalfPixelRoundsUp) {
  auto mask = make_label_mask(10, 8);
  mask.at(6, 4) = id_of(mask, ElementClass::kLaneDivider);
  PointCloud cloud;
  cloud.points = {{1.5, 0.5, 1.0}};  // u = 6.0, v = 4.0 exactly
  cloud.points.push_back({1.0, 0.0, 1.0});  // u = 5.5 -> 6, v = 3.5 -> 4
  EXPECT_EQ(label_by_image(cloud, mask, small_camera()).count(ElementClass::kLaneDivider), 2u);
}

TEST(LabelByImage, DimensionMismatch) {
  PointCloud cloud;
  EXPECT_EQ(test::error_code_of([&] { label_by_image(cloud, make_label_mask(9, 8), small_camera()); }),
            ErrorCode::kDimensionMismatch);
}

TEST(LabelByImage, NeverLabelsUnimageablePoints) {
  auto mask = make_label_mask(10, 8);
  std::fill(mask.labels.begin(), mask.labels.end(), id_of(mask, ElementClass::kStopLine));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 20);
  PointCloud cloud;
  for (int i = 0; i < 5000; ++i) cloud.points.push_back({u(rng), u(rng), u(rng)});
  const auto cam = small_camera();
  const auto out = label_by_image(cloud, mask, cam);
  std::size_t expected = 0;
  for (const auto& p : cloud.points) {
    if (p.z <= kMinProjectionDepth) continue;
    const double col = std::floor(p.x / p.z + 4.5 + 0.5);
    const double row = std::floor(p.y / p.z + 3.5 + 0.5);
    if (col >= 0 && col < 10 && row >= 0 && row < 8) ++expected;
  }
  EXPECT_EQ(out.size(), expected);
  for (const auto& lp : out.by_class.at(ElementClass::kStopLine)) EXPECT_GT(lp.point.z, 0.0);
}

TEST(LabelByImage, PaintedStopLineThroughSceneCamera) {
  const SceneSpec spec;
  const CameraCalibration cam = scene_camera(spec);
  const GroundRect rect{20.0, -1.5, 20.2, 1.5};
  const std::vector<PaintPatch> paint{{ElementClass::kStopLine, 0, rect}};
  const LabelMask mask = render_mask(paint, cam);

  std::mt19937_64 rng(5);
  PointCloud cloud;
  cloud.points = test::uniform_points(rng, 2000, rect.x_min, rect.x_max, rect.y_min, rect.y_max);
  const auto out = label_by_image(cloud, mask, cam);
  EXPECT_GE(static_cast<double>(out.count(ElementClass::kStopLine)), 0.95 * 2000);
}

TEST(LabelByIntensity, Basics) {
  const GridSpec g{0, 0, 1, 1, 4, 4};
  PointCloud cloud;
  cloud.points = {{0.5, 0.5, 0}, {0.2, 0.9, 0}, {0.7, 0.1, 0}, {2.5, 2.5, 0}};
  auto seg = make_label_mask(4, 4);
  EXPECT_TRUE(label_by_intensity(cloud, g, seg).empty());
  seg.at(0, 0) = id_of(seg, ElementClass::kPedestrianCrossing);
  const auto out = label_by_intensity(cloud, g, seg);
  EXPECT_EQ(out.count(ElementClass::kPedestrianCrossing), 3u);
  EXPECT_EQ(out.size(), 3u);
  for (const auto& lp : out.by_class.at(ElementClass::kPedestrianCrossing)) {
    EXPECT_EQ(lp.provenance, Provenance::kFromIntensity);
  }
  EXPECT_EQ(test::error_code_of([&] { label_by_intensity(cloud, g, make_label_mask(3, 4)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(LabelByIntensity, RandomRecount) {
  const GridSpec g{-2, -2, 0.5, 0.5, 16, 12};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> lab(0, 3);
  auto seg = make_label_mask(g.cols, g.rows);
  for (auto& l : seg.labels) l = static_cast<std::uint8_t>(lab(rng));
  PointCloud cloud;
  cloud.points = test::uniform_points(rng, 3000, -3, 7, -3, 5);

  std::map<ElementClass, std::size_t> expected;
  for (const auto& p : cloud.points) {
    const int col = static_cast<int>(std::floor((p.x + 2) / 0.5));
    const int row = static_cast<int>(std::floor((p.y + 2) / 0.5));
    if (col < 0 || col >= g.cols || row < 0 || row >= g.rows) continue;
    const auto cls = element_of(seg.class_table, seg.at(col, row));
    if (cls != ElementClass::kBackground) ++expected[cls];
  }
  const auto out = label_by_intensity(cloud, g, seg);
  for (auto cls : kMapClasses) EXPECT_EQ(out.count(cls), expected[cls]);
  for (const auto& [cls, pts] : out.by_class) {
    for (const auto& lp : pts) {
      const auto idx = grid_index(lp.point, g);
      ASSERT_TRUE(idx);
      EXPECT_EQ(element_of(seg.class_table, seg.at(idx->col, idx->row)), cls);
    }
  }
}

TEST(Merge, IdentityAndDisjoint) {
  const auto x = make_labeled({{ElementClass::kStopLine, {1, 2, 0}}, {ElementClass::kStopLine, {0, 2, 0}}});
  const auto m = merge_labeled(x, LabeledPoints{});
  EXPECT_EQ(m.by_class, sorted(x).by_class);

  const auto y = make_labeled({{ElementClass::kLaneDivider, {1, 2, 0}}});
  const auto d = merge_labeled(x, y);
  EXPECT_EQ(d.count(ElementClass::kStopLine), 2u);
  EXPECT_EQ(d.count(ElementClass::kLaneDivider), 1u);
}

TEST(Merge, ClassTableMismatch) {
  LabeledPoints a, b;
  b.class_table[7] = {ElementClass::kStopLine, 7};
  EXPECT_EQ(test::error_code_of([&] { merge_labeled(a, b); }), ErrorCode::kClassTableMismatch);
}

TEST(Merge, DedupMatchesPairwiseOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> grid(0, 30);
  std::bernoulli_distribution coin(0.5);
  LabeledPoints a, b;
  std::vector<Point3> pa, pb;
  for (int i = 0; i < 200; ++i) {
    const Point3 p{grid(rng) * 0.1, grid(rng) * 0.1, 0};
    if (std::find(pa.begin(), pa.end(), p) == pa.end()) pa.push_back(p);
    const Point3 q{grid(rng) * 0.1, grid(rng) * 0.1, 0};
    if (std::find(pb.begin(), pb.end(), q) == pb.end()) pb.push_back(q);
  }
  for (const auto& p : pa) a.by_class[ElementClass::kLaneDivider].push_back({p, Provenance::kFromImage, 0});
  for (const auto& p : pb) {
    // Near-identical copies within tolerance count as the same point.
    const Point3 q{p.x + (coin(rng) ? 4e-10 : 0.0), p.y, p.z};
    b.by_class[ElementClass::kLaneDivider].push_back({q, Provenance::kFromIntensity, 0});
  }
  std::size_t shared = 0;
  for (const auto& p : pa)
    for (const auto& q : pb)
      if (std::abs(p.x - q.x) <= 1e-9 && std::abs(p.y - q.y) <= 1e-9) ++shared;

  const auto m = merge_labeled(a, b);
  EXPECT_EQ(m.count(ElementClass::kLaneDivider), pa.size() + pb.size() - shared);
  std::size_t merged = 0;
  for (const auto& lp : m.by_class.at(ElementClass::kLaneDivider)) merged += lp.provenance == Provenance::kMerged;
  EXPECT_EQ(merged, shared);
}

TEST(Merge, AlgebraicProperties) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> grid(0, 10), cls(1, 3);
  auto random_set = [&] {
    LabeledPoints lp;
    for (int i = 0; i < 60; ++i) {
      lp.by_class[static_cast<ElementClass>(cls(rng))].push_back(
          {{grid(rng) * 0.5, grid(rng) * 0.5, 0}, Provenance::kFromImage, 0});
    }
    return merge_labeled(lp, LabeledPoints{});
  };
  const auto a = random_set(), b = random_set(), c = random_set();
  EXPECT_EQ(merge_labeled(a, a).by_class, a.by_class);
  EXPECT_EQ(merge_labeled(a, b).by_class, merge_labeled(b, a).by_class);
  EXPECT_TRUE(same_points(merge_labeled(merge_labeled(a, b), c), merge_labeled(a, merge_labeled(b, c))));
  const auto ab = merge_labeled(a, b);
  for (auto k : kMapClasses) {
    EXPECT_GE(ab.count(k), a.count(k));
    EXPECT_GE(ab.count(k), b.count(k));
  }
}

TEST(Aggregate, FirstFramesAndErrors) {
  const auto f0 = make_labeled({{ElementClass::kStopLine, {1, 0, 0}}, {ElementClass::kStopLine, {0, 0, 0}}});
  const auto f1 = make_labeled({{ElementClass::kStopLine, {2, 0, 0}}});
  const std::vector<LabeledPoints> frames{f0, f1, f0};
  EXPECT_EQ(aggregate_frames(frames, 1).by_class, sorted(f0).by_class);
  EXPECT_EQ(aggregate_frames(frames, 2).size(), 3u);
  const std::vector<LabeledPoints> same{f0, f0};
  EXPECT_EQ(aggregate_frames(same, 2).by_class, sorted(f0).by_class);
  EXPECT_EQ(test::error_code_of([&] { aggregate_frames(frames, 4); }), ErrorCode::kFrameCountExceeded);
  EXPECT_EQ(test::error_code_of([&] { aggregate_frames(frames, 0); }), ErrorCode::kInvalidArgument);
}

TEST(Aggregate, CountNonDecreasingOnSyntheticSequence) {
  SceneSpec spec;
  spec.frame_count = 50;
  spec.region = {5.0, -32.5, 0.25, 0.25, 260, 260};
  const Scene scene = generate_scene(spec);
  std::vector<LabeledPoints> labeled;
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    labeled.push_back(label_by_image(scene.frames[i], scene.masks[i], scene.calib));
  }
  std::size_t prev = 0;
  for (std::size_t k = 1; k <= labeled.size(); k += 7) {
    const std::size_t n = aggregate_frames(labeled, k).size();
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(CheckSync, Tolerance) {
  EXPECT_NO_THROW(check_sync(1.0, 1.02, 0.02 + 1e-12));
  EXPECT_NO_THROW(check_sync(1.0, 0.99, 0.02));
  EXPECT_EQ(test::error_code_of([] { check_sync(1.0, 1.05, 0.02); }), ErrorCode::kSyncViolation);
}

}  // namespace
}  // namespace rsmap
