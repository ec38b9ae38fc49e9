#include <gtest/gtest.h>

#include "illumseg/errors.hpp"
#include "illumseg/segmenter.hpp"
#include "support.hpp"

namespace illumseg::seg {
namespace {

LabelMap label_row(const std::vector<double>& r, const Thresholds& t) {
  return threshold_phases(ScalarField(Shape{1, r.size()}, r), t);
}

TEST(Thresholds, Validation) {
  EXPECT_NO_THROW(Thresholds({0, 0.5, 1}));
  EXPECT_THROW(Thresholds({0, 1}), InvalidArgument);
  EXPECT_THROW(Thresholds({0.1, 0.5, 1}), InvalidArgument);
  EXPECT_THROW(Thresholds({0, 0.5, 0.5, 1}), InvalidArgument);
  EXPECT_THROW(Thresholds::from_interior({0.7, 0.3}), InvalidArgument);
  EXPECT_THROW(Thresholds::from_interior({0.0}), InvalidArgument);
  EXPECT_THROW(Thresholds::from_interior({1.0}), InvalidArgument);
  EXPECT_THROW(Thresholds::from_interior({}), InvalidArgument);
  EXPECT_THROW(Thresholds::uniform(1), InvalidArgument);
}

TEST(Thresholds, UniformAndInterior) {
  const Thresholds t = Thresholds::uniform(4);
  EXPECT_EQ(t.phases(), 4);
  EXPECT_EQ(t.rho(), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ(Thresholds::from_interior({0.55, 0.75}).interior(), (std::vector<double>{0.55, 0.75}));
}

TEST(ThresholdPhases, Examples) {
  EXPECT_EQ(label_row({0.1, 0.5, 0.9}, Thresholds({0, 0.5, 1})).labels, (std::vector<int>{1, 2, 2}));
  EXPECT_EQ(label_row({0.39, 0.4, 0.61}, Thresholds({0, 0.4, 0.6, 1})).labels, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(label_row({1.0}, Thresholds::uniform(5)).labels, (std::vector<int>{5}));
  EXPECT_EQ(label_row({0.0}, Thresholds::uniform(5)).labels, (std::vector<int>{1}));
  EXPECT_EQ(label_row({0.91}, Thresholds::from_interior({0.9})).labels, (std::vector<int>{2}));
}

TEST(ThresholdPhases, RejectsOutOfRange) {
  EXPECT_THROW(label_row({1.01}, Thresholds::uniform(2)), InvalidArgument);
  EXPECT_THROW(label_row({-0.01}, Thresholds::uniform(2)), InvalidArgument);
}

TEST(ThresholdPhases, PartitionAndMonotone) {
  Rng rng(1);
  ScalarField R(20, 15);
  for (double& v : R.values()) v = rng.uniform();
  const LabelMap map = threshold_phases(R, Thresholds::from_interior({0.2, 0.33, 0.8}));
  for (std::size_t a = 0; a < R.size(); ++a) {
    ASSERT_GE(map.labels[a], 1);
    ASSERT_LE(map.labels[a], 4);
    for (std::size_t b = 0; b < R.size(); ++b) {
      if (R[a] <= R[b]) ASSERT_LE(map.labels[a], map.labels[b]);
    }
  }
}

TEST(PhaseMask, PartitionProperties) {
  Rng rng(2);
  ScalarField R(9, 9);
  for (double& v : R.values()) v = rng.uniform();
  const LabelMap map = threshold_phases(R, Thresholds::uniform(3));
  std::vector<double> total(R.size(), 0.0);
  for (int k = 1; k <= 3; ++k) {
    const ScalarField m = phase_mask(map, k).to_field();
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_TRUE(m[j] == 0.0 || m[j] == 1.0);
      total[j] += m[j];
    }
  }
  for (double t : total) EXPECT_EQ(t, 1.0);
  EXPECT_THROW(phase_mask(map, 0), InvalidArgument);
  EXPECT_THROW(phase_mask(map, 4), InvalidArgument);
}

TEST(PhaseMask, SingleOccupiedPhaseIsAllOnes) {
  const LabelMap map = threshold_phases(ScalarField(4, 4, 0.1), Thresholds::uniform(2));
  for (const ScalarField f = phase_mask(map, 1).to_field(); double v : f.values()) EXPECT_EQ(v, 1.0);
}

TEST(Overlay, UniformMapLeavesBaseUntouched) {
  Rng rng(3);
  std::vector<double> gray(48);
  for (double& v : gray) v = rng.uniform();
  const RasterImage base(Shape{6, 8}, gray);
  const LabelMap map = threshold_phases(ScalarField(6, 8, 0.7), Thresholds::uniform(2));
  const RgbImage out = render_overlay(map, base);
  for (std::size_t k = 0; k < gray.size(); ++k) {
    const auto q = quantize_unit(gray[k]);
    EXPECT_EQ(out.pixels[k], (Rgb{q, q, q}));
  }
}

TEST(Overlay, HalfSplitGivesStraightBoundary) {
  ScalarField R(6, 8, 0.2);
  for (std::size_t j = 4; j < 8; ++j) {
    for (std::size_t i = 0; i < 6; ++i) R(i, j) = 0.8;
  }
  const LabelMap map = threshold_phases(R, Thresholds::uniform(2));
  const auto edge = boundary_pixels(map);
  for (std::size_t j = 0; j < 8; ++j) {
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(edge[j * 6 + i], j == 3 || j == 4) << i << "," << j;
  }
  const RgbImage out = render_overlay(map, RasterImage(Shape{6, 8}, std::vector<double>(48, 0.5)));
  EXPECT_EQ(out(2, 3), overlay_palette()[0]);
  EXPECT_EQ(out(2, 4), overlay_palette()[1]);
  EXPECT_EQ(out(2, 0), (Rgb{128, 128, 128}));
  EXPECT_THROW(render_overlay(map, RasterImage(Shape{8, 6}, std::vector<double>(48, 0.5))), InvalidArgument);
}

TEST(Overlay, BoundaryInvariantUnderRelabeling) {
  Rng rng(4);
  ScalarField R(10, 10);
  for (double& v : R.values()) v = rng.uniform();
  const LabelMap map = threshold_phases(R, Thresholds::uniform(3));
  LabelMap permuted = map;
  for (int& l : permuted.labels) l = 4 - l;
  EXPECT_EQ(boundary_pixels(map), boundary_pixels(permuted));
}

TEST(LabelGrayLevels, EvenlySpaced) {
  const LabelMap map = label_row({0.1, 0.5, 0.9}, Thresholds::uniform(3));
  EXPECT_EQ(label_gray_levels(map).vector(), (std::vector<double>{0.0, 0.5, 1.0}));
}

}  // namespace
}  // namespace illumseg::seg
