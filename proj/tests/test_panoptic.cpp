#include <gtest/gtest.h>

#include "emsa/emsa.hpp"

using namespace emsa;

namespace {

DetectedInstance instance(std::int32_t id, std::vector<std::size_t> pixels) {
  DetectedInstance d;
  d.id = id;
  d.pixels = std::move(pixels);
  return d;
}

const ClassSpectrum& spectrum() {
  static const ClassSpectrum s = nyuv2_40();
  return s;
}

constexpr std::int32_t kWall = 1, kChair = 5, kTable = 7, kLamp = 35;

}  // namespace

TEST(PanopticEncoding, RoundTrip) {
  PanopticMap p{LabelMap(1, 3, std::vector<std::int32_t>{0, 5, 40}),
                LabelMap(1, 3, std::vector<std::int32_t>{0, 17, 999})};
  const LabelMap e = encode_panoptic(p);
  EXPECT_EQ(e.data, (std::vector<std::int32_t>{0, 5017, 40999}));
  const PanopticMap back = decode_panoptic(e);
  EXPECT_EQ(back.semantic, p.semantic);
  EXPECT_EQ(back.instance, p.instance);
}

TEST(PanopticEncoding, InstanceIdMustFit) {
  PanopticMap p{LabelMap(1, 1, 5), LabelMap(1, 1, 1000)};
  EXPECT_THROW(encode_panoptic(p), std::invalid_argument);
}

TEST(ForegroundMask, ThingPixelsOnly) {
  const LabelMap sem(1, 4, std::vector<std::int32_t>{0, kWall, kChair, 22});
  const Mask m = foreground_mask(sem, spectrum());
  EXPECT_EQ(m.data, (std::vector<std::uint8_t>{0, 0, 1, 0}));
  EXPECT_THROW(foreground_mask(LabelMap(1, 1, 41), spectrum()), SpectrumError);
}

TEST(MajorityVote, TieGoesToLowerId) {
  const LabelMap sem(1, 4, std::vector<std::int32_t>{kTable, kChair, kTable, kChair});
  EXPECT_EQ(majority_vote(instance(1, {0, 1, 2, 3}), sem, spectrum()), kChair);
}

TEST(MajorityVote, StuffAndVoidDoNotVote) {
  const LabelMap sem(1, 4, std::vector<std::int32_t>{kWall, kWall, 0, kLamp});
  EXPECT_EQ(majority_vote(instance(1, {0, 1, 2, 3}), sem, spectrum()), kLamp);
  EXPECT_EQ(majority_vote(instance(1, {0, 1, 2}), sem, spectrum()), std::nullopt);
}

TEST(Merge, InstancePixelsTakeVotedClass) {
  const LabelMap sem(1, 5, std::vector<std::int32_t>{kChair, kChair, kTable, 0, kWall});
  std::vector<DetectedInstance> inst{instance(3, {0, 1, 2, 3, 4})};
  const PanopticMap p = merge(sem, inst, spectrum());
  EXPECT_EQ(p.semantic.data, (std::vector<std::int32_t>{kChair, kChair, kChair, kChair, kWall}));
  EXPECT_EQ(p.instance.data, (std::vector<std::int32_t>{3, 3, 3, 3, 0}));
  EXPECT_EQ(inst[0].semantic_class, kChair);
}

TEST(Merge, UnvotedInstanceReleasesPixels) {
  const LabelMap sem(1, 3, std::vector<std::int32_t>{kWall, kWall, kChair});
  std::vector<DetectedInstance> inst{instance(1, {0, 1}), instance(2, {2})};
  const PanopticMap p = merge(sem, inst, spectrum());
  EXPECT_EQ(p.semantic, sem);
  EXPECT_EQ(p.instance.data, (std::vector<std::int32_t>{0, 0, 2}));
  EXPECT_FALSE(inst[0].semantic_class);
}

TEST(Merge, ThingPixelsOutsideInstancesKeepIdZero) {
  const LabelMap sem(1, 3, std::vector<std::int32_t>{kChair, kChair, kChair});
  std::vector<DetectedInstance> inst{instance(1, {0})};
  const PanopticMap p = merge(sem, inst, spectrum());
  EXPECT_EQ(p.instance.data, (std::vector<std::int32_t>{1, 0, 0}));
}

TEST(Merge, OverlapAndUnknownClassRejected) {
  const LabelMap sem(1, 3, kChair);
  std::vector<DetectedInstance> overlap{instance(1, {0, 1}), instance(2, {1, 2})};
  EXPECT_THROW(merge(sem, overlap, spectrum()), std::invalid_argument);
  std::vector<DetectedInstance> none;
  EXPECT_THROW(merge(LabelMap(1, 1, 99), none, spectrum()), SpectrumError);
}

TEST(AssignOrientations, OnlyRelevantClasses) {
  const LabelMap sem(1, 4, std::vector<std::int32_t>{kChair, kChair, kLamp, kLamp});
  std::vector<DetectedInstance> inst{instance(1, {0, 1}), instance(2, {2, 3})};
  merge(sem, inst, spectrum());
  Tensor field({2, 1, 4});
  for (std::size_t i = 0; i < 4; ++i) field[4 + i] = 1.0f;  // 90 deg everywhere
  assign_orientations(inst, field, spectrum());
  ASSERT_TRUE(inst[0].orientation);
  EXPECT_NEAR(inst[0].orientation->degrees(), 90.0, 1e-9);
  EXPECT_FALSE(inst[1].orientation);
}
