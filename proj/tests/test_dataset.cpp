#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "emsa/emsa.hpp"

using namespace emsa;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("emsa_ds_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const ClassSpectrum& spectrum() {
  static const ClassSpectrum s = nyuv2_40();
  return s;
}

}  // namespace

TEST(LabelPng, RoundTrip8And16Bit) {
  TempDir tmp;
  LabelMap m(3, 5);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = std::int32_t(i * 17);
  write_label_png(tmp.path() / "a.png", m, 8);
  EXPECT_EQ(read_label_png(tmp.path() / "a.png"), m);
  m.data[3] = 65535;
  write_label_png(tmp.path() / "b.png", m, 16);
  EXPECT_EQ(read_label_png(tmp.path() / "b.png"), m);
  EXPECT_ANY_THROW(write_label_png(tmp.path() / "c.png", m, 8));
}

TEST(LabelPng, MissingAndCorrupt) {
  TempDir tmp;
  try {
    read_label_png(tmp.path() / "nope.png");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::missing_file);
  }
  std::ofstream(tmp.path() / "bad.png") << "not a png";
  try {
    read_label_png(tmp.path() / "bad.png");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::corrupt_file);
  }
}

TEST(OrientationsCsv, ExactRoundTrip) {
  TempDir tmp;
  const OrientationMap o{{1, Angle(0.1)}, {4, Angle(359.999999)}, {12, Angle(1.0 / 3.0)}};
  write_orientations_csv(tmp.path() / "o.csv", o);
  EXPECT_EQ(read_orientations_csv(tmp.path() / "o.csv"), o);
}

TEST(Split, RoundTrip) {
  TempDir tmp;
  write_split(tmp.path(), "train", {"b", "a"});
  EXPECT_EQ(read_split(tmp.path()), (std::vector<std::string>{"b", "a"}));
}

TEST(Sample, SaveLoadIsExact) {
  TempDir tmp;
  Sample s = synth_scene(5, 48, 64, 4, spectrum());
  s.id = "x";
  s.scene = 3;
  save_sample(tmp.path() / "x", s);
  const Sample back = load_sample(SampleRecord::in_directory(tmp.path() / "x"), spectrum());
  EXPECT_EQ(back.rgb, s.rgb);
  EXPECT_EQ(back.depth, s.depth);
  EXPECT_EQ(back.semantic, s.semantic);
  EXPECT_EQ(back.instance, s.instance);
  EXPECT_EQ(back.orientations, s.orientations);
  EXPECT_EQ(back.scene, 3);
}

TEST(Sample, ContractViolationsReported) {
  TempDir tmp;
  Sample s = synth_scene(6, 32, 32, 2, spectrum());
  const fs::path dir = tmp.path() / "s";
  save_sample(dir, s);
  const auto rec = SampleRecord::in_directory(dir);
  auto kind_of = [&] {
    try {
      load_sample(rec, spectrum());
    } catch (const DatasetError& e) {
      return e.kind();
    }
    throw std::logic_error("load succeeded");
  };

  write_orientations_csv(rec.orientations, {{77, Angle(5.0)}});
  EXPECT_EQ(kind_of(), DatasetError::Kind::contract_violation);
  fs::remove(rec.orientations);

  write_label_png(rec.instance, LabelMap(31, 32), 16);
  EXPECT_EQ(kind_of(), DatasetError::Kind::extent_mismatch);
  write_label_png(rec.instance, s.instance, 16);

  LabelMap bad = s.semantic;
  bad.data[0] = 200;
  write_label_png(rec.semantic, bad, 8);
  EXPECT_EQ(kind_of(), DatasetError::Kind::unknown_id);
  write_label_png(rec.semantic, s.semantic, 8);

  fs::remove(rec.depth);
  EXPECT_EQ(kind_of(), DatasetError::Kind::missing_file);
}

TEST(Synth, DeterministicPerSeed) {
  const Sample a = synth_scene(11, 64, 80, 5, spectrum());
  const Sample b = synth_scene(11, 64, 80, 5, spectrum());
  EXPECT_EQ(a.instance, b.instance);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_NE(synth_scene(12, 64, 80, 5, spectrum()).instance, a.instance);
}

TEST(Synth, InstancesAreThingsAboveMinAreaAndSeparated) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Sample s = synth_scene(seed, 96, 128, 8, spectrum());
    const auto centers = centers_of_mass(s.instance);
    ASSERT_FALSE(centers.empty());
    for (const auto& c : centers) EXPECT_GE(double(c.area), 0.0025 * 96 * 128);
    for (std::size_t i = 0; i < s.semantic.size(); ++i) {
      EXPECT_EQ(s.instance.data[i] != 0, spectrum().is_thing(s.semantic.data[i]));
    }
    for (std::size_t i = 0; i < centers.size(); ++i)
      for (std::size_t j = i + 1; j < centers.size(); ++j) {
        const double dr = std::abs(std::round(centers[i].row) - std::round(centers[j].row));
        const double dc = std::abs(std::round(centers[i].col) - std::round(centers[j].col));
        EXPECT_GE(std::max(dr, dc), 9.0);
      }
    for (const auto& [id, a] : s.orientations) {
      const auto it = std::find(s.instance.data.begin(), s.instance.data.end(), id);
      ASSERT_NE(it, s.instance.data.end());
      EXPECT_TRUE(spectrum().is_orientation_relevant(s.semantic.data[std::size_t(it - s.instance.data.begin())]));
    }
  }
}

TEST(Synth, TooSmallImageRejected) {
  EXPECT_THROW(synth_scene(1, 8, 8, 1, spectrum()), SynthError);
}

TEST(Spectrum, BundledFilesMatchBuiltins) {
  EXPECT_EQ(load_spectrum(fs::path(EMSA_DATA_DIR) / "spectra" / "nyuv2_40.json"), nyuv2_40());
  EXPECT_EQ(load_spectrum(fs::path(EMSA_DATA_DIR) / "spectra" / "sunrgbd_37.json"), sunrgbd_37());
  std::ifstream is(fs::path(EMSA_DATA_DIR) / "spectra" / "scenes.json");
  EXPECT_EQ(nlohmann::json::parse(is).get<SceneSpectrum>(), SceneSpectrum::unified());
}

TEST(Spectrum, ValidationRejectsOverlap) {
  ClassSpectrum s = nyuv2_40();
  s.orientation_relevant.insert(1);  // wall is stuff
  EXPECT_THROW(s.validate(), SpectrumError);
  ClassSpectrum sun = sunrgbd_37();
  EXPECT_EQ(sun.num_classes(), 37);
  EXPECT_NO_THROW(sun.validate());
}
