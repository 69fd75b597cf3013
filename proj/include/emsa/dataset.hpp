#pragma once

// On-disk dataset layout:
//
//   <root>/<split>/split.json                 {"split": ..., "samples": [ids]}
//   <root>/<split>/<id>/rgb.png               8-bit RGB
//   <root>/<split>/<id>/depth.png             16-bit, millimetres, 0 = invalid
//   <root>/<split>/<id>/semantic.png          8-bit, 0 = void
//   <root>/<split>/<id>/instance.png          16-bit, 0 = no instance
//   <root>/<split>/<id>/orientations.csv      instance_id,angle_deg (optional)
//   <root>/<split>/<id>/scene.txt             scene class id

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emsa/instance_codec.hpp"
#include "emsa/label_map.hpp"
#include "emsa/orientation.hpp"
#include "emsa/png_io.hpp"
#include "emsa/spectrum.hpp"
#include "emsa/tensor.hpp"

namespace emsa {

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { missing_file, corrupt_file, extent_mismatch, unknown_id, contract_violation };

  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Sample {
  std::string id;
  Tensor rgb;    // 3 x H x W in [0, 1]
  Tensor depth;  // 1 x H x W, metres
  LabelMap semantic;
  LabelMap instance;
  OrientationMap orientations;
  std::int32_t scene = 0;

  std::size_t height() const { return semantic.height; }
  std::size_t width() const { return semantic.width; }
};

struct SampleRecord {
  std::string id;
  std::filesystem::path rgb, depth, semantic, instance, orientations, scene;

  static SampleRecord in_directory(const std::filesystem::path& dir) {
    return {dir.filename().string(), dir / "rgb.png",      dir / "depth.png",
            dir / "semantic.png",    dir / "instance.png", dir / "orientations.csv",
            dir / "scene.txt"};
  }
};

// ------------------------------------------------------------- label PNGs

inline LabelMap read_label_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DatasetError(DatasetError::Kind::missing_file, "missing " + path.string());
  }
  Image img;
  try {
    img = read_png(path);
  } catch (const PngError& e) {
    throw DatasetError(DatasetError::Kind::corrupt_file, e.what());
  }
  if (img.channels != 1) {
    throw DatasetError(DatasetError::Kind::corrupt_file, path.string() + ": expected one channel");
  }
  LabelMap m(img.height, img.width);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = img.samples[i];
  return m;
}

inline void write_label_png(const std::filesystem::path& path, const LabelMap& m, int bit_depth) {
  const std::int32_t max_v = bit_depth == 8 ? 255 : 65535;
  Image img{m.height, m.width, 1, bit_depth, std::vector<std::uint16_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.data[i] < 0 || m.data[i] > max_v) {
      throw DatasetError(DatasetError::Kind::contract_violation,
                         "label " + std::to_string(m.data[i]) + " does not fit " +
                             std::to_string(bit_depth) + "-bit PNG " + path.string());
    }
    img.samples[i] = static_cast<std::uint16_t>(m.data[i]);
  }
  write_png(path, img);
}

// ------------------------------------------------------------- orientation CSV

inline void write_orientations_csv(const std::filesystem::path& path, const OrientationMap& o) {
  std::ofstream os(path);
  if (!os) throw DatasetError(DatasetError::Kind::missing_file, "cannot write " + path.string());
  os << "instance_id,angle_deg\n" << std::setprecision(17);
  for (const auto& [id, a] : o) os << id << ',' << a.degrees() << '\n';
}

inline OrientationMap read_orientations_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError(DatasetError::Kind::missing_file, "missing " + path.string());
  OrientationMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line.rfind("instance_id", 0) == 0) continue;
    std::istringstream ls(line);
    std::int32_t id = 0;
    char comma = 0;
    double deg = 0.0;
    if (!(ls >> id >> comma >> deg) || comma != ',' || !std::isfinite(deg)) {
      throw DatasetError(DatasetError::Kind::corrupt_file,
                         path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    out[id] = Angle(deg);
  }
  return out;
}

// ------------------------------------------------------------- samples

inline void save_sample(const std::filesystem::path& dir, const Sample& s) {
  std::filesystem::create_directories(dir);
  const std::size_t H = s.height(), W = s.width();
  Image rgb{H, W, 3, 8, std::vector<std::uint16_t>(H * W * 3)};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < H * W; ++i) {
      const float v = std::clamp(s.rgb.plane(0, c)[i], 0.0f, 1.0f);
      rgb.samples[i * 3 + c] = static_cast<std::uint16_t>(std::lround(v * 255.0f));
    }
  write_png(dir / "rgb.png", rgb);
  Image depth{H, W, 1, 16, std::vector<std::uint16_t>(H * W)};
  for (std::size_t i = 0; i < H * W; ++i) {
    const double mm = std::round(double(s.depth[i]) * 1000.0);
    depth.samples[i] = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
  }
  write_png(dir / "depth.png", depth);
  write_label_png(dir / "semantic.png", s.semantic, 8);
  write_label_png(dir / "instance.png", s.instance, 16);
  if (!s.orientations.empty()) write_orientations_csv(dir / "orientations.csv", s.orientations);
  std::ofstream(dir / "scene.txt") << s.scene << '\n';
}

inline Sample load_sample(const SampleRecord& rec, const ClassSpectrum& spectrum,
                          const SceneSpectrum& scenes = SceneSpectrum::unified()) {
  using Kind = DatasetError::Kind;
  Sample s;
  s.id = rec.id;
  s.semantic = read_label_png(rec.semantic);
  s.instance = read_label_png(rec.instance);
  const std::size_t H = s.semantic.height, W = s.semantic.width;
  auto require_extents = [&](std::size_t h, std::size_t w, const std::filesystem::path& p) {
    if (h != H || w != W) {
      throw DatasetError(Kind::extent_mismatch, p.string() + " is " + std::to_string(h) + "x" +
                                                    std::to_string(w) + ", expected " +
                                                    std::to_string(H) + "x" + std::to_string(W));
    }
  };
  require_extents(s.instance.height, s.instance.width, rec.instance);

  for (const auto& [path, bits] : {std::pair{rec.rgb, 3}, std::pair{rec.depth, 1}}) {
    if (!std::filesystem::exists(path)) throw DatasetError(Kind::missing_file, "missing " + path.string());
  }
  Image rgb, depth;
  try {
    rgb = read_png(rec.rgb);
    depth = read_png(rec.depth);
  } catch (const PngError& e) {
    throw DatasetError(Kind::corrupt_file, e.what());
  }
  require_extents(rgb.height, rgb.width, rec.rgb);
  require_extents(depth.height, depth.width, rec.depth);
  if (rgb.channels != 3 || rgb.bit_depth != 8) {
    throw DatasetError(Kind::corrupt_file, rec.rgb.string() + ": expected 8-bit RGB");
  }
  if (depth.channels != 1 || depth.bit_depth != 16) {
    throw DatasetError(Kind::corrupt_file, rec.depth.string() + ": expected 16-bit gray");
  }
  s.rgb = Tensor({3, H, W});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < H * W; ++i)
      s.rgb.plane(0, c)[i] = float(rgb.samples[i * 3 + c]) / 255.0f;
  s.depth = Tensor({1, H, W});
  for (std::size_t i = 0; i < H * W; ++i) s.depth[i] = float(depth.samples[i]) / 1000.0f;

  for (auto id : s.semantic.data) {
    if (!spectrum.contains(id)) {
      throw DatasetError(Kind::unknown_id, rec.semantic.string() + ": semantic id " +
                                               std::to_string(id) + " outside spectrum");
    }
  }
  if (std::filesystem::exists(rec.orientations)) {
    s.orientations = read_orientations_csv(rec.orientations);
    std::set<std::int32_t> present(s.instance.data.begin(), s.instance.data.end());
    for (const auto& [id, a] : s.orientations) {
      if (id <= 0 || !present.contains(id)) {
        throw DatasetError(Kind::contract_violation,
                           rec.orientations.string() + ": instance " + std::to_string(id) +
                               " does not exist in the instance map");
      }
    }
  }
  if (std::filesystem::exists(rec.scene)) {
    std::ifstream is(rec.scene);
    if (!(is >> s.scene)) throw DatasetError(Kind::corrupt_file, rec.scene.string() + ": no scene id");
    if (!scenes.contains(s.scene)) {
      throw DatasetError(Kind::unknown_id, rec.scene.string() + ": scene id " +
                                               std::to_string(s.scene) + " outside spectrum");
    }
  }
  return s;
}

// ------------------------------------------------------------- splits

inline void write_split(const std::filesystem::path& split_dir, const std::string& split,
                        const std::vector<std::string>& ids) {
  std::filesystem::create_directories(split_dir);
  std::ofstream os(split_dir / "split.json");
  os << nlohmann::json{{"split", split}, {"samples", ids}}.dump(2) << '\n';
}

inline std::vector<std::string> read_split(const std::filesystem::path& split_dir) {
  const auto path = split_dir / "split.json";
  std::ifstream is(path);
  if (!is) throw DatasetError(DatasetError::Kind::missing_file, "missing " + path.string());
  try {
    return nlohmann::json::parse(is).at("samples").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(DatasetError::Kind::corrupt_file, path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------- synthetic scenes

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  double min_area_fraction = 0.0025;
  std::size_t min_center_separation = 9;  // Chebyshev pixels between rounded centers
  std::size_t max_attempts = 2000;
};

/// Stuff background (ceiling strip, wall, floor) with non-overlapping
/// rectangles and ellipses as thing instances. Deterministic per seed.
inline Sample synth_scene(std::uint64_t seed, std::size_t H, std::size_t W, std::size_t n_instances,
                          const ClassSpectrum& spectrum, const SynthOptions& opt = {}) {
  if (H < 16 || W < 16) throw SynthError("synthetic scenes need at least 16x16 pixels");
  std::mt19937_64 rng(seed);
  auto uniform_int = [&](std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  Sample s;
  s.id = "synth_" + std::to_string(seed);
  s.semantic = LabelMap(H, W);
  s.instance = LabelMap(H, W);

  const auto wall = spectrum.id_of("wall"), floor = spectrum.id_of("floor");
  const auto ceiling = spectrum.id_of("ceiling");
  const std::size_t horizon = uniform_int(H * 2 / 5, H * 3 / 5);
  const std::size_t ceiling_rows = uniform_int(0, 1) ? uniform_int(1, H / 8) : 0;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      s.semantic(r, c) = r < ceiling_rows ? ceiling : (r < horizon ? wall : floor);

  const auto things = spectrum.thing_ids();
  if (things.empty()) throw SynthError("spectrum has no thing classes");
  const auto min_area = static_cast<std::size_t>(std::ceil(opt.min_area_fraction * double(H * W)));
  std::vector<std::pair<long, long>> centers;
  std::size_t placed = 0, attempts = 0;
  while (placed < n_instances) {
    if (++attempts > opt.max_attempts) {
      throw SynthError("could not place " + std::to_string(n_instances) +
                       " non-overlapping instances in " + std::to_string(H) + "x" +
                       std::to_string(W));
    }
    const std::size_t h = uniform_int(std::max<std::size_t>(4, H / 16), std::max<std::size_t>(5, H / 3));
    const std::size_t w = uniform_int(std::max<std::size_t>(4, W / 16), std::max<std::size_t>(5, W / 3));
    const std::size_t r0 = uniform_int(0, H - h), c0 = uniform_int(0, W - w);
    const bool ellipse = uniform_int(0, 1) == 1;
    std::vector<std::size_t> pixels;
    for (std::size_t r = r0; r < r0 + h; ++r) {
      for (std::size_t c = c0; c < c0 + w; ++c) {
        if (ellipse) {
          const double dy = (double(r - r0) + 0.5) / double(h) * 2.0 - 1.0;
          const double dx = (double(c - c0) + 0.5) / double(w) * 2.0 - 1.0;
          if (dx * dx + dy * dy > 1.0) continue;
        }
        pixels.push_back(r * W + c);
      }
    }
    if (pixels.size() < min_area) continue;
    if (std::any_of(pixels.begin(), pixels.end(), [&](auto p) { return s.instance.data[p] != 0; })) {
      continue;
    }
    double sr = 0, sc = 0;
    for (auto p : pixels) {
      sr += double(p / W);
      sc += double(p % W);
    }
    const long cr = std::lround(sr / double(pixels.size()));
    const long cc = std::lround(sc / double(pixels.size()));
    const bool too_close = std::any_of(centers.begin(), centers.end(), [&](const auto& o) {
      return std::max(std::labs(o.first - cr), std::labs(o.second - cc)) <
             static_cast<long>(opt.min_center_separation);
    });
    if (too_close) continue;

    const auto id = static_cast<std::int32_t>(++placed);
    const auto cls = things[uniform_int(0, things.size() - 1)];
    for (auto p : pixels) {
      s.instance.data[p] = id;
      s.semantic.data[p] = cls;
    }
    centers.emplace_back(cr, cc);
    if (spectrum.is_orientation_relevant(cls)) {
      s.orientations[id] = Angle(double(uniform_int(0, 359)));
    }
  }
  s.scene = static_cast<std::int32_t>(uniform_int(1, 10));

  // Class-coloured RGB with deterministic texture; planar depth in whole mm.
  s.rgb = Tensor({3, H, W});
  s.depth = Tensor({1, H, W});
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t i = r * W + c;
      const auto cls = static_cast<std::uint32_t>(s.semantic.data[i]);
      const std::uint32_t noise = static_cast<std::uint32_t>(rng() & 15u);
      for (std::uint32_t ch = 0; ch < 3; ++ch) {
        const std::uint32_t v = (cls * (37u + 54u * ch) + noise) % 256u;
        s.rgb.plane(0, ch)[i] = float(v) / 255.0f;
      }
      std::uint32_t mm = r < horizon ? 4000u : 1000u + static_cast<std::uint32_t>(3000 * (H - r) / H);
      if (s.instance.data[i] != 0) mm = 1500u + 97u * static_cast<std::uint32_t>(s.instance.data[i]) % 2000u;
      s.depth[i] = float(mm) / 1000.0f;
    }
  }
  return s;
}

}  // namespace emsa
