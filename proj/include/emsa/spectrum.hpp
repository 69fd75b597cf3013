#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace emsa {

class SpectrumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered semantic class list. Id 0 is void; ids 1..N are classes. Every
/// non-void class is either stuff or thing.
struct ClassSpectrum {
  std::string name;
  int version = 1;
  std::vector<std::string> classes;  // index == id, classes[0] is void
  std::set<std::int32_t> stuff;
  std::set<std::int32_t> orientation_relevant;
  std::set<std::int32_t> panoptic_excluded;  // skipped in PQ aggregation

  static constexpr std::int32_t void_id = 0;

  std::int32_t num_classes() const { return static_cast<std::int32_t>(classes.size()) - 1; }
  bool contains(std::int32_t id) const { return id >= 0 && id <= num_classes(); }
  bool is_void(std::int32_t id) const { return id == void_id; }
  bool is_stuff(std::int32_t id) const { return stuff.contains(id); }
  bool is_thing(std::int32_t id) const { return contains(id) && !is_void(id) && !is_stuff(id); }
  bool is_orientation_relevant(std::int32_t id) const {
    return orientation_relevant.contains(id);
  }

  std::vector<std::int32_t> thing_ids() const {
    std::vector<std::int32_t> out;
    for (std::int32_t id = 1; id <= num_classes(); ++id)
      if (is_thing(id)) out.push_back(id);
    return out;
  }

  std::int32_t id_of(const std::string& cls) const {
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) throw SpectrumError("unknown class name '" + cls + "'");
    return static_cast<std::int32_t>(it - classes.begin());
  }

  void validate() const {
    if (classes.size() < 3) throw SpectrumError("spectrum needs void plus >= 2 classes");
    auto check = [&](const std::set<std::int32_t>& ids, const char* what) {
      for (auto id : ids) {
        if (id <= 0 || id > num_classes()) {
          throw SpectrumError(std::string(what) + " id " + std::to_string(id) +
                              " outside spectrum");
        }
      }
    };
    check(stuff, "stuff");
    check(orientation_relevant, "orientation_relevant");
    check(panoptic_excluded, "panoptic_excluded");
    for (auto id : orientation_relevant) {
      if (is_stuff(id)) throw SpectrumError("orientation-relevant class cannot be stuff");
    }
  }

  friend bool operator==(const ClassSpectrum&, const ClassSpectrum&) = default;
};

inline void to_json(nlohmann::json& j, const ClassSpectrum& s) {
  auto names = [&](const std::set<std::int32_t>& ids) {
    std::vector<std::string> out;
    for (auto id : ids) out.push_back(s.classes.at(id));
    return out;
  };
  j = nlohmann::json{{"name", s.name},
                     {"version", s.version},
                     {"classes", s.classes},
                     {"stuff", names(s.stuff)},
                     {"orientation_relevant", names(s.orientation_relevant)},
                     {"panoptic_excluded", names(s.panoptic_excluded)}};
}

inline void from_json(const nlohmann::json& j, ClassSpectrum& s) {
  s.name = j.at("name").get<std::string>();
  s.version = j.value("version", 1);
  s.classes = j.at("classes").get<std::vector<std::string>>();
  auto ids = [&](const char* key) {
    std::set<std::int32_t> out;
    if (!j.contains(key)) return out;
    for (const auto& n : j.at(key)) out.insert(s.id_of(n.get<std::string>()));
    return out;
  };
  s.stuff = ids("stuff");
  s.orientation_relevant = ids("orientation_relevant");
  s.panoptic_excluded = ids("panoptic_excluded");
  s.validate();
}

/// NYUv2 40-class spectrum: wall, floor and ceiling are stuff.
inline ClassSpectrum nyuv2_40() {
  ClassSpectrum s;
  s.name = "nyuv2_40";
  s.version = 1;
  s.classes = {"void",           "wall",        "floor",          "cabinet",   "bed",
               "chair",          "sofa",        "table",          "door",      "window",
               "bookshelf",      "picture",     "counter",        "blinds",    "desk",
               "shelves",        "curtain",     "dresser",        "pillow",    "mirror",
               "floor mat",      "clothes",     "ceiling",        "books",     "refrigerator",
               "tv",             "paper",       "towel",          "shower curtain", "box",
               "whiteboard",     "person",      "nightstand",     "toilet",    "sink",
               "lamp",           "bathtub",     "bag",            "otherstructure",
               "otherfurniture", "otherprop"};
  s.stuff = {s.id_of("wall"), s.id_of("floor"), s.id_of("ceiling")};
  for (const char* n : {"cabinet", "bed", "chair", "sofa", "bookshelf", "shelves", "dresser",
                        "refrigerator", "tv", "person", "nightstand", "toilet"}) {
    s.orientation_relevant.insert(s.id_of(n));
  }
  return s;
}

/// SUNRGB-D 37-class spectrum: NYUv2-40 without the three filler classes;
/// floor mat and shower curtain are excluded from PQ aggregation.
inline ClassSpectrum sunrgbd_37() {
  ClassSpectrum s = nyuv2_40();
  s.name = "sunrgbd_37";
  s.classes.resize(38);
  s.panoptic_excluded = {s.id_of("floor mat"), s.id_of("shower curtain")};
  return s;
}

inline ClassSpectrum load_spectrum(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw SpectrumError("cannot open spectrum file " + path.string());
  try {
    return nlohmann::json::parse(is).get<ClassSpectrum>();
  } catch (const nlohmann::json::exception& e) {
    throw SpectrumError(path.string() + ": " + e.what());
  }
}

/// Unified scene classes; index 0 is void.
struct SceneSpectrum {
  std::vector<std::string> classes;

  static SceneSpectrum unified() {
    return {{"void", "bathroom", "bedroom", "dining room", "discussion room", "hallway",
             "kitchen", "living room", "office", "other indoor", "stairs"}};
  }

  std::int32_t num_classes() const { return static_cast<std::int32_t>(classes.size()) - 1; }
  bool contains(std::int32_t id) const { return id >= 0 && id <= num_classes(); }

  friend bool operator==(const SceneSpectrum&, const SceneSpectrum&) = default;
};

inline void to_json(nlohmann::json& j, const SceneSpectrum& s) {
  j = nlohmann::json{{"classes", s.classes}};
}

inline void from_json(const nlohmann::json& j, SceneSpectrum& s) {
  s.classes = j.at("classes").get<std::vector<std::string>>();
  if (s.classes.size() < 3 || s.classes.front() != "void") {
    throw SpectrumError("scene spectrum must start with void and have >= 2 classes");
  }
}

}  // namespace emsa
