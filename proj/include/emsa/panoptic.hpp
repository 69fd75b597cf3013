#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emsa/instance_codec.hpp"
#include "emsa/label_map.hpp"
#include "emsa/mask.hpp"
#include "emsa/orientation.hpp"
#include "emsa/spectrum.hpp"

namespace emsa {

/// Per-pixel (semantic id, instance id). Instance 0 marks stuff and
/// unknown thing pixels.
struct PanopticMap {
  LabelMap semantic;
  LabelMap instance;

  std::size_t height() const { return semantic.height; }
  std::size_t width() const { return semantic.width; }

  friend bool operator==(const PanopticMap&, const PanopticMap&) = default;
};

inline constexpr std::int32_t kPanopticDivisor = 1000;

/// Single-channel encoding: semantic * 1000 + instance.
inline LabelMap encode_panoptic(const PanopticMap& p) {
  require_same_extents(p.semantic, p.instance, "panoptic semantic vs instance");
  LabelMap out(p.height(), p.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto s = p.semantic.data[i], id = p.instance.data[i];
    if (id < 0 || id >= kPanopticDivisor) {
      throw std::invalid_argument("instance id " + std::to_string(id) +
                                  " does not fit the panoptic encoding (< 1000)");
    }
    if (s < 0) throw std::invalid_argument("negative semantic id");
    out.data[i] = s * kPanopticDivisor + id;
  }
  return out;
}

inline PanopticMap decode_panoptic(const LabelMap& encoded) {
  PanopticMap p{LabelMap(encoded.height, encoded.width), LabelMap(encoded.height, encoded.width)};
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded.data[i] < 0) throw std::invalid_argument("malformed panoptic value");
    p.semantic.data[i] = encoded.data[i] / kPanopticDivisor;
    p.instance.data[i] = encoded.data[i] % kPanopticDivisor;
  }
  return p;
}

inline void require_in_spectrum(const LabelMap& sem, const ClassSpectrum& spectrum) {
  for (auto id : sem.data) {
    if (!spectrum.contains(id)) {
      throw SpectrumError("semantic id " + std::to_string(id) + " not in spectrum '" +
                          spectrum.name + "'");
    }
  }
}

/// True exactly on thing-class pixels.
inline Mask foreground_mask(const LabelMap& sem, const ClassSpectrum& spectrum) {
  require_in_spectrum(sem, spectrum);
  Mask m(sem.height, sem.width);
  for (std::size_t i = 0; i < sem.size(); ++i) m.set(i, spectrum.is_thing(sem.data[i]));
  return m;
}

/// Most frequent thing class among the instance's pixels (void and stuff do
/// not vote, ties go to the lower id). nullopt: nothing voted, discard.
inline std::optional<std::int32_t> majority_vote(const DetectedInstance& inst,
                                                 const LabelMap& sem,
                                                 const ClassSpectrum& spectrum) {
  if (inst.pixels.empty()) throw std::invalid_argument("majority vote on empty instance");
  std::map<std::int32_t, std::size_t> votes;
  for (std::size_t p : inst.pixels) {
    if (p >= sem.size()) throw ShapeError("pixel", "instance pixel outside semantic map");
    const auto cls = sem.data[p];
    if (spectrum.is_thing(cls)) ++votes[cls];
  }
  std::optional<std::int32_t> best;
  std::size_t best_n = 0;
  for (const auto& [cls, n] : votes) {  // ascending ids
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  }
  return best;
}

/// Instance pixels take the voted class and the instance id; other pixels
/// keep their semantic prediction with id 0. Pixels predicted as stuff are
/// never overridden. Instances without a vote release their pixels.
/// `instances` get their semantic_class filled in.
inline PanopticMap merge(const LabelMap& sem, std::vector<DetectedInstance>& instances,
                         const ClassSpectrum& spectrum) {
  require_in_spectrum(sem, spectrum);
  PanopticMap out{sem, LabelMap(sem.height, sem.width)};
  std::vector<std::uint8_t> claimed(sem.size(), 0);
  for (auto& inst : instances) {
    for (std::size_t p : inst.pixels) {
      if (p >= sem.size()) throw ShapeError("pixel", "instance pixel outside semantic map");
      if (claimed[p]) {
        throw std::invalid_argument("instance " + std::to_string(inst.id) +
                                    " overlaps another instance");
      }
      claimed[p] = 1;
    }
  }
  for (auto& inst : instances) {
    if (inst.id <= 0) throw std::invalid_argument("instance ids must be positive");
    inst.semantic_class = majority_vote(inst, sem, spectrum);
    if (!inst.semantic_class) continue;
    for (std::size_t p : inst.pixels) {
      if (spectrum.is_stuff(sem.data[p])) continue;
      out.semantic.data[p] = *inst.semantic_class;
      out.instance.data[p] = inst.id;
    }
  }
  return out;
}

/// Circular-mean orientation for instances of orientation-relevant classes.
inline void assign_orientations(std::vector<DetectedInstance>& instances, const Tensor& field,
                                const ClassSpectrum& spectrum) {
  for (auto& inst : instances) {
    inst.orientation.reset();
    if (!inst.semantic_class || !spectrum.is_orientation_relevant(*inst.semantic_class)) {
      continue;
    }
    try {
      inst.orientation = instance_orientation(field, inst.pixels);
    } catch (const OrientationError&) {
      // undefined mean: leave unset
    }
  }
}

}  // namespace emsa
