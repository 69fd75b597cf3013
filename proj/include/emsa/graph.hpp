#pragma once

// Multi-task RGB-D encoder-decoder forward graph.
//
//   rgb ─ stem ─ stage1 ─ F ─ stage2 ─ F ─ stage3 ─ F ─ stage4 ─ F ─ context
//   depth ─ stem ─ stage1 ┘  stage2 ┘     stage3 ┘     stage4 ┘        │
//                                                                     ├─ scene FC (global branch)
//   semantic decoder: 3 x [3x3 conv, 3 NBt1D, learned x2 up, + skip] ─ head ─ up ─ up
//   instance decoder: same trunk ─ center / offset / orientation heads ─ up ─ up
//
// F is a squeeze-excitation weighted sum of both modalities. Skips come from
// the fused encoder features at 1/16, 1/8 and 1/4.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emsa/nbt1d.hpp"
#include "emsa/ops.hpp"
#include "emsa/tensor.hpp"
#include "emsa/tensor_io.hpp"

namespace emsa {

struct GraphConfig {
  std::size_t height = 480;
  std::size_t width = 640;
  std::size_t semantic_classes = 40;
  std::size_t scene_classes = 10;
  std::vector<std::size_t> encoder_channels{64, 64, 128, 256, 512};  // stem + 4 stages
  std::vector<std::size_t> encoder_blocks{3, 4, 6, 3};
  std::vector<std::size_t> decoder_channels{512, 256, 128};
  std::vector<std::size_t> context_pool_sizes{1, 2};  // must contain 1 (scene head)
  std::size_t se_reduction = 16;
  bool rgbd = true;
  bool learned_head_upsampling = true;  // false: fixed bilinear x2
  float dropout_rate = 0.1f;

  void validate() const {
    if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
      throw std::invalid_argument("input height and width must be positive multiples of 32");
    }
    if (semantic_classes < 2) throw std::invalid_argument("need >= 2 semantic classes");
    if (scene_classes < 2) throw std::invalid_argument("need >= 2 scene classes");
    if (encoder_channels.size() != 5 || encoder_blocks.size() != 4 ||
        decoder_channels.size() != 3) {
      throw std::invalid_argument("channel plan: 5 encoder, 4 block counts, 3 decoder entries");
    }
    for (auto c : encoder_channels)
      if (c == 0) throw std::invalid_argument("zero encoder channels");
    for (auto c : decoder_channels)
      if (c == 0) throw std::invalid_argument("zero decoder channels");
    for (auto b : encoder_blocks)
      if (b == 0) throw std::invalid_argument("every encoder stage needs a block");
    if (std::find(context_pool_sizes.begin(), context_pool_sizes.end(), 1) ==
        context_pool_sizes.end()) {
      throw std::invalid_argument("context module needs the global (1x1) branch");
    }
    for (auto s : context_pool_sizes) {
      if (s == 0 || s > height / 32 || s > width / 32) {
        throw std::invalid_argument("context pool size exceeds the 1/32 feature map");
      }
    }
    if (se_reduction == 0) throw std::invalid_argument("se_reduction must be >= 1");
  }

  std::size_t context_branch_channels() const { return std::max<std::size_t>(1, encoder_channels[4] / 4); }
};

inline void to_json(nlohmann::json& j, const GraphConfig& c) {
  j = nlohmann::json{{"height", c.height},
                     {"width", c.width},
                     {"semantic_classes", c.semantic_classes},
                     {"scene_classes", c.scene_classes},
                     {"encoder_channels", c.encoder_channels},
                     {"encoder_blocks", c.encoder_blocks},
                     {"decoder_channels", c.decoder_channels},
                     {"context_pool_sizes", c.context_pool_sizes},
                     {"se_reduction", c.se_reduction},
                     {"rgbd", c.rgbd},
                     {"learned_head_upsampling", c.learned_head_upsampling},
                     {"dropout_rate", c.dropout_rate}};
}

inline void from_json(const nlohmann::json& j, GraphConfig& c) {
  GraphConfig d;
  c.height = j.value("height", d.height);
  c.width = j.value("width", d.width);
  c.semantic_classes = j.value("semantic_classes", d.semantic_classes);
  c.scene_classes = j.value("scene_classes", d.scene_classes);
  c.encoder_channels = j.value("encoder_channels", d.encoder_channels);
  c.encoder_blocks = j.value("encoder_blocks", d.encoder_blocks);
  c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
  c.context_pool_sizes = j.value("context_pool_sizes", d.context_pool_sizes);
  c.se_reduction = j.value("se_reduction", d.se_reduction);
  c.rgbd = j.value("rgbd", d.rgbd);
  c.learned_head_upsampling = j.value("learned_head_upsampling", d.learned_head_upsampling);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
}

// ------------------------------------------------------------- weights

struct SqueezeExcite {
  Tensor fc1_weight;  // hidden x C
  std::vector<float> fc1_bias;
  Tensor fc2_weight;  // C x hidden
  std::vector<float> fc2_bias;
};

struct FusionWeights {
  SqueezeExcite rgb, depth;
};

struct EncoderWeights {
  ConvParams stem;
  NormParams stem_norm;
  std::vector<std::vector<NBt1DWeights>> stages;
};

struct ContextBranch {
  std::size_t pool_size = 1;
  ConvParams projection;
  NormParams norm;
};

struct ContextWeights {
  std::vector<ContextBranch> branches;
  ConvParams fuse;
  NormParams fuse_norm;
};

struct DecoderModuleWeights {
  ConvParams conv;
  NormParams norm;
  std::vector<NBt1DWeights> blocks;
  UpsampleParams upsample;
  ConvParams skip;  // 1x1 projection of the encoder skip feature
};

struct HeadWeights {
  ConvParams conv;
  UpsampleParams up1, up2;
};

struct Graph {
  GraphConfig config;
  EncoderWeights rgb_encoder, depth_encoder;
  std::vector<FusionWeights> fusion;  // one per encoder stage (RGB-D only)
  ContextWeights context;
  std::vector<DecoderModuleWeights> semantic_decoder, instance_decoder;
  std::vector<ConvParams> semantic_side;  // at 1/16 and 1/8
  HeadWeights semantic_head, center_head, offset_head, orientation_head;
  Tensor scene_weight;  // scene_classes x context branch channels
  std::vector<float> scene_bias;
};

struct ForwardOutputs {
  Tensor semantic;                    // C_sem x H x W logits
  std::vector<Tensor> semantic_side;  // 1/16, 1/8
  Tensor center;                      // 1 x H x W in [0, 1]
  Tensor offset;                      // 2 x H x W in [-1, 1]
  Tensor orientation;                 // 2 x H x W unit biternions
  Tensor scene;                       // C_scene logits
};

// ------------------------------------------------------------- parameter walk

enum class ParamRole {
  conv_weight,
  fusion_weight,
  fc_weight,
  bias,
  norm_gamma,
  residual_gamma,  // final norm of an NBt1D branch
  norm_beta,
  norm_mean,
  norm_var,
  upsample_kernel,
};

/// Visitor: fn(name, values, shape, role). Order is fixed, so seeded
/// initialization and archive layout are reproducible.
using ParamVisitor =
    std::function<void(const std::string&, std::span<float>, const Shape&, ParamRole)>;

namespace detail {

inline void visit_vec(const ParamVisitor& fn, const std::string& name, std::vector<float>& v,
                      ParamRole role) {
  if (!v.empty()) fn(name, v, Shape{v.size()}, role);
}

inline void visit_conv(const ParamVisitor& fn, const std::string& name, ConvParams& p,
                       ParamRole role = ParamRole::conv_weight) {
  fn(name + ".weight", p.weight.data(), p.weight.shape(), role);
  visit_vec(fn, name + ".bias", p.bias, ParamRole::bias);
}

inline void visit_norm(const ParamVisitor& fn, const std::string& name, NormParams& p,
                       ParamRole gamma_role = ParamRole::norm_gamma) {
  visit_vec(fn, name + ".gamma", p.gamma, gamma_role);
  visit_vec(fn, name + ".beta", p.beta, ParamRole::norm_beta);
  visit_vec(fn, name + ".mean", p.mean, ParamRole::norm_mean);
  visit_vec(fn, name + ".var", p.var, ParamRole::norm_var);
}

inline void visit_nbt1d(const ParamVisitor& fn, const std::string& name, NBt1DWeights& b) {
  visit_conv(fn, name + ".conv31_a", b.conv31_a);
  visit_conv(fn, name + ".conv13_a", b.conv13_a);
  visit_norm(fn, name + ".norm_a", b.norm_a);
  visit_conv(fn, name + ".conv31_b", b.conv31_b);
  visit_conv(fn, name + ".conv13_b", b.conv13_b);
  visit_norm(fn, name + ".norm_b", b.norm_b, ParamRole::residual_gamma);
  if (b.projection) visit_conv(fn, name + ".projection", *b.projection);
  if (b.projection_norm) visit_norm(fn, name + ".projection_norm", *b.projection_norm);
}

inline void visit_upsample(const ParamVisitor& fn, const std::string& name, UpsampleParams& u) {
  fn(name + ".kernel", u.kernel.data(), u.kernel.shape(), ParamRole::upsample_kernel);
}

inline void visit_encoder(const ParamVisitor& fn, const std::string& name, EncoderWeights& e) {
  visit_conv(fn, name + ".stem", e.stem);
  visit_norm(fn, name + ".stem_norm", e.stem_norm);
  for (std::size_t s = 0; s < e.stages.size(); ++s)
    for (std::size_t b = 0; b < e.stages[s].size(); ++b)
      visit_nbt1d(fn, name + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b),
                  e.stages[s][b]);
}

inline void visit_se(const ParamVisitor& fn, const std::string& name, SqueezeExcite& se) {
  fn(name + ".fc1.weight", se.fc1_weight.data(), se.fc1_weight.shape(), ParamRole::fusion_weight);
  visit_vec(fn, name + ".fc1.bias", se.fc1_bias, ParamRole::bias);
  fn(name + ".fc2.weight", se.fc2_weight.data(), se.fc2_weight.shape(), ParamRole::fusion_weight);
  visit_vec(fn, name + ".fc2.bias", se.fc2_bias, ParamRole::bias);
}

inline void visit_decoder(const ParamVisitor& fn, const std::string& name,
                          std::vector<DecoderModuleWeights>& dec) {
  for (std::size_t m = 0; m < dec.size(); ++m) {
    const std::string base = name + ".module" + std::to_string(m + 1);
    visit_conv(fn, base + ".conv", dec[m].conv);
    visit_norm(fn, base + ".norm", dec[m].norm);
    for (std::size_t b = 0; b < dec[m].blocks.size(); ++b)
      visit_nbt1d(fn, base + ".block" + std::to_string(b), dec[m].blocks[b]);
    visit_upsample(fn, base + ".upsample", dec[m].upsample);
    visit_conv(fn, base + ".skip", dec[m].skip);
  }
}

inline void visit_head(const ParamVisitor& fn, const std::string& name, HeadWeights& h) {
  visit_conv(fn, name + ".conv", h.conv);
  visit_upsample(fn, name + ".up1", h.up1);
  visit_upsample(fn, name + ".up2", h.up2);
}

}  // namespace detail

inline void visit_parameters(Graph& g, const ParamVisitor& fn) {
  using namespace detail;
  visit_encoder(fn, "rgb_encoder", g.rgb_encoder);
  if (g.config.rgbd) {
    visit_encoder(fn, "depth_encoder", g.depth_encoder);
    for (std::size_t i = 0; i < g.fusion.size(); ++i) {
      const std::string base = "fusion" + std::to_string(i + 1);
      visit_se(fn, base + ".rgb", g.fusion[i].rgb);
      visit_se(fn, base + ".depth", g.fusion[i].depth);
    }
  }
  for (std::size_t b = 0; b < g.context.branches.size(); ++b) {
    const std::string base = "context.branch" + std::to_string(b);
    visit_conv(fn, base + ".projection", g.context.branches[b].projection);
    visit_norm(fn, base + ".norm", g.context.branches[b].norm);
  }
  visit_conv(fn, "context.fuse", g.context.fuse);
  visit_norm(fn, "context.fuse_norm", g.context.fuse_norm);
  visit_decoder(fn, "semantic_decoder", g.semantic_decoder);
  visit_decoder(fn, "instance_decoder", g.instance_decoder);
  for (std::size_t i = 0; i < g.semantic_side.size(); ++i)
    visit_conv(fn, "semantic_side" + std::to_string(i), g.semantic_side[i]);
  visit_head(fn, "semantic_head", g.semantic_head);
  visit_head(fn, "center_head", g.center_head);
  visit_head(fn, "offset_head", g.offset_head);
  visit_head(fn, "orientation_head", g.orientation_head);
  fn("scene.weight", g.scene_weight.data(), g.scene_weight.shape(), ParamRole::fc_weight);
  detail::visit_vec(fn, "scene.bias", g.scene_bias, ParamRole::bias);
}

inline void visit_parameters(const Graph& g,
                             const std::function<void(const std::string&, std::span<const float>,
                                                      const Shape&, ParamRole)>& fn) {
  visit_parameters(const_cast<Graph&>(g),
                   [&](const std::string& n, std::span<float> v, const Shape& s, ParamRole r) {
                     fn(n, v, s, r);
                   });
}

// ------------------------------------------------------------- construction

struct InitOptions {
  bool zero_init_residual = true;   // final NBt1D norm scale starts at 0
  bool bilinear_upsampling = true;  // learned upsamplings start as bilinear
  bool random_norm_statistics = false;
};

namespace detail {

inline EncoderWeights make_encoder(const GraphConfig& cfg, std::size_t in_channels) {
  EncoderWeights e;
  e.stem = make_conv(cfg.encoder_channels[0], in_channels, 7, 7, 2, 2);
  e.stem_norm = NormParams::identity(cfg.encoder_channels[0]);
  std::size_t c = cfg.encoder_channels[0];
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t out = cfg.encoder_channels[s + 1];
    std::vector<NBt1DWeights> blocks;
    for (std::size_t b = 0; b < cfg.encoder_blocks[s]; ++b) {
      const std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
      blocks.push_back(make_nbt1d(b == 0 ? c : out, out, stride));
      blocks.back().dropout_rate = cfg.dropout_rate;
    }
    e.stages.push_back(std::move(blocks));
    c = out;
  }
  return e;
}

inline SqueezeExcite make_se(std::size_t channels, std::size_t reduction) {
  const std::size_t hidden = std::max<std::size_t>(1, channels / reduction);
  return {Tensor({hidden, channels}), std::vector<float>(hidden, 0.0f),
          Tensor({channels, hidden}), std::vector<float>(channels, 0.0f)};
}

inline std::vector<DecoderModuleWeights> make_decoder(const GraphConfig& cfg) {
  std::vector<DecoderModuleWeights> dec;
  std::size_t in = cfg.encoder_channels[4];
  for (std::size_t m = 0; m < 3; ++m) {
    const std::size_t out = cfg.decoder_channels[m];
    DecoderModuleWeights d;
    d.conv = make_conv(out, in, 3, 3);
    d.norm = NormParams::identity(out);
    for (int b = 0; b < 3; ++b) {
      d.blocks.push_back(make_nbt1d(out, out, 1));
      d.blocks.back().dropout_rate = cfg.dropout_rate;
    }
    d.upsample = bilinear_upsample_params(out);
    // skips from the fused encoder stages at 1/16, 1/8, 1/4
    d.skip = make_conv(out, cfg.encoder_channels[3 - m], 1, 1);
    dec.push_back(std::move(d));
    in = out;
  }
  return dec;
}

inline HeadWeights make_head(std::size_t in, std::size_t out) {
  HeadWeights h;
  h.conv = make_conv(out, in, 3, 3);
  h.conv.bias.assign(out, 0.0f);
  h.up1 = bilinear_upsample_params(out);
  h.up2 = bilinear_upsample_params(out);
  return h;
}

}  // namespace detail

/// Graph with all weights allocated and zeroed (norms identity, upsamplings
/// bilinear).
inline Graph allocate_graph(const GraphConfig& cfg) {
  cfg.validate();
  using namespace detail;
  Graph g;
  g.config = cfg;
  g.rgb_encoder = make_encoder(cfg, 3);
  if (cfg.rgbd) {
    g.depth_encoder = make_encoder(cfg, 1);
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t c = cfg.encoder_channels[s + 1];
      g.fusion.push_back({make_se(c, cfg.se_reduction), make_se(c, cfg.se_reduction)});
    }
  }
  const std::size_t top = cfg.encoder_channels[4];
  const std::size_t branch_c = cfg.context_branch_channels();
  for (std::size_t s : cfg.context_pool_sizes) {
    g.context.branches.push_back({s, make_conv(branch_c, top, 1, 1), NormParams::identity(branch_c)});
  }
  g.context.fuse = make_conv(top, top + branch_c * cfg.context_pool_sizes.size(), 1, 1);
  g.context.fuse_norm = NormParams::identity(top);
  g.semantic_decoder = make_decoder(cfg);
  g.instance_decoder = make_decoder(cfg);
  g.semantic_side.push_back(make_conv(cfg.semantic_classes, cfg.decoder_channels[0], 1, 1));
  g.semantic_side.push_back(make_conv(cfg.semantic_classes, cfg.decoder_channels[1], 1, 1));
  for (auto& side : g.semantic_side) side.bias.assign(cfg.semantic_classes, 0.0f);
  const std::size_t trunk = cfg.decoder_channels[2];
  g.semantic_head = make_head(trunk, cfg.semantic_classes);
  g.center_head = make_head(trunk, 1);
  g.offset_head = make_head(trunk, 2);
  g.orientation_head = make_head(trunk, 2);
  g.scene_weight = Tensor({cfg.scene_classes, branch_c});
  g.scene_bias.assign(cfg.scene_classes, 0.0f);
  return g;
}

/// Seeded initialization: He-normal for convolutions, fusion and FC layers,
/// zero-initialized residual norms, bilinear upsampling kernels.
inline Graph build_graph(const GraphConfig& cfg, const InitOptions& init = {},
                         std::uint64_t seed = 0) {
  Graph g = allocate_graph(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  visit_parameters(g, [&](const std::string&, std::span<float> v, const Shape& shape,
                          ParamRole role) {
    switch (role) {
      case ParamRole::conv_weight:
      case ParamRole::fusion_weight:
      case ParamRole::fc_weight: {
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
        const float std_dev = std::sqrt(2.0f / float(fan_in));
        for (float& x : v) x = normal(rng) * std_dev;
        break;
      }
      case ParamRole::bias:
      case ParamRole::norm_beta:
      case ParamRole::norm_mean:
        for (float& x : v) x = init.random_norm_statistics ? 0.1f * normal(rng) : 0.0f;
        break;
      case ParamRole::norm_var:
        for (float& x : v) x = init.random_norm_statistics ? 0.5f + uniform(rng) : 1.0f;
        break;
      case ParamRole::norm_gamma:
        for (float& x : v) x = init.random_norm_statistics ? 0.5f + 0.5f * uniform(rng) : 1.0f;
        break;
      case ParamRole::residual_gamma:
        for (float& x : v) x = init.zero_init_residual ? 0.0f : 0.5f * uniform(rng);
        break;
      case ParamRole::upsample_kernel:
        if (!init.bilinear_upsampling) {
          for (float& x : v) x = 0.125f + 0.125f * normal(rng);
        }
        break;
    }
  });
  return g;
}

// ------------------------------------------------------------- forward

/// Per-channel squeeze-excitation gate in (0, 1).
inline std::vector<float> se_gate(const Tensor& x, const SqueezeExcite& se) {
  const Tensor pooled = global_avg_pool(x).reshaped({x.channels()});
  const Tensor hidden = relu(fully_connected(pooled, se.fc1_weight, se.fc1_bias));
  const Tensor gate = sigmoid(fully_connected(hidden, se.fc2_weight, se.fc2_bias));
  return {gate.data().begin(), gate.data().end()};
}

inline Tensor scale_channels(Tensor x, const std::vector<float>& scale) {
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (float& v : x.plane(n, c)) v *= scale[c];
  return x;
}

/// gate_rgb(rgb) * rgb + gate_depth(depth) * depth.
inline Tensor fuse_attention(const Tensor& rgb, const Tensor& depth, const FusionWeights& w) {
  if (rgb.shape() != depth.shape()) {
    throw ShapeError("shape", "fusion operands differ: " + to_string(rgb.shape()) + " vs " +
                                  to_string(depth.shape()));
  }
  if (rgb.rank() != 3) throw ShapeError("rank", "fusion expects C x H x W features");
  return add(scale_channels(rgb, se_gate(rgb, w.rgb)),
             scale_channels(depth, se_gate(depth, w.depth)));
}

inline Tensor encoder_stem(const Tensor& x, const EncoderWeights& e) {
  Tensor t = conv2d(x, e.stem);
  batch_norm_inplace(t, e.stem_norm);
  return pool2d(relu(std::move(t)), PoolKind::max, 3, 2, 1);
}

inline Tensor run_blocks(Tensor x, const std::vector<NBt1DWeights>& blocks) {
  for (const auto& b : blocks) x = nbt1d_block(x, b);
  return x;
}

struct ContextOutput {
  Tensor features;
  Tensor global_branch;  // channels of the 1x1 pooled branch, flattened
};

inline ContextOutput context_module(const Tensor& x, const ContextWeights& w) {
  const std::size_t H = x.height(), W = x.width();
  std::vector<Tensor> branches;
  ContextOutput out;
  for (const auto& b : w.branches) {
    Tensor t = conv2d(adaptive_avg_pool(x, b.pool_size, b.pool_size), b.projection);
    batch_norm_inplace(t, b.norm);
    t = relu(std::move(t));
    if (b.pool_size == 1) out.global_branch = t.reshaped({t.channels()});
    branches.push_back(resize_bilinear(t, H, W));
  }
  std::vector<const Tensor*> parts{&x};
  for (const auto& b : branches) parts.push_back(&b);
  Tensor fused = conv2d(concat_channels(parts), w.fuse);
  batch_norm_inplace(fused, w.fuse_norm);
  out.features = relu(std::move(fused));
  return out;
}

/// Runs the three decoder modules; `skips` are the fused encoder features at
/// 1/16, 1/8, 1/4. Returns the output of every module.
inline std::vector<Tensor> run_decoder(const Tensor& context,
                                       const std::vector<DecoderModuleWeights>& dec,
                                       const std::vector<const Tensor*>& skips) {
  std::vector<Tensor> outs;
  Tensor x = context;
  for (std::size_t m = 0; m < dec.size(); ++m) {
    Tensor t = conv2d(x, dec[m].conv);
    batch_norm_inplace(t, dec[m].norm);
    t = run_blocks(relu(std::move(t)), dec[m].blocks);
    t = learned_upsample(t, dec[m].upsample);
    x = add(std::move(t), conv2d(*skips[m], dec[m].skip));
    outs.push_back(x);
  }
  return outs;
}

inline Tensor run_head(const Tensor& trunk, const HeadWeights& h, bool learned) {
  Tensor t = conv2d(trunk, h.conv);
  if (learned) return learned_upsample(learned_upsample(t, h.up1), h.up2);
  const Tensor u = resize_bilinear(t, 2 * t.height(), 2 * t.width());
  return resize_bilinear(u, 2 * u.height(), 2 * u.width());
}

inline ForwardOutputs forward(const Graph& g, const Tensor& rgb, const Tensor& depth) {
  const GraphConfig& cfg = g.config;
  auto check = [&](const Tensor& t, std::size_t channels, const char* what) {
    if (t.rank() != 3 || t.channels() != channels || t.height() != cfg.height ||
        t.width() != cfg.width) {
      throw ShapeError(what, std::string(what) + " input must be " + std::to_string(channels) +
                                 "x" + std::to_string(cfg.height) + "x" +
                                 std::to_string(cfg.width) + ", got " + to_string(t.shape()));
    }
  };
  check(rgb, 3, "rgb");
  if (cfg.rgbd) check(depth, 1, "depth");

  // encoders with per-stage fusion
  Tensor r = encoder_stem(rgb, g.rgb_encoder);
  Tensor d = cfg.rgbd ? encoder_stem(depth, g.depth_encoder) : Tensor{};
  std::vector<Tensor> fused;
  for (std::size_t s = 0; s < 4; ++s) {
    r = run_blocks(std::move(r), g.rgb_encoder.stages[s]);
    if (cfg.rgbd) {
      d = run_blocks(std::move(d), g.depth_encoder.stages[s]);
      r = fuse_attention(r, d, g.fusion[s]);
    }
    fused.push_back(r);
  }

  const ContextOutput ctx = context_module(fused[3], g.context);
  const std::vector<const Tensor*> skips{&fused[2], &fused[1], &fused[0]};

  ForwardOutputs out;
  const auto sem = run_decoder(ctx.features, g.semantic_decoder, skips);
  out.semantic_side.push_back(conv2d(sem[0], g.semantic_side[0]));
  out.semantic_side.push_back(conv2d(sem[1], g.semantic_side[1]));
  out.semantic = run_head(sem[2], g.semantic_head, cfg.learned_head_upsampling);

  const auto ins = run_decoder(ctx.features, g.instance_decoder, skips);
  out.center = sigmoid(run_head(ins[2], g.center_head, cfg.learned_head_upsampling));
  out.offset = tanh(run_head(ins[2], g.offset_head, cfg.learned_head_upsampling));
  out.orientation =
      l2_normalize_channels(run_head(ins[2], g.orientation_head, cfg.learned_head_upsampling));

  out.scene = fully_connected(ctx.global_branch, g.scene_weight, g.scene_bias);
  return out;
}

// ------------------------------------------------------------- archive

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Directory of EMT1 tensors plus manifest.json {config, tensors: name -> file}.
inline void save_weights(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "emsa-weights";
  manifest["version"] = 1;
  manifest["config"] = g.config;
  nlohmann::json tensors = nlohmann::json::object();
  visit_parameters(g, [&](const std::string& name, std::span<const float> v, const Shape& s,
                          ParamRole) {
    const std::string file = name + ".emt";
    save_tensor(dir / file, Tensor(s, std::vector<float>(v.begin(), v.end())));
    tensors[name] = file;
  });
  manifest["tensors"] = tensors;
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw ArchiveError("failed writing " + (dir / "manifest.json").string());
}

inline Graph load_weights(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ArchiveError("missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("corrupt manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "emsa-weights") throw ArchiveError("not a weight archive");
  Graph g = allocate_graph(manifest.at("config").get<GraphConfig>());
  const auto& tensors = manifest.at("tensors");
  visit_parameters(g, [&](const std::string& name, std::span<float> v, const Shape& s,
                          ParamRole) {
    if (!tensors.contains(name)) throw ArchiveError("archive lacks tensor " + name);
    const Tensor t = load_tensor(dir / tensors.at(name).get<std::string>());
    if (t.shape() != s) {
      throw ArchiveError(name + ": archive shape " + to_string(t.shape()) + ", expected " +
                         to_string(s));
    }
    std::ranges::copy(t.data(), v.begin());
  });
  return g;
}

}  // namespace emsa
