// emsa: command-line pipelines over sample directories.
//
//   synth      write a synthetic dataset split
//   encode-gt  turn GT instances into center/offset/orientation targets
//   forward    run the network on a split
//   decode     centers + offsets + semantics -> instance map
//   merge      semantic + instances -> panoptic map and orientations
//   eval       score merged predictions against a GT split
//   loss-eval  evaluate training losses of forward outputs against GT
//   report     render metric bar charts and a JSON summary

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emsa/emsa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad configuration or arguments; exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  fs::path input, output, gt;
  std::optional<fs::path> spectrum_path;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  emsa::CodecConfig codec;
  emsa::TaskWeights task_weights;
  double kappa = emsa::kDefaultKappa;
  double epsilon = emsa::kDefaultLabelSmoothing;
  emsa::GraphConfig graph;
  bool graph_given = false;

  // subcommand specifics
  std::size_t count = 5;
  std::size_t height = 96, width = 128;
  std::size_t min_instances = 1, max_instances = 8;
  std::string split = "test";
  std::optional<fs::path> weights, save_weights;
  std::optional<fs::path> plot;
  bool unit_class_weights = false;

  emsa::ClassSpectrum spectrum;
};

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

/// Applies a JSON config file; command-line flags are applied afterwards.
void apply_config_file(const fs::path& path, RunConfig& rc) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is);
    take(j, "seed", rc.seed);
    take(j, "threads", rc.threads);
    take(j, "kappa", rc.kappa);
    take(j, "epsilon", rc.epsilon);
    if (j.contains("spectrum")) rc.spectrum_path = j.at("spectrum").get<std::string>();
    if (j.contains("codec")) {
      const auto& c = j.at("codec");
      take(c, "sigma", rc.codec.sigma);
      take(c, "tau", rc.codec.threshold);
      take(c, "pool_size", rc.codec.pool_size);
      take(c, "top_k", rc.codec.top_k);
      take(c, "offset_distance", rc.codec.offset_distance);
      take(c, "min_area_fraction", rc.codec.min_area_fraction);
    }
    if (j.contains("task_weights")) {
      const auto& w = j.at("task_weights");
      take(w, "semantic", rc.task_weights.semantic);
      take(w, "scene", rc.task_weights.scene);
      take(w, "instance", rc.task_weights.instance);
      take(w, "orientation", rc.task_weights.orientation);
    }
    if (j.contains("graph")) {
      rc.graph = j.at("graph").get<emsa::GraphConfig>();
      rc.graph_given = true;
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

emsa::TaskWeights parse_task_weights(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ':')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("--task-weights: '" + part + "' is not a number");
    }
  }
  if (v.size() != 4) throw ConfigError("--task-weights expects a:b:c:d (semantic:scene:instance:orientation)");
  return {v[0], v[1], v[2], v[3]};
}

void validate(RunConfig& rc) {
  try {
    rc.codec.validate();
    rc.task_weights.validate();
    if (!(rc.kappa > 0.0)) throw ConfigError("kappa must be > 0");
    if (!(rc.epsilon >= 0.0 && rc.epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
    if (rc.threads < 1) throw ConfigError("threads must be >= 1");
    if (rc.graph_given) rc.graph.validate();
    rc.spectrum = rc.spectrum_path ? emsa::load_spectrum(*rc.spectrum_path) : emsa::nyuv2_40();
    rc.spectrum.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  emsa::set_num_threads(rc.threads);
}

void require_dir(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_directory(p)) throw ConfigError(std::string(flag) + ": " + p.string() + " is not a directory");
}

std::vector<std::string> sample_ids(const fs::path& dir) {
  if (fs::exists(dir / "split.json")) return emsa::read_split(dir);
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void copy_if_present(const fs::path& from_dir, const fs::path& to_dir, const char* name) {
  if (fs::exists(from_dir / name)) {
    fs::copy_file(from_dir / name, to_dir / name, fs::copy_options::overwrite_existing);
  }
}

// ---------------------------------------------------------------- plots

/// Vertical bars for values in [0, 1], one per entry, on a white canvas.
void render_bars(const fs::path& path, const std::vector<double>& values) {
  const std::size_t bar = 12, gap = 4, margin = 10, plot_h = 200;
  emsa::Image img;
  img.channels = 3;
  img.bit_depth = 8;
  img.width = 2 * margin + std::max<std::size_t>(1, values.size()) * (bar + gap);
  img.height = plot_h + 2 * margin;
  img.samples.assign(img.width * img.height * 3, 255);
  auto px = [&](std::size_t r, std::size_t c, std::uint16_t red, std::uint16_t g, std::uint16_t b) {
    auto* s = &img.samples[(r * img.width + c) * 3];
    s[0] = red;
    s[1] = g;
    s[2] = b;
  };
  for (std::size_t c = margin / 2; c < img.width - margin / 2; ++c) px(margin + plot_h, c, 0, 0, 0);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = std::clamp(values[k], 0.0, 1.0);
    const auto h = static_cast<std::size_t>(std::lround(v * double(plot_h)));
    const std::size_t x0 = margin + k * (bar + gap);
    for (std::size_t r = margin + plot_h - h; r < margin + plot_h; ++r)
      for (std::size_t c = x0; c < x0 + bar; ++c) px(r, c, 40, 90, 170);
  }
  emsa::write_png(path, img);
}

/// Writes one chart per per-class metric table found in a metrics JSON, plus
/// a summary JSON listing the chart order.
json render_report(const json& metrics, const fs::path& out) {
  fs::create_directories(out);
  json summary;
  summary["miou"] = metrics.value("miou", json(nullptr));
  summary["panoptic"] = metrics.value("panoptic", json(nullptr));
  summary["maae_gt_instances"] = metrics.value("maae_gt_instances", json(nullptr));
  summary["maae_matched"] = metrics.value("maae_matched", json(nullptr));
  summary["balanced_accuracy"] = metrics.value("balanced_accuracy", json(nullptr));
  json charts = json::object();
  auto chart = [&](const char* table, const char* field, const std::string& file) {
    if (!metrics.contains(table)) return;
    std::vector<double> values;
    std::vector<std::string> labels;
    for (const auto& [name, v] : metrics.at(table).items()) {
      labels.push_back(name);
      values.push_back(field ? v.at(field).get<double>() : v.get<double>());
    }
    render_bars(out / file, values);
    charts[file] = labels;
  };
  chart("iou_per_class", nullptr, "iou_per_class.png");
  chart("panoptic_per_class", "pq", "pq_per_class.png");
  chart("panoptic_per_class", "rq", "rq_per_class.png");
  chart("panoptic_per_class", "sq", "sq_per_class.png");
  summary["charts"] = charts;
  write_json(out / "summary.json", summary);
  return summary;
}

// ---------------------------------------------------------------- subcommands

void cmd_synth(const RunConfig& rc) {
  if (rc.output.empty()) throw ConfigError("--output is required");
  if (rc.min_instances < 1 || rc.max_instances < rc.min_instances) {
    throw ConfigError("--instances must satisfy 1 <= min <= max");
  }
  const fs::path split_dir = rc.output / rc.split;
  std::mt19937_64 rng(rc.seed);
  std::uniform_int_distribution<std::size_t> n_inst(rc.min_instances, rc.max_instances);
  std::uniform_int_distribution<std::int32_t> scene(1, emsa::SceneSpectrum::unified().num_classes());
  emsa::SynthOptions opt;
  opt.min_area_fraction = rc.codec.min_area_fraction;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < rc.count; ++k) {
    const std::uint64_t sample_seed = rng();
    emsa::Sample s = emsa::synth_scene(sample_seed, rc.height, rc.width, n_inst(rng), rc.spectrum, opt);
    s.scene = scene(rng);
    char id[32];
    std::snprintf(id, sizeof id, "%06zu", k);
    s.id = id;
    emsa::save_sample(split_dir / s.id, s);
    ids.push_back(s.id);
  }
  emsa::write_split(split_dir, rc.split, ids);
  std::cout << "wrote " << ids.size() << " samples to " << split_dir.string() << '\n';
}

void cmd_encode_gt(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = sample_ids(rc.input);
  for (const auto& id : ids) {
    const auto rec = emsa::SampleRecord::in_directory(rc.input / id);
    const emsa::Sample s = emsa::load_sample(rec, rc.spectrum);
    const emsa::InstanceTargets t = emsa::encode_targets(
        s.instance, rc.codec, {&s.semantic, &rc.spectrum, &s.orientations});
    const fs::path dir = rc.output / id;
    fs::create_directories(dir);
    emsa::save_tensor(dir / "center.emt", t.center);
    emsa::save_tensor(dir / "offset.emt", t.offset);
    emsa::save_tensor(dir / "orientation.emt", t.orientation);
    emsa::write_label_png(dir / "instance_target.png", t.instances, 16);
    fs::copy_file(rec.semantic, dir / "semantic.png", fs::copy_options::overwrite_existing);
  }
  emsa::write_split(rc.output, "encoded", ids);
  std::cout << "encoded " << ids.size() << " samples\n";
}

void cmd_forward(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = sample_ids(rc.input);
  std::optional<emsa::Graph> graph;
  if (rc.weights) graph = emsa::load_weights(*rc.weights);
  for (const auto& id : ids) {
    const emsa::Sample s = emsa::load_sample(emsa::SampleRecord::in_directory(rc.input / id), rc.spectrum);
    if (!graph) {
      emsa::GraphConfig cfg = rc.graph;
      cfg.height = s.height();
      cfg.width = s.width();
      cfg.semantic_classes = std::size_t(rc.spectrum.num_classes());
      try {
        cfg.validate();
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      graph = emsa::build_graph(cfg, {}, rc.seed);
      if (rc.save_weights) emsa::save_weights(*graph, *rc.save_weights);
    }
    const emsa::ForwardOutputs out = emsa::forward(*graph, s.rgb, s.depth);
    const fs::path dir = rc.output / id;
    fs::create_directories(dir);
    emsa::save_tensor(dir / "semantic_logits.emt", out.semantic);
    for (std::size_t k = 0; k < out.semantic_side.size(); ++k) {
      emsa::save_tensor(dir / ("semantic_side" + std::to_string(k) + ".emt"), out.semantic_side[k]);
    }
    emsa::save_tensor(dir / "center.emt", out.center);
    emsa::save_tensor(dir / "offset.emt", out.offset);
    emsa::save_tensor(dir / "orientation.emt", out.orientation);
    emsa::save_tensor(dir / "scene_logits.emt", out.scene);
    emsa::write_label_png(dir / "semantic.png", emsa::argmax_labels(out.semantic, 1), 8);
  }
  emsa::write_split(rc.output, "forward", ids);
  std::cout << "forward pass on " << ids.size() << " samples\n";
}

emsa::LabelMap predicted_semantics(const fs::path& dir) {
  if (fs::exists(dir / "semantic.png")) return emsa::read_label_png(dir / "semantic.png");
  if (fs::exists(dir / "semantic_logits.emt")) {
    return emsa::argmax_labels(emsa::load_tensor(dir / "semantic_logits.emt"), 1);
  }
  throw std::runtime_error(dir.string() + ": needs semantic.png or semantic_logits.emt");
}

json instances_json(const std::vector<emsa::DetectedInstance>& instances) {
  json arr = json::array();
  for (const auto& d : instances) {
    json e{{"id", d.id},
           {"center", {d.center_row, d.center_col}},
           {"score", d.score},
           {"area", d.pixels.size()}};
    e["semantic_class"] = d.semantic_class ? json(*d.semantic_class) : json(nullptr);
    e["orientation_deg"] = d.orientation ? json(d.orientation->degrees()) : json(nullptr);
    arr.push_back(e);
  }
  return arr;
}

void cmd_decode(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = sample_ids(rc.input);
  for (const auto& id : ids) {
    const fs::path in = rc.input / id;
    const emsa::Tensor center = emsa::load_tensor(in / "center.emt");
    const emsa::Tensor offset = emsa::load_tensor(in / "offset.emt");
    const emsa::LabelMap sem = predicted_semantics(in);
    const auto centers = emsa::decode_centers(center, rc.codec);
    auto instances = emsa::group_pixels(centers, offset, emsa::foreground_mask(sem, rc.spectrum), rc.codec);
    const fs::path dir = rc.output / id;
    fs::create_directories(dir);
    emsa::write_label_png(dir / "instance.png",
                          emsa::instances_to_label_map(instances, sem.height, sem.width), 16);
    emsa::write_label_png(dir / "semantic.png", sem, 8);
    write_json(dir / "instances.json", instances_json(instances));
    copy_if_present(in, dir, "orientation.emt");
    copy_if_present(in, dir, "scene_logits.emt");
  }
  emsa::write_split(rc.output, "decoded", ids);
  std::cout << "decoded " << ids.size() << " samples\n";
}

void cmd_merge(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = sample_ids(rc.input);
  for (const auto& id : ids) {
    const fs::path in = rc.input / id;
    const emsa::LabelMap sem = predicted_semantics(in);
    const emsa::LabelMap inst = emsa::read_label_png(in / "instance.png");
    emsa::require_same_extents(sem, inst, "semantic vs instance");
    auto instances = emsa::label_map_to_instances(inst);
    const emsa::PanopticMap pan = emsa::merge(sem, instances, rc.spectrum);
    emsa::OrientationMap orientations;
    if (fs::exists(in / "orientation.emt")) {
      emsa::assign_orientations(instances, emsa::load_tensor(in / "orientation.emt"), rc.spectrum);
      for (const auto& d : instances)
        if (d.orientation) orientations[d.id] = *d.orientation;
    }
    const fs::path dir = rc.output / id;
    fs::create_directories(dir);
    emsa::write_label_png(dir / "semantic.png", pan.semantic, 8);
    emsa::write_label_png(dir / "instance.png", pan.instance, 16);
    emsa::write_label_png(dir / "panoptic.png", emsa::encode_panoptic(pan), 16);
    emsa::write_orientations_csv(dir / "orientations.csv", orientations);
    write_json(dir / "instances.json", instances_json(instances));
    copy_if_present(in, dir, "orientation.emt");
    copy_if_present(in, dir, "scene_logits.emt");
  }
  emsa::write_split(rc.output, "merged", ids);
  std::cout << "merged " << ids.size() << " samples\n";
}

void cmd_eval(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  require_dir(rc.gt, "--gt");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = emsa::read_split(rc.gt);
  emsa::ConfusionMatrix cm(rc.spectrum.num_classes());
  emsa::PanopticQuality pq(rc.spectrum);
  emsa::MaaeAccumulator maae_gt, maae_matched;
  emsa::BalancedAccuracy bacc;
  bool any_scene = false;
  for (const auto& id : ids) {
    const fs::path in = rc.input / id;
    if (!fs::is_directory(in)) throw std::runtime_error("prediction for sample " + id + " is missing");
    const emsa::Sample gt = emsa::load_sample(emsa::SampleRecord::in_directory(rc.gt / id), rc.spectrum);
    const emsa::LabelMap sem = predicted_semantics(in);
    const emsa::LabelMap inst = fs::exists(in / "instance.png") ? emsa::read_label_png(in / "instance.png")
                                                                : emsa::LabelMap(sem.height, sem.width);
    cm.add(sem, gt.semantic);
    const auto matches = pq.add({sem, inst}, {gt.semantic, gt.instance});
    if (fs::exists(in / "orientations.csv")) {
      const auto matching = emsa::instance_matching(matches);
      emsa::accumulate_maae(maae_matched, emsa::read_orientations_csv(in / "orientations.csv"),
                            gt.orientations, &matching);
    }
    if (fs::exists(in / "orientation.emt")) {
      // orientation field read out on the GT instances
      const emsa::Tensor field = emsa::load_tensor(in / "orientation.emt");
      auto gt_instances = emsa::label_map_to_instances(gt.instance);
      emsa::OrientationMap on_gt;
      for (const auto& d : gt_instances) {
        if (!gt.orientations.contains(d.id)) continue;
        try {
          on_gt[d.id] = emsa::instance_orientation(field, d.pixels);
        } catch (const emsa::OrientationError&) {
        }
      }
      emsa::accumulate_maae(maae_gt, on_gt, gt.orientations);
    }
    if (fs::exists(in / "scene_logits.emt") && gt.scene != 0) {
      const emsa::Tensor logits = emsa::load_tensor(in / "scene_logits.emt");
      const auto best = std::max_element(logits.data().begin(), logits.data().end());
      bacc.add(static_cast<std::int32_t>(best - logits.data().begin()) + 1, gt.scene);
      any_scene = true;
    }
  }
  emsa::MetricReport report;
  report.semantic = cm.report();
  report.panoptic = pq.report();
  report.maae_gt_instances = maae_gt.mean();
  report.maae_matched = maae_matched.mean();
  if (any_scene) report.balanced_accuracy = bacc.value();
  json j = emsa::report_to_json(report, rc.spectrum);
  j["samples"] = ids.size();
  fs::create_directories(rc.output);
  write_json(rc.output / "metrics.json", j);
  if (rc.plot) render_report(j, *rc.plot);
  const auto& all = report.panoptic->all;
  std::cout << "samples " << ids.size() << "  mIoU " << report.semantic->miou;
  if (all) std::cout << "  PQ " << all->pq << "  RQ " << all->rq << "  SQ " << all->sq;
  std::cout << '\n';
}

void cmd_loss_eval(const RunConfig& rc) {
  require_dir(rc.input, "--input");
  require_dir(rc.gt, "--gt");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const auto ids = emsa::read_split(rc.gt);
  std::vector<emsa::Sample> samples;
  for (const auto& id : ids) {
    samples.push_back(emsa::load_sample(emsa::SampleRecord::in_directory(rc.gt / id), rc.spectrum));
  }
  std::vector<float> class_weights;
  if (rc.unit_class_weights) {
    class_weights.assign(std::size_t(rc.spectrum.num_classes()), 1.0f);
  } else {
    std::vector<emsa::LabelMap> maps;
    for (const auto& s : samples) maps.push_back(s.semantic);
    class_weights = emsa::median_frequency_weights(maps, rc.spectrum.num_classes());
  }
  json per_sample = json::object();
  emsa::LossParts mean;
  for (const auto& s : samples) {
    const fs::path in = rc.input / s.id;
    std::vector<emsa::Tensor> logits{emsa::load_tensor(in / "semantic_logits.emt")};
    for (std::size_t k = 0; fs::exists(in / ("semantic_side" + std::to_string(k) + ".emt")); ++k) {
      logits.push_back(emsa::load_tensor(in / ("semantic_side" + std::to_string(k) + ".emt")));
    }
    const auto t = emsa::encode_targets(s.instance, rc.codec, {&s.semantic, &rc.spectrum, &s.orientations});
    emsa::LossParts p;
    p.semantic = emsa::semantic_loss(logits, s.semantic, class_weights);
    p.center = emsa::center_loss(emsa::load_tensor(in / "center.emt"), t.center, t.instance_mask).value;
    p.offset = emsa::offset_loss(emsa::load_tensor(in / "offset.emt"), t.offset, t.instance_mask).value;
    p.orientation = emsa::orientation_loss(emsa::load_tensor(in / "orientation.emt"), t.orientation,
                                           t.orientation_mask, rc.kappa)
                        .value;
    if (s.scene != 0 && fs::exists(in / "scene_logits.emt")) {
      p.scene = emsa::scene_loss(emsa::load_tensor(in / "scene_logits.emt"), std::size_t(s.scene - 1),
                                 rc.epsilon);
    }
    per_sample[s.id] = {{"semantic", p.semantic},       {"scene", p.scene},
                        {"center", p.center},           {"offset", p.offset},
                        {"orientation", p.orientation}, {"total", emsa::total_loss(p, rc.task_weights)}};
    const double n = double(samples.size());
    mean.semantic += p.semantic / n;
    mean.scene += p.scene / n;
    mean.center += p.center / n;
    mean.offset += p.offset / n;
    mean.orientation += p.orientation / n;
  }
  const double total = emsa::total_loss(mean, rc.task_weights);
  json j{{"samples", per_sample},
         {"mean",
          {{"semantic", mean.semantic},
           {"scene", mean.scene},
           {"center", mean.center},
           {"offset", mean.offset},
           {"orientation", mean.orientation},
           {"total", total}}},
         {"task_weights",
          {rc.task_weights.semantic, rc.task_weights.scene, rc.task_weights.instance,
           rc.task_weights.orientation}}};
  fs::create_directories(rc.output);
  write_json(rc.output / "losses.json", j);
  std::cout << "total loss " << total << '\n';
}

void cmd_report(const RunConfig& rc) {
  if (rc.input.empty()) throw ConfigError("--input is required");
  if (rc.output.empty()) throw ConfigError("--output is required");
  const fs::path metrics = fs::is_directory(rc.input) ? rc.input / "metrics.json" : rc.input;
  std::ifstream is(metrics);
  if (!is) throw std::runtime_error("cannot open " + metrics.string());
  const json summary = render_report(json::parse(is), rc.output);
  std::cout << summary.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panoptic RGB-D scene analysis pipelines"};
  app.require_subcommand(1);
  app.footer(
      "Config file (JSON, flags override): seed, threads, kappa, epsilon, spectrum,\n"
      "codec{sigma, tau, pool_size, top_k, offset_distance, min_area_fraction},\n"
      "task_weights{semantic, scene, instance, orientation}, graph{...}.\n"
      "Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.");

  RunConfig rc;
  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, pool_size, top_k;
  std::optional<float> tau;
  std::optional<double> sigma, kappa, epsilon, delta, min_area;
  std::optional<std::string> task_weights, instances;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--input,-i", rc.input, "input directory");
    sub->add_option("--output,-o", rc.output, "output directory");
    sub->add_option("--spectrum", rc.spectrum_path, "class spectrum JSON (default: built-in NYUv2-40)");
    sub->add_option("--seed", seed, "random seed (default 0)");
    sub->add_option("--threads", threads, "worker threads for tensor ops (default 1)");
    sub->add_option("--tau", tau, "center score threshold (default 0.1)");
    sub->add_option("--pool-size", pool_size, "center NMS window, odd (default 17)");
    sub->add_option("--top-k", top_k, "maximum number of centers (default 64)");
    sub->add_option("--sigma", sigma, "center Gaussian std-dev in pixels (default 8)");
    sub->add_option("--delta", delta, "unknown-pixel distance as a fraction of the diagonal (default 0.05)");
    sub->add_option("--min-area", min_area, "minimum instance area as a fraction of the image (default 0.0025)");
    sub->add_option("--kappa", kappa, "von Mises concentration (default 1)");
    sub->add_option("--epsilon", epsilon, "scene label smoothing (default 0.1)");
    sub->add_option("--task-weights", task_weights,
                    "semantic:scene:instance:orientation loss weights (default 1:0.25:3:1)");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset split");
  common(synth);
  synth->add_option("--n,--count", rc.count, "number of samples (default 5)");
  synth->add_option("--height", rc.height, "image height (default 96)");
  synth->add_option("--width", rc.width, "image width (default 128)");
  synth->add_option("--instances", instances, "instances per scene, N or MIN:MAX (default 1:8)");
  synth->add_option("--split", rc.split, "split name (default test)");

  auto* encode = app.add_subcommand("encode-gt", "encode GT instances into dense targets");
  common(encode);
  auto* fwd = app.add_subcommand("forward", "run the network on a split");
  common(fwd);
  fwd->add_option("--weights", rc.weights, "weight archive directory (default: random init from --seed)");
  fwd->add_option("--save-weights", rc.save_weights, "store the randomly initialized weights here");
  auto* decode = app.add_subcommand("decode", "decode centers and offsets into instances");
  common(decode);
  auto* merge = app.add_subcommand("merge", "merge semantics and instances into panoptic maps");
  common(merge);
  auto* eval = app.add_subcommand("eval", "score merged predictions against GT");
  common(eval);
  eval->add_option("--gt", rc.gt, "GT split directory")->required();
  eval->add_option("--plot", rc.plot, "also render bar charts into this directory");
  auto* loss = app.add_subcommand("loss-eval", "evaluate training losses against GT");
  common(loss);
  loss->add_option("--gt", rc.gt, "GT split directory")->required();
  loss->add_flag("--unit-class-weights", rc.unit_class_weights,
                 "unit semantic class weights instead of median frequency");
  auto* report = app.add_subcommand("report", "render metric bar charts and a JSON summary");
  common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (config_path) apply_config_file(*config_path, rc);
    if (seed) rc.seed = *seed;
    if (threads) rc.threads = *threads;
    if (tau) rc.codec.threshold = *tau;
    if (pool_size) rc.codec.pool_size = *pool_size;
    if (top_k) rc.codec.top_k = *top_k;
    if (sigma) rc.codec.sigma = *sigma;
    if (delta) rc.codec.offset_distance = *delta;
    if (min_area) rc.codec.min_area_fraction = *min_area;
    if (kappa) rc.kappa = *kappa;
    if (epsilon) rc.epsilon = *epsilon;
    if (task_weights) rc.task_weights = parse_task_weights(*task_weights);
    if (instances) {
      const auto colon = instances->find(':');
      try {
        rc.min_instances = std::stoul(instances->substr(0, colon));
        rc.max_instances = colon == std::string::npos ? rc.min_instances
                                                      : std::stoul(instances->substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("--instances expects N or MIN:MAX");
      }
    }
    validate(rc);

    if (*synth) cmd_synth(rc);
    else if (*encode) cmd_encode_gt(rc);
    else if (*fwd) cmd_forward(rc);
    else if (*decode) cmd_decode(rc);
    else if (*merge) cmd_merge(rc);
    else if (*eval) cmd_eval(rc);
    else if (*loss) cmd_loss_eval(rc);
    else if (*report) cmd_report(rc);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
