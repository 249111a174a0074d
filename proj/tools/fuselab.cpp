// fuselab command-line tool: projection, calibration perturbation, the
// weak-calibration benchmark, synthetic scenes, toy training and overlay
// rendering on top of the fuselab_core library.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuselab/calib.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/eval.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/overlay.hpp"
#include "fuselab/pointcloud.hpp"
#include "fuselab/rng.hpp"
#include "fuselab/toytrain.hpp"

namespace fs = std::filesystem;
using namespace fuselab;

namespace {

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(token, &pos);
    } catch (const std::exception&) {
      throw ValidationError("invalid level '" + token + "'");
    }
    if (pos != token.size() || v < 0 || v > 3)
      throw ValidationError("invalid level '" + token + "' (expected 0..3)");
    levels.push_back(v);
  }
  if (levels.empty()) throw ValidationError("no levels given");
  return levels;
}

pointcloud::LabelArray require_labels(const pointcloud::LoadedCloud& loaded,
                                      const std::string& what) {
  if (!loaded.labels)
    throw ValidationError(what + " has no labels");
  return *loaded.labels;
}

struct FrameFiles {
  fs::path cloud;
  std::vector<fs::path> maps;
};

std::vector<FrameFiles> discover_frames(const fs::path& dir, std::size_t cameras) {
  if (!fs::is_directory(dir))
    throw IoError("frames directory not found: " + dir.string());
  std::vector<fs::path> clouds;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".flpc")
      clouds.push_back(entry.path());
  std::sort(clouds.begin(), clouds.end());
  if (clouds.empty())
    throw IoError("no .flpc frames in " + dir.string());
  std::vector<FrameFiles> frames;
  for (const auto& cloud : clouds) {
    FrameFiles f;
    f.cloud = cloud;
    for (std::size_t j = 0; j < cameras; ++j) {
      fs::path map = cloud;
      map.replace_extension();
      map += "_cam" + std::to_string(j) + ".flfm";
      if (!fs::exists(map))
        throw IoError("missing feature map " + map.string());
      f.maps.push_back(map);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

int run_project(const std::string& rig_path, const std::string& points_path,
                int camera, int level, std::optional<std::uint64_t> seed,
                std::int64_t frame) {
  const auto rig = calib::load_rig(rig_path);
  if (camera < 0 || camera >= static_cast<int>(rig.camera_count()))
    throw ValidationError("camera index out of range");
  if (level != 0 && !seed)
    throw ValidationError("--seed is required when --level > 0");
  const auto loaded = pointcloud::load_cloud(points_path);
  const auto& cam = rig.cameras[camera];
  calib::Extrinsics extr = cam.extrinsics;
  if (level != 0) {
    const auto spec = calib::sample_disturbance(
        calib::PerturbationLevel::from_int(level), *seed, frame, camera);
    extr = calib::perturb_extrinsics(extr, spec);
  }
  const auto proj = calib::project_points(loaded.cloud, cam.intrinsics, extr,
                                          cam.width, cam.height);
  std::printf("# index u v depth valid\n");
  for (std::size_t i = 0; i < proj.size(); ++i)
    std::printf("%zu %.6f %.6f %.6f %d\n", i, proj[i].u, proj[i].v,
                proj[i].depth, proj[i].valid ? 1 : 0);
  return 0;
}

int run_perturb(const std::string& rig_path, const std::string& out_path,
                int level, std::optional<std::uint64_t> seed,
                std::int64_t frame, std::optional<double> rx,
                std::optional<double> ry, std::optional<double> rz) {
  auto rig = calib::load_rig(rig_path);
  const bool manual = rx || ry || rz;
  if (manual && level != 0)
    throw ValidationError("--rx/--ry/--rz and --level are mutually exclusive");
  if (!manual && level == 0)
    throw ValidationError("give either --level 1..3 or explicit angles");
  if (!manual && !seed)
    throw ValidationError("--seed is required when --level > 0");
  for (std::size_t cam = 0; cam < rig.cameras.size(); ++cam) {
    calib::DisturbanceSpec spec;
    if (manual) {
      spec.rx_deg = rx.value_or(0.0);
      spec.ry_deg = ry.value_or(0.0);
      spec.rz_deg = rz.value_or(0.0);
      spec.validate();
    } else {
      spec = calib::sample_disturbance(calib::PerturbationLevel::from_int(level),
                                       *seed, frame, static_cast<int>(cam));
    }
    rig.cameras[cam].extrinsics =
        calib::perturb_extrinsics(rig.cameras[cam].extrinsics, spec);
  }
  calib::save_rig(rig, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int run_sample(int level, std::uint64_t seed, std::int64_t frame, int camera,
               int count) {
  if (count < 1) throw ValidationError("--count must be >= 1");
  const auto lvl = calib::PerturbationLevel::from_int(level);
  for (int i = 0; i < count; ++i) {
    const auto spec = calib::sample_disturbance(lvl, seed, frame + i, camera);
    std::printf("frame=%lld camera=%d rx=%.9f ry=%.9f rz=%.9f\n",
                static_cast<long long>(frame + i), camera, spec.rx_deg,
                spec.ry_deg, spec.rz_deg);
  }
  return 0;
}

int run_eval(const std::string& gt_path, const std::string& pred_path,
             int classes) {
  auto gt = require_labels(pointcloud::load_cloud(gt_path), "gt file");
  auto pred = require_labels(pointcloud::load_cloud(pred_path), "pred file");
  if (gt.size() != pred.size())
    throw ValidationError("gt and pred point counts differ");
  const int n_cls = classes > 0 ? classes : std::max(gt.n_cls, pred.n_cls);
  gt.n_cls = pred.n_cls = n_cls;
  gt.validate();
  pred.validate();
  eval::ConfusionMatrix cm(n_cls);
  eval::accumulate(cm, gt, pred);
  const auto report = eval::miou(cm);
  for (int c = 0; c < n_cls; ++c) {
    if (report.defined[c])
      std::printf("class %d iou %.6f\n", c, report.per_class[c]);
    else
      std::printf("class %d iou undefined\n", c);
  }
  if (report.miou)
    std::printf("miou %.6f\n", *report.miou);
  else
    std::printf("miou undefined\n");
  return 0;
}

int run_bench(const std::string& rig_path, const std::string& frames_dir,
              const std::string& levels_text, std::uint64_t seed,
              const std::string& out_path, const std::string& model_path,
              bool oracle, bool no_camera) {
  if (oracle == !model_path.empty())
    throw ValidationError("give exactly one of --model or --oracle");
  const auto rig = calib::load_rig(rig_path);
  const auto levels = parse_levels(levels_text);

  std::vector<eval::BenchFrame> frames;
  int n_cls = 0;
  std::int64_t id = 0;
  for (const auto& files : discover_frames(frames_dir, rig.camera_count())) {
    eval::BenchFrame frame;
    auto loaded = pointcloud::load_cloud(files.cloud);
    frame.cloud = std::move(loaded.cloud);
    frame.gt = require_labels(loaded, files.cloud.string());
    frame.rig = rig;
    for (const auto& map_path : files.maps)
      frame.maps.push_back(fusion::load_feature_map(map_path));
    frame.frame_id = id++;
    n_cls = std::max(n_cls, frame.gt.n_cls);
    frames.push_back(std::move(frame));
  }
  for (auto& frame : frames) frame.gt.n_cls = n_cls;

  eval::Predictor predictor;
  if (oracle) {
    predictor = [](const eval::BenchFrame& frame, const calib::CalibrationRig&) {
      return frame.gt;
    };
  } else {
    const auto model = toytrain::load_model(model_path);
    predictor = toytrain::make_predictor(model, !no_camera);
  }

  const auto run = eval::weak_calib_benchmark(predictor, frames, levels, seed);
  if (!out_path.empty()) eval::write_report(run, out_path);
  for (std::size_t i = 0; i < run.levels.size(); ++i) {
    if (run.reports[i].miou)
      std::printf("level %d miou %.6f\n", run.levels[i], *run.reports[i].miou);
    else
      std::printf("level %d miou undefined\n", run.levels[i]);
  }
  return 0;
}

int run_synth(std::uint64_t seed, const std::string& out_dir, int count) {
  if (count < 1) throw ValidationError("--count must be >= 1");
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const auto scene = toytrain::gen_scene(Rng::mix(seed, i));
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    if (i == 0) calib::save_rig(scene.rig, fs::path(out_dir) / "rig.json");
    pointcloud::save_cloud(scene.cloud, scene.labels,
                           fs::path(out_dir) / (std::string(name) + ".flpc"));
    for (std::size_t cam = 0; cam < scene.maps.size(); ++cam)
      fusion::save_feature_map(
          scene.maps[cam], fs::path(out_dir) / (std::string(name) + "_cam" +
                                                std::to_string(cam) + ".flfm"));
  }
  std::printf("wrote %d scene(s) to %s\n", count, out_dir.c_str());
  return 0;
}

int run_train_toy(const std::string& strategy, int scenes, std::uint64_t seed,
                  const std::string& out_path, int epochs, double lr, int level,
                  double lambda1, double lambda2, double temperature) {
  if (scenes < 1) throw ValidationError("--scenes must be >= 1");
  std::vector<toytrain::SyntheticScene> scene_list;
  for (int i = 0; i < scenes; ++i) {
    auto scene = toytrain::gen_scene(Rng::mix(seed, i));
    scene.scene_id = i;
    scene_list.push_back(std::move(scene));
  }
  toytrain::TrainConfig cfg;
  cfg.strategy = toytrain::strategy_from_string(strategy);
  cfg.train_level = calib::PerturbationLevel::from_int(level);
  cfg.epochs = epochs;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  cfg.loss.lambda1 = lambda1;
  cfg.loss.lambda2 = lambda2;
  cfg.loss.kd_temperature = temperature;
  const auto model = toytrain::train(scene_list, cfg);
  toytrain::save_model(model, out_path);
  std::printf("trained %s model on %d scene(s), %d epochs; wrote %s\n",
              strategy.c_str(), scenes, epochs, out_path.c_str());
  return 0;
}

int run_overlay(const std::string& points_path, const std::string& rig_path,
                int camera, int level, std::optional<std::uint64_t> seed,
                std::int64_t frame, const std::string& map_path,
                const std::string& out_path) {
  if (level != 0 && !seed)
    throw ValidationError("--seed is required when --level > 0");
  const auto rig = calib::load_rig(rig_path);
  const auto loaded = pointcloud::load_cloud(points_path);
  std::optional<fusion::FeatureMap> map;
  if (!map_path.empty()) map = fusion::load_feature_map(map_path);
  const auto image = overlay::render_overlay(
      loaded.cloud, loaded.labels, rig, camera, level, seed.value_or(0), frame,
      map ? &*map : nullptr);
  overlay::write_ppm(image, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-camera fusion geometry, weak-calibration benchmark and "
               "desk-scale distillation experiments"};
  app.name("fuselab");
  app.require_subcommand(1);

  // project
  auto* project = app.add_subcommand("project", "Project a cloud into one camera");
  std::string p_rig, p_points;
  int p_camera = 0, p_level = 0;
  std::int64_t p_frame = 0;
  std::optional<std::uint64_t> p_seed;
  project->add_option("--rig", p_rig, "rig JSON file")->required();
  project->add_option("--points", p_points, "FLPC point file")->required();
  project->add_option("--camera", p_camera, "camera index")->required();
  project->add_option("--level", p_level, "perturbation level 0..3");
  project->add_option("--seed", p_seed, "disturbance seed");
  project->add_option("--frame", p_frame, "frame id for the disturbance stream");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "Write a rig with disturbed extrinsics");
  std::string pe_rig, pe_out;
  int pe_level = 0;
  std::int64_t pe_frame = 0;
  std::optional<std::uint64_t> pe_seed;
  std::optional<double> pe_rx, pe_ry, pe_rz;
  perturb->add_option("--rig", pe_rig, "rig JSON file")->required();
  perturb->add_option("--out", pe_out, "output rig JSON file")->required();
  perturb->add_option("--level", pe_level, "perturbation level 1..3");
  perturb->add_option("--seed", pe_seed, "disturbance seed");
  perturb->add_option("--frame", pe_frame, "frame id for the disturbance stream");
  perturb->add_option("--rx", pe_rx, "explicit X angle (degrees)");
  perturb->add_option("--ry", pe_ry, "explicit Y angle (degrees)");
  perturb->add_option("--rz", pe_rz, "explicit Z angle (degrees)");

  // sample
  auto* sample = app.add_subcommand("sample", "Print sampled disturbance angles");
  int s_level = 0, s_camera = 0, s_count = 1;
  std::int64_t s_frame = 0;
  std::uint64_t s_seed = 0;
  sample->add_option("--level", s_level, "perturbation level 0..3")->required();
  sample->add_option("--seed", s_seed, "disturbance seed")->required();
  sample->add_option("--frame", s_frame, "first frame id");
  sample->add_option("--camera", s_camera, "camera id");
  sample->add_option("--count", s_count, "number of consecutive frames");

  // eval
  auto* evalc = app.add_subcommand("eval", "IoU between two labeled FLPC files");
  std::string e_gt, e_pred;
  int e_classes = 0;
  evalc->add_option("--gt", e_gt, "ground-truth FLPC file")->required();
  evalc->add_option("--pred", e_pred, "prediction FLPC file")->required();
  evalc->add_option("--classes", e_classes, "class count (default: inferred)");

  // bench
  auto* bench = app.add_subcommand("bench", "Weak-calibration benchmark over a frame directory");
  std::string b_rig, b_frames, b_levels = "0,1,2,3", b_out, b_model;
  std::uint64_t b_seed = 0;
  bool b_oracle = false, b_no_camera = false;
  bench->add_option("--rig", b_rig, "rig JSON file")->required();
  bench->add_option("--frames", b_frames, "directory of FLPC/FLFM frames")->required();
  bench->add_option("--levels", b_levels, "comma-separated levels (default 0,1,2,3)");
  bench->add_option("--seed", b_seed, "benchmark seed")->required();
  bench->add_option("--out", b_out, "report JSON output path");
  bench->add_option("--model", b_model, "FLMD model to evaluate");
  bench->add_flag("--oracle", b_oracle, "use the ground-truth oracle predictor");
  bench->add_flag("--no-camera", b_no_camera, "zero the camera feature block");

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic scenes (rig + FLPC + FLFM)");
  std::string sy_dir;
  std::uint64_t sy_seed = 0;
  int sy_count = 1;
  synth->add_option("--seed", sy_seed, "scene seed")->required();
  synth->add_option("--out-dir", sy_dir, "output directory")->required();
  synth->add_option("--count", sy_count, "number of scenes");

  // train-toy
  auto* traint = app.add_subcommand("train-toy", "Train the toy fused classifier");
  std::string t_strategy, t_out;
  int t_scenes = 4, t_epochs = 600, t_level = 3;
  double t_lr = 3.0, t_lambda1 = 1.0, t_lambda2 = 1.0, t_temperature = 1.0;
  std::uint64_t t_seed = 0;
  traint->add_option("--strategy", t_strategy,
                     "baseline, da, kd or lidar-only")->required();
  traint->add_option("--scenes", t_scenes, "number of training scenes");
  traint->add_option("--seed", t_seed, "training seed")->required();
  traint->add_option("--out", t_out, "FLMD model output path")->required();
  traint->add_option("--epochs", t_epochs, "training epochs");
  traint->add_option("--lr", t_lr, "learning rate");
  traint->add_option("--level", t_level, "training perturbation level");
  traint->add_option("--lambda1", t_lambda1, "segmentation loss coefficient");
  traint->add_option("--lambda2", t_lambda2, "distillation loss coefficient");
  traint->add_option("--temperature", t_temperature, "distillation temperature");

  // overlay
  auto* over = app.add_subcommand("overlay", "Render projected points as a PPM image");
  std::string o_points, o_rig, o_map, o_out;
  int o_camera = 0, o_level = 0;
  std::int64_t o_frame = 0;
  std::optional<std::uint64_t> o_seed;
  over->add_option("--points", o_points, "FLPC point file")->required();
  over->add_option("--rig", o_rig, "rig JSON file")->required();
  over->add_option("--camera", o_camera, "camera index")->required();
  over->add_option("--level", o_level, "perturbation level 0..3");
  over->add_option("--seed", o_seed, "disturbance seed");
  over->add_option("--frame", o_frame, "frame id for the disturbance stream");
  over->add_option("--map", o_map, "FLFM background feature map");
  over->add_option("--out", o_out, "output PPM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "run 'fuselab --help' for usage\n";
    return 1;
  }

  try {
    if (app.got_subcommand(project))
      return run_project(p_rig, p_points, p_camera, p_level, p_seed, p_frame);
    if (app.got_subcommand(perturb))
      return run_perturb(pe_rig, pe_out, pe_level, pe_seed, pe_frame, pe_rx,
                         pe_ry, pe_rz);
    if (app.got_subcommand(sample))
      return run_sample(s_level, s_seed, s_frame, s_camera, s_count);
    if (app.got_subcommand(evalc)) return run_eval(e_gt, e_pred, e_classes);
    if (app.got_subcommand(bench))
      return run_bench(b_rig, b_frames, b_levels, b_seed, b_out, b_model,
                       b_oracle, b_no_camera);
    if (app.got_subcommand(synth)) return run_synth(sy_seed, sy_dir, sy_count);
    if (app.got_subcommand(traint))
      return run_train_toy(t_strategy, t_scenes, t_seed, t_out, t_epochs, t_lr,
                           t_level, t_lambda1, t_lambda2, t_temperature);
    if (app.got_subcommand(over))
      return run_overlay(o_points, o_rig, o_camera, o_level, o_seed, o_frame,
                         o_map, o_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
