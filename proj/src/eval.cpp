#include "fuselab/eval.hpp"

#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "fuselab/errors.hpp"

namespace fuselab::eval {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void accumulate(ConfusionMatrix& cm, const pointcloud::LabelArray& gt,
                const pointcloud::LabelArray& pred) {
  if (gt.size() != pred.size())
    throw ValidationError("accumulate: gt and pred lengths differ");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g < 0 || g >= cm.n_cls || p < 0 || p >= cm.n_cls)
      throw ValidationError("accumulate: label outside [0, n_cls)");
    ++cm.counts[static_cast<std::size_t>(g) * cm.n_cls + p];
  }
}

IoUReport miou(const ConfusionMatrix& cm) {
  if (cm.n_cls < 1) throw ValidationError("miou: empty confusion matrix");
  IoUReport report;
  report.per_class.assign(cm.n_cls, 0.0);
  report.defined.assign(cm.n_cls, false);

  double sum = 0.0;
  int defined_count = 0;
  for (int c = 0; c < cm.n_cls; ++c) {
    const std::int64_t tp = cm.at(c, c);
    std::int64_t row = 0, col = 0;
    for (int k = 0; k < cm.n_cls; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::int64_t fn = row - tp;
    const std::int64_t fp = col - tp;
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) continue;  // class absent from gt and pred
    report.per_class[c] =
        static_cast<double>(tp) / static_cast<double>(denom);
    report.defined[c] = true;
    sum += report.per_class[c];
    ++defined_count;
  }
  if (defined_count > 0) report.miou = sum / defined_count;
  return report;
}

calib::CalibrationRig perturb_rig(const calib::CalibrationRig& rig, int level,
                                  std::uint64_t seed, std::int64_t frame_id) {
  const auto lvl = calib::PerturbationLevel::from_int(level);
  if (level == 0) return rig;  // level 0 is the original rig, untouched
  calib::CalibrationRig out = rig;
  for (std::size_t cam = 0; cam < out.cameras.size(); ++cam) {
    const auto spec =
        calib::sample_disturbance(lvl, seed, frame_id, static_cast<int>(cam));
    out.cameras[cam].extrinsics =
        calib::perturb_extrinsics(out.cameras[cam].extrinsics, spec);
  }
  return out;
}

BenchmarkRun weak_calib_benchmark(const Predictor& predict,
                                  const std::vector<BenchFrame>& frames,
                                  const std::vector<int>& levels,
                                  std::uint64_t seed) {
  if (!predict) throw ValidationError("benchmark needs a predictor");
  if (frames.empty()) throw ValidationError("benchmark needs >= 1 frame");
  if (levels.empty()) throw ValidationError("benchmark needs >= 1 level");
  const int n_cls = frames.front().gt.n_cls;
  for (const BenchFrame& f : frames) {
    f.gt.validate();
    if (f.gt.n_cls != n_cls)
      throw ValidationError("benchmark frames disagree on n_cls");
    if (static_cast<Eigen::Index>(f.gt.size()) != f.cloud.n())
      throw ValidationError("benchmark frame gt size does not match cloud");
  }

  BenchmarkRun run;
  run.levels = levels;
  run.seed = seed;
  for (int level : levels) {
    ConfusionMatrix cm(n_cls);
    for (const BenchFrame& frame : frames) {
      const calib::CalibrationRig rig_eval =
          perturb_rig(frame.rig, level, seed, frame.frame_id);
      pointcloud::LabelArray pred;
      try {
        pred = predict(frame, rig_eval);
      } catch (const std::exception& e) {
        throw Error("benchmark: predictor failed on frame " +
                    std::to_string(frame.frame_id) + ": " + e.what());
      }
      if (pred.size() != frame.gt.size())
        throw ValidationError("benchmark: prediction size mismatch on frame " +
                              std::to_string(frame.frame_id));
      pred.n_cls = n_cls;
      accumulate(cm, frame.gt, pred);
    }
    run.reports.push_back(miou(cm));
  }
  return run;
}

std::string report_to_json(const BenchmarkRun& run) {
  nlohmann::json j;
  j["seed"] = run.seed;
  j["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < run.levels.size(); ++i) {
    nlohmann::json jl;
    jl["level"] = run.levels[i];
    const IoUReport& report = run.reports[i];
    if (report.miou)
      jl["miou"] = *report.miou;
    else
      jl["miou"] = nullptr;
    jl["per_class"] = nlohmann::json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
      if (report.defined[c])
        jl["per_class"].push_back(report.per_class[c]);
      else
        jl["per_class"].push_back(nullptr);
    }
    j["levels"].push_back(jl);
  }
  return j.dump(2) + "\n";
}

void write_report(const BenchmarkRun& run, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path.string());
  out << report_to_json(run);
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace fuselab::eval
