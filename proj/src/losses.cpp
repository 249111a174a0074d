#include "fuselab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fuselab/errors.hpp"

namespace fuselab::losses {

namespace {

void check_shapes(const ProbDist& p, const pointcloud::LabelArray& labels) {
  p.validate();
  if (static_cast<Eigen::Index>(labels.size()) != p.n())
    throw ValidationError("loss: label count does not match probability rows");
  if (labels.n_cls != p.n_cls())
    throw ValidationError("loss: label n_cls does not match probability columns");
  labels.validate();
}

}  // namespace

void ProbDist::validate() const {
  if (p.rows() < 1 || p.cols() < 1)
    throw ValidationError("probability matrix must be non-empty");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      const double v = p(i, k);
      if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError("probability entries must lie in [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ValidationError("probability rows must sum to 1");
  }
}

LossConfig LossConfig::uniform(Eigen::Index n_cls) {
  LossConfig cfg;
  cfg.class_weights = Eigen::VectorXd::Ones(n_cls);
  return cfg;
}

void LossConfig::validate(Eigen::Index n_cls) const {
  if (class_weights.size() != n_cls)
    throw ValidationError("loss config needs one class weight per class");
  for (Eigen::Index c = 0; c < n_cls; ++c)
    if (!std::isfinite(class_weights(c)) || !(class_weights(c) > 0.0))
      throw ValidationError("class weights must be finite and positive");
  if (!(kd_temperature > 0.0) || !std::isfinite(kd_temperature))
    throw ValidationError("kd temperature must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw ValidationError("loss coefficients must be >= 0");
  if (!(epsilon > 0.0)) throw ValidationError("log guard must be positive");
}

LossResult weighted_ce(const ProbDist& p, const pointcloud::LabelArray& labels,
                       const LossConfig& cfg) {
  check_shapes(p, labels);
  cfg.validate(p.n_cls());
  const Eigen::Index n = p.n();
  const double eps = cfg.epsilon;

  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(n, p.n_cls());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels.labels[i];
    const double w = cfg.class_weights(y);
    const double py = p.p(i, y);
    loss += -w * std::log(std::max(py, eps));
    if (py > eps) out.grad(i, y) = -w / (py * static_cast<double>(n));
  }
  out.value = loss / static_cast<double>(n);
  return out;
}

namespace {

// Descending stable order of the error vector; ties keep ascending point
// index so the oracle and the implementation share one permutation.
std::vector<int> sort_descending(const std::vector<double>& errors) {
  std::vector<int> order(errors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return errors[a] > errors[b]; });
  return order;
}

}  // namespace

LossResult lovasz_softmax(const ProbDist& p, const pointcloud::LabelArray& labels) {
  check_shapes(p, labels);
  const Eigen::Index n = p.n();
  const Eigen::Index n_cls = p.n_cls();

  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(n, n_cls);

  std::vector<int> present;
  {
    std::vector<char> seen(n_cls, 0);
    for (int y : labels.labels) seen[y] = 1;
    for (Eigen::Index c = 0; c < n_cls; ++c)
      if (seen[c]) present.push_back(static_cast<int>(c));
  }

  std::vector<double> errors(n);
  double total = 0.0;
  for (int c : present) {
    long positives = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool is_c = labels.labels[i] == c;
      errors[i] = is_c ? 1.0 - p.p(i, c) : p.p(i, c);
      positives += is_c;
    }
    const std::vector<int> order = sort_descending(errors);

    // Jaccard error of the sorted-prefix misprediction sets; the deltas
    // are the Lovasz-extension gradient at the fixed permutation.
    double loss_c = 0.0;
    double prev_jaccard = 0.0;
    long cum_pos = 0, cum_neg = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const int idx = order[k];
      const bool is_c = labels.labels[idx] == c;
      cum_pos += is_c;
      cum_neg += !is_c;
      const double jaccard =
          1.0 - static_cast<double>(positives - cum_pos) /
                    static_cast<double>(positives + cum_neg);
      const double delta = jaccard - prev_jaccard;
      prev_jaccard = jaccard;
      loss_c += errors[idx] * delta;
      out.grad(idx, c) += is_c ? -delta : delta;
    }
    total += loss_c;
  }

  const double inv_present = 1.0 / static_cast<double>(present.size());
  out.value = total * inv_present;
  out.grad *= inv_present;
  return out;
}

LossResult kd_loss(const ProbDist& teacher, const ProbDist& student,
                   const pointcloud::LabelArray& labels, const LossConfig& cfg) {
  check_shapes(student, labels);
  teacher.validate();
  cfg.validate(student.n_cls());
  if (teacher.n() != student.n() || teacher.n_cls() != student.n_cls())
    throw ValidationError("kd_loss: teacher and student shapes differ");

  const Eigen::Index n = student.n();
  const Eigen::Index n_cls = student.n_cls();
  const double lam = cfg.kd_temperature;
  const double lam2 = lam * lam;
  const double lam3 = lam2 * lam;
  const double eps = cfg.epsilon;

  LossResult out;
  out.grad = Eigen::MatrixXd::Zero(n, n_cls);
  double loss = 0.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels.labels[i];
    const double teacher_c = teacher.p(i, c);
    const double student_c = student.p(i, c);

    // Target term, teacher probability as a constant weight.
    loss += -teacher_c * std::log(std::max(student_c, eps));
    if (student_c > eps) out.grad(i, c) += -teacher_c / student_c;

    if (n_cls < 2) continue;
    double teacher_rest = 0.0, student_rest = 0.0;
    for (Eigen::Index k = 0; k < n_cls; ++k) {
      if (k == c) continue;
      teacher_rest += teacher.p(i, k);
      student_rest += student.p(i, k);
    }
    // Degenerate non-target mass: the non-target term is defined as 0.
    if (teacher_rest < eps || student_rest < eps) continue;

    double powered_sum = 0.0;
    for (Eigen::Index k = 0; k < n_cls; ++k) {
      if (k == c) continue;
      powered_sum += std::pow(student.p(i, k), lam);
    }
    if (powered_sum < eps) continue;

    for (Eigen::Index k = 0; k < n_cls; ++k) {
      if (k == c) continue;
      const double t_k = teacher.p(i, k) / teacher_rest;
      const double n_k = std::pow(student.p(i, k), lam) / powered_sum;
      loss += -lam2 * t_k * std::log(std::max(n_k, eps));

      const double pm = student.p(i, k);
      if (pm > eps)
        out.grad(i, k) +=
            -lam3 * (t_k / pm - std::pow(pm, lam - 1.0) / powered_sum);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n;
  out.grad *= inv_n;
  return out;
}

LossResult total_loss(const ProbDist& p, const ProbDist& teacher,
                      const pointcloud::LabelArray& labels,
                      const LossConfig& cfg) {
  auto ce = weighted_ce(p, labels, cfg);
  auto lz = lovasz_softmax(p, labels);
  LossResult out;
  out.value = cfg.lambda1 * (ce.value + lz.value);
  out.grad = cfg.lambda1 * (ce.grad + lz.grad);
  if (cfg.lambda2 != 0.0) {
    auto kd = kd_loss(teacher, p, labels, cfg);
    out.value += cfg.lambda2 * kd.value;
    out.grad += cfg.lambda2 * kd.grad;
  }
  return out;
}

Eigen::VectorXd nontarget_normalize(const Eigen::VectorXd& v, Eigen::Index target) {
  if (target < 0 || target >= v.size())
    throw ValidationError("nontarget_normalize: target index out of range");
  double rest = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (k != target) rest += v(k);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  if (rest <= 0.0) return out;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (k != target) out(k) = v(k) / rest;
  return out;
}

}  // namespace fuselab::losses
