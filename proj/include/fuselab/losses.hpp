#pragma once

#include <Eigen/Dense>

#include "fuselab/pointcloud.hpp"

namespace fuselab::losses {

/// N x N_cls matrix of class probabilities; every row sums to 1.
struct ProbDist {
  Eigen::MatrixXd p;

  Eigen::Index n() const { return p.rows(); }
  Eigen::Index n_cls() const { return p.cols(); }
  void validate() const;
};

struct LossConfig {
  Eigen::VectorXd class_weights;  // one positive weight per class
  double kd_temperature = 1.0;    // lambda in the distillation term
  double lambda1 = 1.0;           // segmentation-loss coefficient
  double lambda2 = 1.0;           // distillation-loss coefficient
  double epsilon = 1e-12;         // log guard

  static LossConfig uniform(Eigen::Index n_cls);
  void validate(Eigen::Index n_cls) const;
};

/// Loss value plus the analytic gradient w.r.t. the (student) probability
/// entries. Gradients at log-guarded entries are zeroed so they stay
/// consistent with finite differences of the guarded loss.
struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean over points of -w_y * log(max(p_y, eps)). Gradient entries for
/// non-target classes are zero.
LossResult weighted_ce(const ProbDist& p, const pointcloud::LabelArray& labels,
                       const LossConfig& cfg);

/// Lovasz-Softmax: for each class present in the labels, the per-point
/// errors (1-p for the target class, p otherwise) are sorted descending
/// and weighted by the Lovasz-extension gradient of the Jaccard error of
/// the sorted ground-truth indicator; the result is the mean over present
/// classes. The gradient uses the fixed sort permutation. Ties sort by
/// ascending point index.
LossResult lovasz_softmax(const ProbDist& p, const pointcloud::LabelArray& labels);

/// Weak-calibration distillation loss. Per point with target class c:
///   -p̂_c log p_c  -  λ² Σ_{k≠c} N(p̂_k) log N(p_k^λ)
/// where N renormalizes over the non-target classes and p^λ is the
/// elementwise power applied before renormalization. The teacher is a
/// constant (no gradient); when either distribution has non-target mass
/// below eps the non-target term for that point is 0.
LossResult kd_loss(const ProbDist& teacher, const ProbDist& student,
                   const pointcloud::LabelArray& labels, const LossConfig& cfg);

/// lambda1 * (weighted_ce + lovasz_softmax) + lambda2 * kd_loss, with
/// summed gradients. The teacher is only consulted when lambda2 != 0.
LossResult total_loss(const ProbDist& p, const ProbDist& teacher,
                      const pointcloud::LabelArray& labels,
                      const LossConfig& cfg);

/// Renormalization operator used by the distillation term: zero at the
/// target index, v_k / sum of non-target entries elsewhere. Exposed so
/// its scale invariance can be checked directly.
Eigen::VectorXd nontarget_normalize(const Eigen::VectorXd& v, Eigen::Index target);

}  // namespace fuselab::losses
