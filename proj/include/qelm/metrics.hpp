#pragma once

// Scoring and comparison utilities: MSE/NMSE/R^2, pattern fidelity, Uhlmann
// fidelity, and the confusion matrix for witness-sign classification.
// NMSE is defined as MSE / var(true), so NMSE = 1 - R^2 for the same
// prediction set.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>

#include "qelm/lattice.hpp"

namespace qelm {

struct ScoreReport {
  double mse = 0.0;
  double nmse = 0.0;
  double r2 = 0.0;
  Eigen::VectorXd per_task_mse;  // multitask breakdown; empty for M = 1
};

inline double variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

inline std::pair<double, double> mse_nmse(const Eigen::VectorXd& pred,
                                          const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() < 2)
    throw std::invalid_argument("mse_nmse: need equal lengths >= 2");
  const double mse = (pred - truth).squaredNorm() / static_cast<double>(pred.size());
  const double var = variance(truth);
  if (var <= 0.0) throw std::invalid_argument("mse_nmse: zero label variance");
  return {mse, mse / var};
}

inline ScoreReport score(const Eigen::MatrixXd& pred,
                         const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("score: shape mismatch");
  ScoreReport rep;
  const Eigen::Index n = pred.rows(), m = pred.cols();
  double var_acc = 0.0;
  rep.per_task_mse.resize(m);
  for (Eigen::Index t = 0; t < m; ++t) {
    rep.per_task_mse[t] =
        (pred.col(t) - truth.col(t)).squaredNorm() / static_cast<double>(n);
    var_acc += variance(truth.col(t));
  }
  rep.mse = rep.per_task_mse.sum() / static_cast<double>(m);
  if (var_acc <= 0.0) throw std::invalid_argument("score: zero label variance");
  rep.nmse = rep.mse / (var_acc / static_cast<double>(m));
  rep.r2 = 1.0 - rep.nmse;
  if (m == 1) rep.per_task_mse.resize(0);
  return rep;
}

// Normalized Frobenius inner product <A,B> / (|A| |B|) on nonnegative
// patterns. The Bhattacharyya variant (overlap of sqrt-distributions) is kept
// behind a flag for sensitivity checks against the paper's ambiguous
// "(Frobenius norm)" wording.
enum class PatternFidelityKind { frobenius, bhattacharyya };

inline double pattern_fidelity(
    const CorrelationPattern& a, const CorrelationPattern& b,
    PatternFidelityKind kind = PatternFidelityKind::frobenius) {
  a.validate();
  b.validate();
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw std::invalid_argument("pattern_fidelity: shape mismatch");
  if (kind == PatternFidelityKind::frobenius) {
    const double na = a.values.norm(), nb = b.values.norm();
    if (na <= 0.0 || nb <= 0.0)
      throw std::invalid_argument("pattern_fidelity: zero pattern");
    return (a.values.array() * b.values.array()).sum() / (na * nb);
  }
  const double sa = a.values.sum(), sb = b.values.sum();
  if (sa <= 0.0 || sb <= 0.0)
    throw std::invalid_argument("pattern_fidelity: zero pattern");
  return ((a.values.array() / sa).sqrt() * (b.values.array() / sb).sqrt()).sum();
}

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 via Hermitian
// eigendecompositions; reduces to <psi|rho|psi> for pure sigma.
inline double uhlmann_fidelity(const Eigen::MatrixXcd& rho,
                               const Eigen::MatrixXcd& sigma) {
  if (rho.rows() != rho.cols() || sigma.rows() != sigma.cols() ||
      rho.rows() != sigma.rows())
    throw std::invalid_argument("uhlmann_fidelity: shape mismatch");
  constexpr double kTol = 1e-8;
  auto check = [&](const Eigen::MatrixXcd& m) {
    if ((m - m.adjoint()).norm() > kTol * std::max(1.0, m.norm()))
      throw std::invalid_argument("uhlmann_fidelity: matrix not Hermitian");
  };
  check(rho);
  check(sigma);
  // Eigenvalues at numerical-noise level are zeroed before the square roots;
  // sqrt(1e-17) would otherwise contribute a spurious ~3e-9.
  const auto clamp_spectrum = [&](const Eigen::VectorXd& ev) {
    const double floor = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    if (ev.minCoeff() < -kTol)
      throw std::invalid_argument("uhlmann_fidelity: matrix not PSD");
    return Eigen::VectorXd((ev.array() < floor).select(0.0, ev));
  };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  const Eigen::VectorXd clamped = clamp_spectrum(es.eigenvalues());
  const Eigen::MatrixXcd sqrt_rho = es.eigenvectors() *
                                    clamped.cwiseSqrt().asDiagonal() *
                                    es.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> inner(sqrt_rho * sigma *
                                                        sqrt_rho);
  const double tr = clamp_spectrum(inner.eigenvalues()).cwiseSqrt().sum();
  return std::min(tr * tr, 1.0 + 1e-12);
}

struct ConfusionMatrix {
  long tp = 0;  // entangled predicted entangled
  long tn = 0;
  long fp = 0;  // separable predicted entangled
  long fn = 0;

  long total() const { return tp + tn + fp + fn; }
  double entangled_accuracy() const {
    return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
  }
  double separable_false_positive_rate() const {
    return tn + fp == 0 ? 0.0 : static_cast<double>(fp) / (tn + fp);
  }
  double overall_accuracy() const {
    return total() == 0 ? 1.0 : static_cast<double>(tp + tn) / total();
  }
};

// Binary classification of W < threshold (entangled) vs W >= threshold.
inline ConfusionMatrix witness_confusion(const Eigen::VectorXd& pred,
                                         const Eigen::VectorXd& truth,
                                         double threshold = 0.0) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("witness_confusion: length mismatch");
  ConfusionMatrix cm;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool ent_true = truth[i] < threshold;
    const bool ent_pred = pred[i] < threshold;
    if (ent_true && ent_pred) ++cm.tp;
    else if (ent_true && !ent_pred) ++cm.fn;
    else if (!ent_true && ent_pred) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

}  // namespace qelm
