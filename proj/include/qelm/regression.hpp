#pragma once

// The QELM readout: variance-threshold feature selection, standardization,
// Elastic-Net regression by cyclic coordinate descent (single-task and
// multitask with a row-wise l2,1 penalty), k-fold cross-validation over the
// shipped hyperparameter grids, and prediction with frozen preprocessing.
//
// Objective (per sample, matching the common scikit-learn parametrization the
// training grids were designed for):
//   (1/2n) ||Y - X W - 1 b^T||_F^2
//     + alpha * l1_ratio * sum_j ||W_j||_2
//     + alpha * (1 - l1_ratio) / 2 * ||W||_F^2
// where W_j is the j-th row (one feature across tasks). For a single task the
// row norm is |w_j| and the update is the familiar soft-thresholding.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qelm/rng.hpp"

namespace qelm {

struct PreprocessSpec {
  double variance_threshold = 0.0;
  bool standardize = true;
};

struct ElasticNetGrid {
  std::vector<double> l1_ratios;
  std::vector<double> alphas;  // overall regularization strengths
  int folds = 9;
};

inline std::vector<double> log_spaced(double lo_exp, double hi_exp, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * i / (n - 1.0));
  return v;
}

// Shipped grids, one per inference task.
inline ElasticNetGrid witness_grid() {
  return {{0.1, 0.5, 0.7}, log_spaced(-5.0, 1.0, 100), 9};
}
inline ElasticNetGrid satwap_grid() {
  return {{0.0, 0.05, 0.1, 0.5, 0.7, 1.0}, log_spaced(-9.0, -3.0, 100), 4};
}
inline ElasticNetGrid hamiltonian_grid() {
  return {{0.01, 0.05, 0.1, 0.25, 0.5, 0.9, 1.0}, log_spaced(-6.0, 0.0, 50), 5};
}

// Population variance per column (the convention the shipped feature counts
// were derived with).
inline Eigen::VectorXd column_variance(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean.transpose()).array().square().colwise().sum() /
         static_cast<double>(x.rows());
}

inline std::vector<std::uint8_t> variance_select(const Eigen::MatrixXd& x,
                                                 double threshold) {
  if (x.rows() < 2) throw std::invalid_argument("variance_select: need N >= 2");
  const Eigen::VectorXd var = column_variance(x);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(x.cols()));
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    // threshold 0 keeps everything; any positive threshold drops constants.
    mask[static_cast<std::size_t>(j)] =
        (threshold <= 0.0 || var[j] > threshold) ? 1 : 0;
    kept += mask[static_cast<std::size_t>(j)];
  }
  if (kept == 0)
    throw std::invalid_argument("variance_select: threshold too high, no features kept");
  return mask;
}

inline Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& x,
                                  const std::vector<std::uint8_t>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != x.cols())
    throw std::invalid_argument("apply_mask: mask size mismatch");
  Eigen::Index kept = 0;
  for (const auto m : mask) kept += m;
  Eigen::MatrixXd out(x.rows(), kept);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (mask[static_cast<std::size_t>(j)]) out.col(c++) = x.col(j);
  return out;
}

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size())
      throw std::invalid_argument("Standardizer: dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }
};

inline std::pair<Eigen::MatrixXd, Standardizer> standardize(
    const Eigen::MatrixXd& x) {
  Standardizer st;
  st.mean = x.colwise().mean();
  st.scale = column_variance(x).cwiseSqrt();
  for (Eigen::Index j = 0; j < st.scale.size(); ++j)
    if (!(st.scale[j] > 0.0))
      throw std::invalid_argument("standardize: zero-variance column " +
                                  std::to_string(j) +
                                  " (run variance_select first)");
  return {st.transform(x), st};
}

struct EnetOptions {
  int max_sweeps = 100000;
  double tol = 1e-8;     // KKT residual tolerance
  // Near-singular grid points (vanishing alpha with more features than
  // samples) converge geometrically with rate 1 - alpha; after soft_cap
  // sweeps a fit within loose_tol is accepted and the achieved KKT reported.
  int soft_cap = 5000;
  double loose_tol = 1e-5;
  bool independent_tasks = false;  // fallback: no row coupling across tasks
};

struct EnetFit {
  Eigen::MatrixXd weights;    // F x M
  Eigen::VectorXd intercept;  // M
  int sweeps = 0;
  double kkt = 0.0;
};

namespace detail {

inline double enet_objective(const Eigen::MatrixXd& residual,
                             const Eigen::MatrixXd& w, double alpha,
                             double l1_ratio, double n, bool coupled) {
  double pen1 = 0.0;
  if (coupled)
    for (Eigen::Index j = 0; j < w.rows(); ++j) pen1 += w.row(j).norm();
  else
    pen1 = w.cwiseAbs().sum();
  return residual.squaredNorm() / (2.0 * n) + alpha * l1_ratio * pen1 +
         0.5 * alpha * (1.0 - l1_ratio) * w.squaredNorm();
}

// Max KKT (subgradient stationarity) residual over coordinates/rows.
inline double enet_kkt(const Eigen::MatrixXd& xc, const Eigen::MatrixXd& residual,
                       const Eigen::MatrixXd& w, double alpha, double l1_ratio,
                       bool coupled) {
  const double n = static_cast<double>(xc.rows());
  const double lam1 = alpha * l1_ratio;
  const double lam2 = alpha * (1.0 - l1_ratio);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    const Eigen::RowVectorXd grad =
        -(xc.col(j).transpose() * residual) / n + lam2 * w.row(j);
    if (coupled) {
      const double wn = w.row(j).norm();
      const double r = wn > 0.0
                           ? (grad + lam1 * w.row(j) / wn).lpNorm<Eigen::Infinity>()
                           : std::max(0.0, grad.norm() - lam1);
      worst = std::max(worst, r);
    } else {
      for (Eigen::Index t = 0; t < w.cols(); ++t) {
        const double g = grad[t];
        const double r = w(j, t) != 0.0
                             ? std::abs(g + lam1 * (w(j, t) > 0 ? 1.0 : -1.0))
                             : std::max(0.0, std::abs(g) - lam1);
        worst = std::max(worst, r);
      }
    }
  }
  return worst;
}

// Cyclic coordinate descent on centered data. `w` is used as the warm start.
inline EnetFit enet_centered(const Eigen::MatrixXd& xc, const Eigen::MatrixXd& yc,
                             double alpha, double l1_ratio,
                             const EnetOptions& opt, Eigen::MatrixXd w) {
  const Eigen::Index n = xc.rows(), f = xc.cols(), m = yc.cols();
  const double dn = static_cast<double>(n);
  const bool coupled = !opt.independent_tasks;
  const double lam1 = alpha * l1_ratio;
  const double lam2 = alpha * (1.0 - l1_ratio);

  Eigen::VectorXd col_sq(f);
  for (Eigen::Index j = 0; j < f; ++j) col_sq[j] = xc.col(j).squaredNorm() / dn;

  Eigen::MatrixXd residual = yc - xc * w;
  double prev_obj = enet_objective(residual, w, alpha, l1_ratio, dn, coupled);

  EnetFit fit;
  int stalled = 0;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < f; ++j) {
      if (col_sq[j] <= 0.0) continue;
      const Eigen::RowVectorXd z =
          (xc.col(j).transpose() * residual) / dn + col_sq[j] * w.row(j);
      Eigen::RowVectorXd w_new(m);
      const double denom = col_sq[j] + lam2;
      if (coupled) {
        const double zn = z.norm();
        w_new = zn > lam1 ? Eigen::RowVectorXd(z * ((1.0 - lam1 / zn) / denom))
                          : Eigen::RowVectorXd::Zero(m);
      } else {
        for (Eigen::Index t = 0; t < m; ++t) {
          const double zt = z[t];
          const double mag = std::abs(zt) - lam1;
          w_new[t] = mag > 0.0 ? (zt > 0 ? mag : -mag) / denom : 0.0;
        }
      }
      if ((w_new - w.row(j)).cwiseAbs().maxCoeff() > 0.0) {
        residual.noalias() += xc.col(j) * (w.row(j) - w_new);
        w.row(j) = w_new;
      }
    }
    const double obj = enet_objective(residual, w, alpha, l1_ratio, dn, coupled);
    if (obj > prev_obj + 1e-10 * (1.0 + std::abs(prev_obj)))
      throw std::runtime_error("elastic net: objective increased within a sweep");
    const double decrease = prev_obj - obj;
    prev_obj = obj;
    const bool machine_stall =
        decrease <= 1e-15 * (1.0 + std::abs(obj)) ? ++stalled >= 10
                                                  : (stalled = 0, false);
    // The KKT check costs as much as a sweep; probe on a cadence.
    if (sweep <= 3 || sweep % 10 == 0 || machine_stall ||
        sweep == opt.max_sweeps) {
      const double kkt = enet_kkt(xc, residual, w, alpha, l1_ratio, coupled);
      const bool strict = kkt <= opt.tol;
      const bool soft = sweep >= opt.soft_cap && kkt <= opt.loose_tol;
      if (strict || soft || machine_stall) {
        fit.weights = std::move(w);
        fit.sweeps = sweep;
        fit.kkt = kkt;
        return fit;
      }
    }
  }
  throw std::runtime_error(
      "elastic net: no convergence after " + std::to_string(opt.max_sweeps) +
      " sweeps (alpha=" + std::to_string(alpha) +
      ", l1_ratio=" + std::to_string(l1_ratio) + ", KKT=" +
      std::to_string(enet_kkt(xc, residual, w, alpha, l1_ratio, coupled)) + ")");
}

}  // namespace detail

// Multitask fit with intercepts (labels are not centered by the caller;
// centering happens internally and the intercept absorbs the means).
inline EnetFit multitask_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                             double alpha, double l1_ratio,
                             const EnetOptions& opt = {},
                             const Eigen::MatrixXd* warm_start = nullptr) {
  if (x.rows() != y.rows() || x.rows() < 1)
    throw std::invalid_argument("multitask_fit: shape mismatch");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("multitask_fit: non-finite inputs");
  if (alpha < 0.0) throw std::invalid_argument("multitask_fit: alpha < 0");
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  Eigen::MatrixXd w0 = warm_start != nullptr
                           ? *warm_start
                           : Eigen::MatrixXd::Zero(x.cols(), y.cols());
  EnetFit fit = detail::enet_centered(x.rowwise() - x_mean,
                                      y.rowwise() - y_mean, alpha, l1_ratio,
                                      opt, std::move(w0));
  fit.intercept = (y_mean - x_mean * fit.weights).transpose();
  return fit;
}

struct SingleFit {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  int sweeps = 0;
  double kkt = 0.0;
};

inline SingleFit elastic_net_fit(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y, double alpha,
                                 double l1_ratio, const EnetOptions& opt = {}) {
  const EnetFit fit = multitask_fit(x, y, alpha, l1_ratio, opt);
  return {fit.weights.col(0), fit.intercept[0], fit.sweeps, fit.kkt};
}

// Frozen readout: mask + standardization statistics + affine map.
struct TrainedReadout {
  std::vector<std::uint8_t> feature_mask;
  Standardizer stats;
  bool standardized = true;
  Eigen::MatrixXd weights;    // F_kept x M
  Eigen::VectorXd intercepts; // M
  double chosen_alpha = 0.0;
  double chosen_l1_ratio = 0.0;
  double cv_score = 0.0;      // mean validation R^2 at the chosen point
};

inline Eigen::MatrixXd apply_preprocess(const TrainedReadout& model,
                                        const Eigen::MatrixXd& x_raw) {
  Eigen::MatrixXd x = apply_mask(x_raw, model.feature_mask);
  return model.standardized ? model.stats.transform(x) : x;
}

inline Eigen::MatrixXd predict(const TrainedReadout& model,
                               const Eigen::MatrixXd& x_raw) {
  const Eigen::MatrixXd x = apply_preprocess(model, x_raw);
  return (x * model.weights).rowwise() + model.intercepts.transpose();
}

namespace detail {

// Contiguous fold blocks over a seeded shuffle of the samples. The shuffle
// permutes a canonical (content-lexicographic) ordering rather than the
// presented row order, so the fold partition -- and therefore the CV
// selection -- is invariant to how the caller happened to order the samples.
inline std::vector<std::vector<Eigen::Index>> fold_assignment(
    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int folds,
    std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> canon(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) canon[static_cast<std::size_t>(i)] = i;
  std::stable_sort(canon.begin(), canon.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     for (Eigen::Index j = 0; j < x.cols(); ++j) {
                       if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
                     }
                     for (Eigen::Index j = 0; j < y.cols(); ++j) {
                       if (y(a, j) != y(b, j)) return y(a, j) < y(b, j);
                     }
                     return false;
                   });
  Rng rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(canon[static_cast<std::size_t>(i)],
              canon[rng.index(static_cast<std::size_t>(i) + 1)]);
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  const Eigen::Index base = n / folds, extra = n % folds;
  Eigen::Index pos = 0;
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index len = base + (f < extra ? 1 : 0);
    out[static_cast<std::size_t>(f)].assign(canon.begin() + pos,
                                            canon.begin() + pos + len);
    pos += len;
  }
  return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x,
                                 const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

// Pooled validation R^2 across tasks.
inline double r2_score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  double ssr = (pred - truth).squaredNorm();
  double sst = 0.0;
  for (Eigen::Index t = 0; t < truth.cols(); ++t) {
    const double m = truth.col(t).mean();
    sst += (truth.col(t).array() - m).square().sum();
  }
  if (sst <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ssr / sst;
}

}  // namespace detail

// Preprocess once on the training set, then select (alpha, l1_ratio) by
// k-fold cross-validation maximizing mean validation R^2 (ties broken toward
// larger alpha), and refit on the full training set.
inline TrainedReadout cross_validate(const Eigen::MatrixXd& x_raw,
                                     const Eigen::MatrixXd& y,
                                     const ElasticNetGrid& grid,
                                     const PreprocessSpec& pre,
                                     std::uint64_t seed,
                                     const EnetOptions& opt = {}) {
  if (grid.l1_ratios.empty() || grid.alphas.empty())
    throw std::invalid_argument("cross_validate: empty grid");
  if (x_raw.rows() < grid.folds)
    throw std::invalid_argument("cross_validate: fewer samples than folds");

  TrainedReadout model;
  model.feature_mask = variance_select(x_raw, pre.variance_threshold);
  Eigen::MatrixXd x = apply_mask(x_raw, model.feature_mask);
  model.standardized = pre.standardize;
  if (pre.standardize) {
    auto [xs, st] = standardize(x);
    x = std::move(xs);
    model.stats = std::move(st);
  }

  // Alphas descending for warm-started paths.
  std::vector<double> alphas = grid.alphas;
  std::sort(alphas.begin(), alphas.end(), std::greater<>());

  const auto folds = detail::fold_assignment(x, y, grid.folds, seed);
  std::vector<std::vector<Eigen::Index>> train_rows(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f)
        train_rows[f].insert(train_rows[f].end(), folds[g].begin(), folds[g].end());

  // score[l1][alpha] accumulated over folds.
  std::vector<std::vector<double>> score(
      grid.l1_ratios.size(), std::vector<double>(alphas.size(), 0.0));
  bool any_finite = false;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Eigen::MatrixXd xt = detail::take_rows(x, train_rows[f]);
    const Eigen::MatrixXd yt = detail::take_rows(y, train_rows[f]);
    const Eigen::MatrixXd xv = detail::take_rows(x, folds[f]);
    const Eigen::MatrixXd yv = detail::take_rows(y, folds[f]);
    for (std::size_t li = 0; li < grid.l1_ratios.size(); ++li) {
      Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(x.cols(), y.cols());
      for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const EnetFit fit = multitask_fit(xt, yt, alphas[ai],
                                          grid.l1_ratios[li], opt, &warm);
        warm = fit.weights;
        const Eigen::MatrixXd pred =
            (xv * fit.weights).rowwise() + fit.intercept.transpose();
        const double r2 = detail::r2_score(pred, yv);
        if (std::isfinite(r2)) any_finite = true;
        score[li][ai] += r2 / static_cast<double>(folds.size());
      }
    }
  }
  if (!any_finite) throw std::runtime_error("cross_validate: all scores NaN");

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_li = 0, best_ai = 0;
  for (std::size_t li = 0; li < grid.l1_ratios.size(); ++li)
    for (std::size_t ai = 0; ai < alphas.size(); ++ai)
      if (std::isfinite(score[li][ai]) && score[li][ai] > best + 1e-12) {
        best = score[li][ai];
        best_li = li;
        best_ai = ai;
      }

  model.chosen_alpha = alphas[best_ai];
  model.chosen_l1_ratio = grid.l1_ratios[best_li];
  model.cv_score = best;

  const EnetFit fit =
      multitask_fit(x, y, model.chosen_alpha, model.chosen_l1_ratio, opt);
  model.weights = fit.weights;
  model.intercepts = fit.intercept;
  return model;
}

}  // namespace qelm
