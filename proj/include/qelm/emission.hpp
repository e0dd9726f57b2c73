#pragma once

// Output-pattern generation and measurement noise. Spontaneous coincidence
// patterns C_kj = |[U_s S U_i^T]_kj|^2 and stimulated intensity patterns
// I_kj = |alpha_j|^2 |[U_s S Useed^*]_kj|^2, plus Poissonian coincidence
// sampling, the OSA noise floor, and SNR accounting.
//
// Correspondence: with Useed = U_i^dagger the normalized stimulated pattern
// equals the normalized spontaneous pattern entrywise; this is the property
// that lets the readout be trained on classical intensities and applied to
// coincidence data.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qelm/lattice.hpp"
#include "qelm/reservoir.hpp"
#include "qelm/rng.hpp"
#include "qelm/synthesis.hpp"

namespace qelm {

struct NoiseModel {
  double total_pairs = 40000.0;        // expected detected pairs per pattern
  double accidental_fraction = 0.05;   // uniform over the Q^2 grid
  double osa_floor_pw = 1.0;           // OSA background, intensity units (pW)
  // Per-pattern total stimulated intensity, same units as osa_floor_pw.
  // Calibrated (with the 1 pW floor) to bright-bin SNR ~= 35 dB stimulated
  // and ~= 16 dB spontaneous; calibration, not physics.
  double stimulated_total_pw = 65000.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(total_pairs > 0.0))
      throw std::invalid_argument("NoiseModel: total_pairs must be > 0");
    if (accidental_fraction < 0.0 || accidental_fraction >= 1.0)
      throw std::invalid_argument("NoiseModel: accidental_fraction in [0,1)");
  }
};

struct CountsPattern {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  BinWindow window;
  double exposure_s = 10.0;

  Eigen::MatrixXd as_real() const { return counts.cast<double>(); }
};

namespace detail {

inline CorrelationPattern restrict_to_window(const Eigen::MatrixXd& full,
                                             BinWindow from, BinWindow to) {
  if (to.lo < from.lo || to.hi > from.hi)
    throw std::invalid_argument("measurement window not inside state window");
  const Eigen::Index r0 = from.index_of(to.lo);
  const Eigen::Index q = to.dimension();
  return {full.block(r0, r0, q, q), to};
}

}  // namespace detail

// Coincidence probabilities of the evolved state on the measurement window.
// The multi-pair term <n_s><n_i> of the full expression is dropped by default
// (low-gain regime); enable it by passing pair_gain > 0, which adds
// pair_gain^2 * <n_s,k><n_i,j> with S normalized to a single pair.
inline CorrelationPattern spontaneous_pattern(const BiphotonAmplitude& state,
                                              const ReservoirMap& map,
                                              BinWindow window,
                                              double pair_gain = 0.0) {
  if (!state.normalized)
    throw std::invalid_argument("spontaneous_pattern: state must be normalized");
  const BiphotonAmplitude evolved = reservoir_evolve(state, map);
  Eigen::MatrixXd full = evolved.amplitudes.cwiseAbs2();
  if (pair_gain > 0.0) {
    const Eigen::MatrixXcd us = map.signal_unitary.matrix * state.amplitudes;
    const Eigen::MatrixXcd ui =
        map.idler_unitary.matrix * state.amplitudes.transpose();
    const Eigen::VectorXd ns = us.cwiseAbs2().rowwise().sum();
    const Eigen::VectorXd ni = ui.cwiseAbs2().rowwise().sum();
    full += pair_gain * pair_gain * (ns * ni.transpose());
  }
  return detail::restrict_to_window(full, state.window, window);
}

// Stimulated intensities, assembled column-by-column over seed modes j with
// per-mode seed power |alpha_j|^2.
inline CorrelationPattern stimulated_pattern(const BiphotonAmplitude& state,
                                             const ReservoirMap& map,
                                             const Eigen::MatrixXcd& seed_chain,
                                             const Eigen::VectorXd& seed_power,
                                             BinWindow window) {
  const int d = state.window.dimension();
  if (seed_chain.rows() != d || seed_chain.cols() != d)
    throw std::invalid_argument("stimulated_pattern: seed chain size mismatch");
  if (seed_power.size() != d)
    throw std::invalid_argument("stimulated_pattern: seed power size mismatch");
  if ((seed_power.array() < 0.0).any() || seed_power.maxCoeff() <= 0.0)
    throw std::invalid_argument("stimulated_pattern: no seed power");
  Eigen::MatrixXd full =
      (map.signal_unitary.matrix * state.amplitudes * seed_chain.conjugate())
          .cwiseAbs2();
  full.array().rowwise() *= seed_power.transpose().array();
  return detail::restrict_to_window(full, state.window, window);
}

// Poissonian coincidence counts: mean total_pairs * p_kj plus a uniform
// accidental background totalling total_pairs * accidental_fraction.
inline CountsPattern sample_coincidences(const CorrelationPattern& pattern,
                                         const NoiseModel& noise, Rng& rng) {
  pattern.validate();
  noise.validate();
  const double tot = pattern.values.sum();
  if (tot <= 0.0) throw std::invalid_argument("sample_coincidences: empty pattern");
  const Eigen::Index q = pattern.values.rows();
  const double accidental_per_bin =
      noise.total_pairs * noise.accidental_fraction / static_cast<double>(q * q);
  CountsPattern out;
  out.counts.resize(q, q);
  out.window = pattern.window;
  for (Eigen::Index r = 0; r < q; ++r)
    for (Eigen::Index c = 0; c < q; ++c) {
      const double mean =
          noise.total_pairs * pattern.values(r, c) / tot + accidental_per_bin;
      out.counts(r, c) = rng.poisson(mean);
    }
  return out;
}

// Accidental-subtracted counts, clamped at zero (C_net).
inline CorrelationPattern accidental_subtracted(const CountsPattern& counts,
                                                const NoiseModel& noise) {
  const Eigen::Index q = counts.counts.rows();
  const double accidental_per_bin =
      noise.total_pairs * noise.accidental_fraction / static_cast<double>(q * q);
  Eigen::MatrixXd net =
      (counts.as_real().array() - accidental_per_bin).max(0.0);
  return {std::move(net), counts.window};
}

// Additive nonnegative OSA background: folded Gaussian with scale osa_floor.
inline CorrelationPattern add_osa_noise(const CorrelationPattern& pattern,
                                        const NoiseModel& noise, Rng& rng) {
  pattern.validate();
  if (noise.osa_floor_pw == 0.0) return pattern;
  Eigen::MatrixXd v = pattern.values;
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    for (Eigen::Index c = 0; c < v.cols(); ++c)
      v(r, c) += std::abs(noise.osa_floor_pw * rng.normal());
  return {std::move(v), pattern.window};
}

// Intensities scaled so the pattern totals the model's stimulated power
// budget, with the OSA floor added.
inline CorrelationPattern osa_acquired(const CorrelationPattern& intensities,
                                       const NoiseModel& noise, Rng& rng) {
  intensities.validate();
  const double tot = intensities.values.sum();
  if (tot <= 0.0) throw std::invalid_argument("osa_acquired: empty pattern");
  CorrelationPattern scaled{
      intensities.values * (noise.stimulated_total_pw / tot),
      intensities.window};
  return add_osa_noise(scaled, noise, rng);
}

enum class SnrMode { coincidence, stimulated };

struct SnrEntry {
  int signal_bin = 0;
  int idler_bin = 0;
  double snr_db = 0.0;
};

namespace detail {

// Indices of the brightest bins accounting for 90% of the cumulative signal,
// sorted descending.
inline std::vector<Eigen::Index> bright_bins(const Eigen::MatrixXd& v) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  const double* data = v.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return data[a] > data[b]; });
  const double total = v.sum();
  std::vector<Eigen::Index> keep;
  double acc = 0.0;
  for (const Eigen::Index i : order) {
    keep.push_back(i);
    acc += data[i];
    if (acc >= 0.9 * total) break;
  }
  return keep;
}

}  // namespace detail

// Per-bin SNR in dB over the bins carrying 90% of the signal, brightest
// first. Coincidence: C_net / sqrt(C_tot); stimulated: I / I_noise.
inline std::vector<SnrEntry> snr_report(const CountsPattern& counts,
                                        const NoiseModel& noise) {
  const Eigen::MatrixXd raw = counts.as_real();
  if (raw.sum() <= 0.0) throw std::invalid_argument("snr_report: zero signal");
  const Eigen::Index q = raw.rows();
  const double accidental_per_bin =
      noise.total_pairs * noise.accidental_fraction / static_cast<double>(q * q);
  std::vector<SnrEntry> out;
  for (const Eigen::Index i : detail::bright_bins(raw)) {
    const Eigen::Index r = i % q, c = i / q;  // column-major linear index
    const double tot = raw(r, c);
    if (tot <= 0.0) continue;  // bin skipped; nothing detected
    const double net = std::max(tot - accidental_per_bin, 0.0);
    if (net <= 0.0) continue;
    out.push_back({static_cast<int>(counts.window.lo + r),
                   static_cast<int>(counts.window.lo + c),
                   10.0 * std::log10(net / std::sqrt(tot))});
  }
  return out;
}

inline std::vector<SnrEntry> snr_report(const CorrelationPattern& intensities,
                                        const NoiseModel& noise) {
  intensities.validate();
  if (intensities.values.sum() <= 0.0)
    throw std::invalid_argument("snr_report: zero signal");
  if (!(noise.osa_floor_pw > 0.0))
    throw std::invalid_argument("snr_report: osa floor must be > 0");
  const Eigen::Index q = intensities.values.rows();
  std::vector<SnrEntry> out;
  for (const Eigen::Index i : detail::bright_bins(intensities.values)) {
    const Eigen::Index r = i % q, c = i / q;
    const double v = intensities.values(r, c);
    if (v <= 0.0) continue;
    out.push_back({static_cast<int>(intensities.window.lo + r),
                   static_cast<int>(intensities.window.lo + c),
                   10.0 * std::log10(v / noise.osa_floor_pw)});
  }
  return out;
}

}  // namespace qelm
