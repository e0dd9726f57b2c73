#pragma once

// Electro-optic-modulator reservoir: truncated Bessel-series transfer
// matrices, the two-arm reservoir map, and the conjugated seed chain used for
// classical training.
//
// A phase modulator driven by a single tone at the bin spacing couples
// neighboring bins with U(k,j) = J_{k-j}(delta) e^{i (k-j) theta}. The
// windowed matrix is used as-is: it is sub-unitary at the window edges,
// mirroring photons scattered outside the measured bins. Shifting the drive
// phase by pi gives the adjoint, U(theta+pi) = U(theta)^dagger, which is how
// the experiment realizes time reversal for the seed chain.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qelm/bessel.hpp"
#include "qelm/lattice.hpp"
#include "qelm/synthesis.hpp"

namespace qelm {

// Additional drive tone at `harmonic` times the bin spacing; hook for
// synthetic-lattice topologies beyond nearest-neighbor. Not used by the
// shipped experiments.
struct DriveTone {
  int harmonic = 2;
  double depth = 0.0;
  double phase = 0.0;
};

struct EomConfig {
  double depth = 1.4;   // modulation depth delta = pi * V0 / Vpi
  double phase = 0.0;   // RF phase theta
  BinWindow window = BinWindow::evolution_default();
  std::vector<DriveTone> extra_tones;
};

struct EomUnitary {
  Eigen::MatrixXcd matrix;
  EomConfig config;
};

namespace detail {

// Multi-tone transfer entries are Fourier coefficients of exp(i phi(t)) with
// phi(t) = sum_m depth_m sin(m w t + theta_m); evaluated by trapezoidal
// quadrature over one period. Also serves as an independent cross-check of
// the single-tone Bessel form in the tests.
inline std::complex<double> fourier_transfer(const EomConfig& cfg, int order) {
  constexpr int kSamples = 4096;
  std::complex<double> acc = 0.0;
  for (int s = 0; s < kSamples; ++s) {
    const double t = 2.0 * M_PI * s / kSamples;
    double phi = cfg.depth * std::sin(t + cfg.phase);
    for (const auto& tone : cfg.extra_tones)
      phi += tone.depth * std::sin(tone.harmonic * t + tone.phase);
    acc += std::exp(std::complex<double>(0.0, phi - order * t));
  }
  return acc / static_cast<double>(kSamples);
}

}  // namespace detail

inline EomUnitary eom_unitary(const EomConfig& cfg) {
  if (cfg.depth < 0.0) throw std::invalid_argument("eom_unitary: depth < 0");
  if (cfg.window.dimension() < 2)
    throw std::invalid_argument("eom_unitary: window dimension < 2");
  const int d = cfg.window.dimension();
  Eigen::MatrixXcd u(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      const int n = r - c;
      if (cfg.extra_tones.empty())
        u(r, c) = bessel_j(n, cfg.depth) *
                  std::exp(std::complex<double>(0.0, n * cfg.phase));
      else
        u(r, c) = detail::fourier_transfer(cfg, n);
    }
  return {std::move(u), cfg};
}

struct ReservoirMap {
  EomUnitary signal_unitary;
  EomUnitary idler_unitary;
};

// Both arms driven by the same waveform (theta_s - theta_i = 0).
inline ReservoirMap make_reservoir(double depth, double phase = 0.0,
                                   BinWindow w = BinWindow::evolution_default()) {
  EomConfig cfg{depth, phase, w, {}};
  EomUnitary u = eom_unitary(cfg);
  return {u, u};
}

// S -> U_s S U_i^T, the matrix form of (U_s (x) U_i) acting on
// sum_kj S_kj |k>|j>.
inline BiphotonAmplitude reservoir_evolve(const BiphotonAmplitude& state,
                                          const ReservoirMap& map) {
  if (map.signal_unitary.config.window != state.window ||
      map.idler_unitary.config.window != state.window)
    throw std::invalid_argument("reservoir_evolve: window mismatch");
  Eigen::MatrixXcd out = map.signal_unitary.matrix * state.amplitudes *
                         map.idler_unitary.matrix.transpose();
  return {std::move(out), state.window, state.normalized};
}

// Back-propagated idler chain for stimulated training. The spontaneous idler
// traverses waveshaper then EOM, U_i = U_eom(theta) diag(g); the seed
// traverses the pi-shifted EOM then the conjugated weights, so
//   U_tilde = diag(conj g) U_eom(theta + pi) = U_i^dagger  exactly.
// Pass no weights for a bare-EOM chain.
inline Eigen::MatrixXcd conjugated_seed_chain(
    const EomUnitary& idler, const Eigen::VectorXcd* idler_weights = nullptr) {
  EomConfig shifted = idler.config;
  shifted.phase += M_PI;
  Eigen::MatrixXcd u = eom_unitary(shifted).matrix;
  if (idler_weights == nullptr) return u;
  if (idler_weights->size() != idler.config.window.dimension())
    throw std::invalid_argument("conjugated_seed_chain: weight size mismatch");
  return idler_weights->conjugate().asDiagonal() * u;
}

}  // namespace qelm
