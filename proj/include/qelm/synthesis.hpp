#pragma once

// Input-state synthesis: biphoton amplitude matrices for the single-pump (SP),
// dual-pump (DP) and diagonal qudit families, waveshaper weighting, and the
// random sampling laws used to build datasets.
//
// States are stored as complex amplitude matrices S over (signal bin x idler
// bin); entry S(k,j) is the probability amplitude for signal in bin k and
// idler in bin j. Normalized states satisfy sum |S|^2 = 1. The global phase is
// fixed by making the first nonzero amplitude (row-major) real positive, so
// that equal states compare equal.

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "qelm/lattice.hpp"
#include "qelm/rng.hpp"

namespace qelm {

using Complex = std::complex<double>;

// Diagonal waveshaper weights per bin, |g| <= 1 (passive element). Bins
// outside the declared support carry weight zero.
struct WaveshaperWeights {
  BinWindow window = BinWindow::evolution_default();
  Eigen::VectorXcd signal;  // size window.dimension()
  Eigen::VectorXcd idler;

  static WaveshaperWeights qubit(Complex gs0, Complex gs1, Complex gi0,
                                 Complex gi1,
                                 BinWindow w = BinWindow::evolution_default()) {
    WaveshaperWeights ws;
    ws.window = w;
    ws.signal = Eigen::VectorXcd::Zero(w.dimension());
    ws.idler = Eigen::VectorXcd::Zero(w.dimension());
    ws.signal[w.index_of(0)] = gs0;
    ws.signal[w.index_of(1)] = gs1;
    ws.idler[w.index_of(0)] = gi0;
    ws.idler[w.index_of(1)] = gi1;
    return ws;
  }

  Complex gs(int bin) const { return signal[window.index_of(bin)]; }
  Complex gi(int bin) const { return idler[window.index_of(bin)]; }
};

struct BiphotonAmplitude {
  Eigen::MatrixXcd amplitudes;
  BinWindow window = BinWindow::evolution_default();
  bool normalized = false;

  double total_power() const { return amplitudes.squaredNorm(); }

  Complex at(int signal_bin, int idler_bin) const {
    return amplitudes(window.index_of(signal_bin), window.index_of(idler_bin));
  }
};

namespace detail {

inline void canonical_phase(Eigen::MatrixXcd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (std::abs(m(r, c)) > 0.0) {
        m *= std::conj(m(r, c)) / std::abs(m(r, c));
        return;
      }
}

inline BiphotonAmplitude finish_state(Eigen::MatrixXcd m, BinWindow w,
                                      const char* what) {
  const double norm = m.norm();
  if (norm <= 0.0) throw std::invalid_argument(std::string(what) + ": vacuum state");
  m /= norm;
  canonical_phase(m);
  return {std::move(m), w, true};
}

}  // namespace detail

// SP family: amplitudes on |00> and |11> only (Methods, single-pump form).
inline BiphotonAmplitude sp_state(const WaveshaperWeights& g) {
  const BinWindow w = g.window;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(w.dimension(), w.dimension());
  m(w.index_of(0), w.index_of(0)) = g.gs(0) * g.gi(0);
  m(w.index_of(1), w.index_of(1)) = g.gs(1) * g.gi(1);
  return detail::finish_state(std::move(m), w, "sp_state");
}

// DP family: (2 g_s0 g_i0, g_s0 g_i1, g_s1 g_i0, 2 g_s1 g_i1) on
// (|00>,|01>,|10>,|11>); the factor of two comes from the non-degenerate
// four-wave-mixing process feeding |00> and |11>.
inline BiphotonAmplitude dp_state(const WaveshaperWeights& g) {
  const BinWindow w = g.window;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(w.dimension(), w.dimension());
  m(w.index_of(0), w.index_of(0)) = 2.0 * g.gs(0) * g.gi(0);
  m(w.index_of(0), w.index_of(1)) = g.gs(0) * g.gi(1);
  m(w.index_of(1), w.index_of(0)) = g.gs(1) * g.gi(0);
  m(w.index_of(1), w.index_of(1)) = 2.0 * g.gs(1) * g.gi(1);
  return detail::finish_state(std::move(m), w, "dp_state");
}

// Qudit family: diagonal states sum_j alpha_j |jj> on the qudit logical bins.
inline BiphotonAmplitude qudit_state(
    std::span<const Complex> alphas,
    BinWindow w = BinWindow::evolution_default()) {
  if (alphas.size() < 2 || alphas.size() > 4)
    throw std::invalid_argument("qudit_state: d must be in {2,3,4}");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(w.dimension(), w.dimension());
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    const Eigen::Index b = w.index_of(kQuditLogicalBins[j]);
    m(b, b) = alphas[j];
  }
  return detail::finish_state(std::move(m), w, "qudit_state");
}

// Normalize an arbitrary amplitude matrix into a canonical-phase state.
inline BiphotonAmplitude make_state(Eigen::MatrixXcd amplitudes, BinWindow w) {
  if (amplitudes.rows() != w.dimension() || amplitudes.cols() != w.dimension())
    throw std::invalid_argument("make_state: shape/window mismatch");
  return detail::finish_state(std::move(amplitudes), w, "make_state");
}

enum class StateFamily { sp, dp, qudit };

struct StateFamilySpec {
  StateFamily family = StateFamily::dp;
  int qudit_dim = 4;             // d in {2,3,4}
  double separable_fraction = 0.0;
  std::uint64_t rng_seed = 0;
};

// Sampling law shared by all families: modulus ~ U[0,1], phase ~ U[-pi,pi].
inline Complex sample_coefficient(Rng& rng) {
  const double mod = rng.uniform();
  const double ph = rng.uniform(-M_PI, M_PI);
  return std::polar(mod, ph);
}

// Random qubit weights. `force_separable` zeroes one randomly chosen weight,
// which in the DP family yields a product state.
inline WaveshaperWeights sample_qubit_weights(Rng& rng,
                                              bool force_separable = false) {
  for (;;) {
    Complex g[4];
    for (auto& x : g) x = sample_coefficient(rng);
    if (force_separable) g[rng.index(4)] = 0.0;
    const bool all_zero =
        std::abs(g[0]) < 1e-300 && std::abs(g[1]) < 1e-300 &&
        std::abs(g[2]) < 1e-300 && std::abs(g[3]) < 1e-300;
    if (!all_zero) return WaveshaperWeights::qubit(g[0], g[1], g[2], g[3]);
  }
}

// Random qudit coefficients with exactly `n_zero` randomly placed zeros.
inline std::vector<Complex> sample_qudit_alphas(Rng& rng, int d, int n_zero) {
  if (d < 2 || d > 4) throw std::invalid_argument("sample_qudit_alphas: d in {2,3,4}");
  if (n_zero < 0 || n_zero >= d)
    throw std::invalid_argument("sample_qudit_alphas: need 0 <= n_zero < d");
  for (;;) {
    std::vector<Complex> a(d);
    for (auto& x : a) x = sample_coefficient(rng);
    // Fisher-Yates over indices, zero the first n_zero.
    std::vector<int> idxs(d);
    for (int i = 0; i < d; ++i) idxs[i] = i;
    for (int i = d - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.index(i + 1));
      std::swap(idxs[i], idxs[j]);
    }
    for (int k = 0; k < n_zero; ++k) a[idxs[k]] = 0.0;
    double pow = 0.0;
    for (const auto& x : a) pow += std::norm(x);
    if (pow > 1e-300) return a;
  }
}

// S -> D_s S D_i^T with diagonal weights in the bin basis.
inline BiphotonAmplitude apply_waveshaper(const BiphotonAmplitude& state,
                                          const WaveshaperWeights& w,
                                          bool renormalize = true) {
  if (state.window != w.window)
    throw std::invalid_argument("apply_waveshaper: window mismatch");
  Eigen::MatrixXcd m =
      w.signal.asDiagonal() * state.amplitudes * w.idler.asDiagonal();
  if (m.norm() <= 0.0)
    throw std::invalid_argument("apply_waveshaper: fully blocked state");
  if (!renormalize) return {std::move(m), state.window, false};
  return detail::finish_state(std::move(m), state.window, "apply_waveshaper");
}

}  // namespace qelm
