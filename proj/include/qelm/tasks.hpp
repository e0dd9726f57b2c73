#pragma once

// The three inference targets and their ground-truth oracles: the two-qubit
// entanglement witness W = I/2 - |Phi+><Phi+|, the SATWAP correlator I_d with
// its classical (LHV) and Tsirelson bounds, and Hamiltonian learning: the
// six-element label vector, the six-parameter rank-1 density-matrix
// parametrization, and maximum-likelihood reconstruction by particle-swarm
// search over the parameter box.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qelm/lattice.hpp"
#include "qelm/rng.hpp"
#include "qelm/synthesis.hpp"

namespace qelm {

// ---------------------------------------------------------------------------
// Entanglement witness
// ---------------------------------------------------------------------------

inline const Eigen::MatrixXcd& witness_operator() {
  static const Eigen::MatrixXcd w = [] {
    Eigen::VectorXcd phi_plus = Eigen::VectorXcd::Zero(4);
    phi_plus[0] = phi_plus[3] = 1.0 / std::sqrt(2.0);
    return Eigen::MatrixXcd(0.5 * Eigen::MatrixXcd::Identity(4, 4) -
                            phi_plus * phi_plus.adjoint());
  }();
  return w;
}

inline double witness_value(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != 4 || rho.cols() != 4)
    throw std::invalid_argument("witness_value: need a two-qubit (4x4) rho");
  return (witness_operator() * rho).trace().real();
}

// Two-qubit coefficient vector (|00>,|01>,|10>,|11>) of a synthesized state.
inline Eigen::Vector4cd qubit_coefficients(const BiphotonAmplitude& state) {
  Eigen::Vector4cd c;
  c << state.at(0, 0), state.at(0, 1), state.at(1, 0), state.at(1, 1);
  const double n = c.norm();
  if (n <= 0.0)
    throw std::invalid_argument("qubit_coefficients: no qubit support");
  return c / n;
}

inline double witness_of_state(const BiphotonAmplitude& state) {
  const Eigen::Vector4cd c = qubit_coefficients(state);
  return witness_value(c * c.adjoint());
}

// Closed forms from the supplementary material. SP uses the (sqrt(1-|a|^2), a)
// parametrization: |psi> = sqrt(1-|a|^2)|00> + a|11>.
inline double witness_explicit_sp(Complex alpha) {
  const double a = std::abs(alpha);
  if (a > 1.0 + 1e-12)
    throw std::invalid_argument("witness_explicit_sp: |alpha| must be <= 1");
  return -a * std::sqrt(std::max(0.0, 1.0 - a * a)) * std::cos(std::arg(alpha));
}

// DP closed form on normalized coefficients (|00>,|01>,|10>,|11>).
inline double witness_explicit_dp(const Eigen::Vector4cd& amps) {
  if (std::abs(amps.squaredNorm() - 1.0) > 1e-9)
    throw std::invalid_argument("witness_explicit_dp: coefficients not normalized");
  return 0.5 * (std::norm(amps[1]) + std::norm(amps[2])) -
         std::abs(amps[0]) * std::abs(amps[3]) *
             std::cos(std::arg(amps[0]) - std::arg(amps[3]));
}

// ---------------------------------------------------------------------------
// SATWAP inequality (two settings, d outcomes)
// ---------------------------------------------------------------------------

enum class Party { a, b };

// Columns are the measurement eigenvectors |a>_setting / |b>_setting:
// Fourier-type vectors with offsets theta_1=1/4, theta_2=3/4 (party A) and
// xi_1=1/2, xi_2=1 (party B).
inline Eigen::MatrixXcd satwap_projectors(int d, int setting, Party party) {
  if (d < 1) throw std::invalid_argument("satwap_projectors: d >= 1");
  if (setting != 1 && setting != 2)
    throw std::invalid_argument("satwap_projectors: setting in {1,2}");
  const double off_a = setting == 1 ? 0.25 : 0.75;
  const double off_b = setting == 1 ? 0.5 : 1.0;
  Eigen::MatrixXcd v(d, d);
  for (int out = 0; out < d; ++out)
    for (int k = 0; k < d; ++k) {
      const double phase = party == Party::a
                               ? 2.0 * M_PI * k * (out - off_a) / d
                               : 2.0 * M_PI * k * (off_b - out) / d;
      v(k, out) = std::polar(1.0 / std::sqrt(static_cast<double>(d)), phase);
    }
  return v;
}

// C_d = 1/2 [3 cot(pi/4d) - cot(3pi/4d)] - 2.
inline double satwap_classical_bound(int d) {
  if (d < 1) throw std::invalid_argument("satwap_classical_bound: d >= 1");
  const auto cot = [](double x) { return std::cos(x) / std::sin(x); };
  return 0.5 * (3.0 * cot(M_PI / (4.0 * d)) - cot(3.0 * M_PI / (4.0 * d))) - 2.0;
}

// Q_d = 2(d-1).
inline double tsirelson_bound(int d) {
  if (d < 1) throw std::invalid_argument("tsirelson_bound: d >= 1");
  return 2.0 * (d - 1.0);
}

namespace detail {

// Joint outcome probabilities P(a,b) for setting pair (x,y) on rho
// (d^2 x d^2, signal-major ordering |k>_A |k'>_B).
inline Eigen::MatrixXd satwap_joint_probabilities(const Eigen::MatrixXcd& rho,
                                                  int d, int x, int y) {
  const Eigen::MatrixXcd va = satwap_projectors(d, x, Party::a);
  const Eigen::MatrixXcd vb = satwap_projectors(d, y, Party::b);
  Eigen::MatrixXd p(d, d);
  Eigen::VectorXcd joint(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) joint[k * d + l] = va(k, a) * vb(l, b);
      p(a, b) = std::real(joint.dot(rho * joint));  // <ab| rho |ab>
    }
  return p;
}

}  // namespace detail

// Correlator expansion of I_d: generalized correlators
// <A_x^l B_y^{d-l}> = sum_ab omega^(l a + (d-l) b) P(a,b | x,y)
// combined with coefficients a_l = omega^((2l-d)/8) / sqrt(2).
inline double satwap_value(const Eigen::MatrixXcd& rho, int d) {
  if (d < 1) throw std::invalid_argument("satwap_value: d >= 1");
  if (rho.rows() != d * d || rho.cols() != d * d)
    throw std::invalid_argument("satwap_value: rho must be d^2 x d^2");
  std::array<Eigen::MatrixXd, 4> p;  // (x,y) in order (1,1),(1,2),(2,1),(2,2)
  p[0] = detail::satwap_joint_probabilities(rho, d, 1, 1);
  p[1] = detail::satwap_joint_probabilities(rho, d, 1, 2);
  p[2] = detail::satwap_joint_probabilities(rho, d, 2, 1);
  p[3] = detail::satwap_joint_probabilities(rho, d, 2, 2);

  const auto omega_pow = [&](double e) {
    return std::polar(1.0, 2.0 * M_PI * e / d);
  };
  const auto corr = [&](const Eigen::MatrixXd& prob, int l) {
    Complex s = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        s += omega_pow(static_cast<double>(l) * a +
                       static_cast<double>(d - l) * b) *
             prob(a, b);
    return s;
  };

  Complex total = 0.0;
  for (int l = 1; l <= d - 1; ++l) {
    const Complex al = omega_pow((2.0 * l - d) / 8.0) / std::sqrt(2.0);
    total += al * corr(p[0], l) + std::conj(al) * omega_pow(l) * corr(p[1], l) +
             al * corr(p[3], l) + std::conj(al) * corr(p[2], l);
  }
  if (std::abs(total.imag()) > 1e-10)
    throw std::runtime_error("satwap_value: non-real correlator");
  return total.real();
}

inline double satwap_value(const Eigen::VectorXcd& psi, int d) {
  if (psi.size() != d * d)
    throw std::invalid_argument("satwap_value: psi must have length d^2");
  return satwap_value(Eigen::MatrixXcd(psi * psi.adjoint()), d);
}

// I_d of a diagonal qudit state restricted to its support (bins with nonzero
// coefficients, in order); d = support size. The empty correlator sum makes
// I_1 = 0 for single-bin states, consistent with C_1 = 0.
inline double satwap_of_alphas(std::span<const Complex> alphas) {
  std::vector<Complex> sub;
  for (const auto& a : alphas)
    if (std::abs(a) > 1e-12) sub.push_back(a);
  const int d = static_cast<int>(sub.size());
  if (d <= 1) return 0.0;
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d * d);
  double norm = 0.0;
  for (const auto& a : sub) norm += std::norm(a);
  norm = std::sqrt(norm);
  for (int j = 0; j < d; ++j) psi[j * d + j] = sub[static_cast<std::size_t>(j)] / norm;
  return satwap_value(psi, d);
}

// ---------------------------------------------------------------------------
// Hamiltonian learning
// ---------------------------------------------------------------------------

// |Psi> ~ sum_qp H_qp |qp>: c = vec(H)/|vec(H)| (row-major), rho = c c^dag,
// and the biphoton amplitude places H on the logical bins.
struct HamiltonianState {
  Eigen::VectorXcd c;
  Eigen::MatrixXcd rho;
  BiphotonAmplitude state;
};

inline HamiltonianState hamiltonian_to_state(
    const Eigen::MatrixXcd& h, BinWindow w = BinWindow::evolution_default()) {
  const Eigen::Index n = h.rows();
  if (n != h.cols() || n < 1)
    throw std::invalid_argument("hamiltonian_to_state: H must be square");
  if (h.norm() <= 0.0)
    throw std::invalid_argument("hamiltonian_to_state: zero Hamiltonian");
  HamiltonianState out;
  out.c.resize(n * n);
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index p = 0; p < n; ++p) out.c[q * n + p] = h(q, p);
  out.c /= out.c.norm();
  out.rho = out.c * out.c.adjoint();
  Eigen::MatrixXcd amp = Eigen::MatrixXcd::Zero(w.dimension(), w.dimension());
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index p = 0; p < n; ++p)
      amp(w.index_of(static_cast<int>(q)), w.index_of(static_cast<int>(p))) =
          out.c[q * n + p];
  out.state = make_state(std::move(amp), w);
  return out;
}

// The six regression targets: y = (rho00, rho11, rho22, Re rho12, Re rho02,
// Re rho03).
using LabelVector = Eigen::Matrix<double, 6, 1>;

inline LabelVector labels_from_rho(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != 4 || rho.cols() != 4)
    throw std::invalid_argument("labels_from_rho: need a 4x4 rho");
  LabelVector y;
  y << rho(0, 0).real(), rho(1, 1).real(), rho(2, 2).real(), rho(1, 2).real(),
      rho(0, 2).real(), rho(0, 3).real();
  return y;
}

// Six-parameter pure-state family: q0 in [0,1], q2,q4 in [0,pi/2], q1,q3,q5
// in [0,2pi). ||c|| = 1 by construction.
struct PureStateParams {
  std::array<double, 6> q{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  void validate() const {
    const double two_pi = 2.0 * M_PI;
    const bool ok = q[0] >= 0.0 && q[0] <= 1.0 && q[2] >= 0.0 &&
                    q[2] <= M_PI / 2.0 && q[4] >= 0.0 && q[4] <= M_PI / 2.0 &&
                    q[1] >= 0.0 && q[1] < two_pi + 1e-12 && q[3] >= 0.0 &&
                    q[3] < two_pi + 1e-12 && q[5] >= 0.0 && q[5] < two_pi + 1e-12;
    if (!ok) throw std::invalid_argument("PureStateParams: out of range");
  }
};

inline Eigen::Vector4cd params_to_c(const PureStateParams& p) {
  p.validate();
  const auto& q = p.q;
  const double r = std::sqrt(std::max(0.0, 1.0 - q[0] * q[0]));
  Eigen::Vector4cd c;
  c[0] = q[0];
  c[1] = r * std::polar(std::cos(q[2]), q[1]);
  c[2] = r * std::polar(std::sin(q[2]) * std::cos(q[4]), q[1] + q[3]);
  c[3] = r * std::polar(std::sin(q[2]) * std::sin(q[4]), q[4] + q[5]);
  return c;
}

inline Eigen::MatrixXcd params_to_rho(const PureStateParams& p) {
  const Eigen::Vector4cd c = params_to_c(p);
  const double norm_sq = c.squaredNorm();
  if (std::abs(norm_sq - 1.0) > 1e-12)
    throw std::runtime_error("params_to_rho: ||c||^2 != 1");
  return c * c.adjoint();
}

// ---------------------------------------------------------------------------
// Particle-swarm optimization over a box
// ---------------------------------------------------------------------------

struct PsoConfig {
  int particles = 64;
  int iterations = 2000;
  int restarts = 4;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  std::uint64_t seed = 0;
};

struct PsoResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  long evaluations = 0;
};

// Global-best PSO with velocity clamping to the box span; each restart is an
// independent swarm and the best restart wins (first wins ties).
inline PsoResult pso_minimize(const std::function<double(const Eigen::VectorXd&)>& cost,
                              const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper,
                              const PsoConfig& cfg = {}) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("pso_minimize: bad bounds");
  if ((upper - lower).minCoeff() <= 0.0)
    throw std::invalid_argument("pso_minimize: need lower < upper");
  const Eigen::Index dim = lower.size();
  const Eigen::VectorXd span = upper - lower;

  PsoResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng rng(Rng::derive(cfg.seed, 0x50534f /* "PSO" */, restart));
    Eigen::MatrixXd x(dim, cfg.particles), v(dim, cfg.particles);
    Eigen::MatrixXd pbest(dim, cfg.particles);
    Eigen::VectorXd pcost(cfg.particles);
    Eigen::VectorXd gbest(dim);
    double gcost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.particles; ++i) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        x(k, i) = rng.uniform(lower[k], upper[k]);
        v(k, i) = 0.1 * span[k] * rng.uniform(-1.0, 1.0);
      }
      pcost[i] = cost(x.col(i));
      ++best.evaluations;
      pbest.col(i) = x.col(i);
      if (pcost[i] < gcost) {
        gcost = pcost[i];
        gbest = x.col(i);
      }
    }
    for (int it = 0; it < cfg.iterations; ++it) {
      for (int i = 0; i < cfg.particles; ++i) {
        for (Eigen::Index k = 0; k < dim; ++k) {
          const double r1 = rng.uniform(), r2 = rng.uniform();
          double vel = cfg.inertia * v(k, i) +
                       cfg.cognitive * r1 * (pbest(k, i) - x(k, i)) +
                       cfg.social * r2 * (gbest[k] - x(k, i));
          vel = std::clamp(vel, -span[k], span[k]);
          const double moved = x(k, i) + vel;
          const double clamped = std::clamp(moved, lower[k], upper[k]);
          // kill outward velocity at the box walls so particles do not stick
          v(k, i) = clamped == moved ? vel : 0.0;
          x(k, i) = clamped;
        }
        const double f = cost(x.col(i));
        ++best.evaluations;
        if (f < pcost[i]) {
          pcost[i] = f;
          pbest.col(i) = x.col(i);
          if (f < gcost) {
            gcost = f;
            gbest = x.col(i);
          }
        }
      }
    }
    if (std::isnan(gcost))
      throw std::runtime_error("pso_minimize: NaN cost after budget");
    if (gcost < best.cost) {
      best.cost = gcost;
      best.x = gbest;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rank-1 maximum-likelihood reconstruction
// ---------------------------------------------------------------------------

struct MleResult {
  PureStateParams q;
  Eigen::MatrixXcd rho;
  double residual = 0.0;  // ||y - y(q*)||^2 at the optimum
};

// Physical rank-1 state minimizing the label mismatch ||y - y~(q)||^2 over
// the parameter box. Note: the six labels determine a pure state only up to
// discrete phase-sign branches (they carry three cosines over a spanning tree
// of coefficient pairs), so equally good minimizers can exist; the residual
// is reported and callers should treat branch identity with care.
inline MleResult mle_rank1_fit(const LabelVector& y, const PsoConfig& cfg = {}) {
  if (!y.allFinite()) throw std::invalid_argument("mle_rank1_fit: non-finite labels");
  Eigen::VectorXd lower(6), upper(6);
  const double two_pi = 2.0 * M_PI;
  lower << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  upper << 1.0, two_pi, M_PI / 2.0, two_pi, M_PI / 2.0, two_pi;
  const auto cost = [&y](const Eigen::VectorXd& qv) {
    PureStateParams p;
    for (int i = 0; i < 6; ++i) p.q[static_cast<std::size_t>(i)] = qv[i];
    const Eigen::Vector4cd c = params_to_c(p);
    LabelVector yt;
    yt << std::norm(c[0]), std::norm(c[1]), std::norm(c[2]),
        (c[1] * std::conj(c[2])).real(), (c[0] * std::conj(c[2])).real(),
        (c[0] * std::conj(c[3])).real();
    return (y - yt).squaredNorm();
  };
  const PsoResult r = pso_minimize(cost, lower, upper, cfg);
  MleResult out;
  for (int i = 0; i < 6; ++i) out.q.q[static_cast<std::size_t>(i)] = r.x[i];
  out.rho = params_to_rho(out.q);
  out.residual = r.cost;
  return out;
}

}  // namespace qelm
