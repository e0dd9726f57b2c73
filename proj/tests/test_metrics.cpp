#include <catch2/catch_amalgamated.hpp>

#include "qelm/metrics.hpp"
#include "qelm/rng.hpp"

using namespace qelm;

TEST_CASE("mse and nmse") {
  Eigen::VectorXd t(4);
  t << 1, 2, 3, 4;
  auto [mse0, nmse0] = mse_nmse(t, t);
  CHECK(mse0 == 0.0);
  CHECK(nmse0 == 0.0);

  const Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(4, t.mean());
  auto [mse1, nmse1] = mse_nmse(mean_pred, t);
  CHECK_THAT(nmse1, Catch::Matchers::WithinAbs(1.0, 1e-12));

  const double eps = 0.25;
  auto [mse2, nmse2] = mse_nmse(t.array() + eps, t);
  CHECK_THAT(mse2, Catch::Matchers::WithinAbs(eps * eps, 1e-12));

  CHECK_THROWS_AS(mse_nmse(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("r2 + nmse = 1 on random data") {
  Rng rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd truth(50), pred(50);
    for (int i = 0; i < 50; ++i) {
      truth[i] = rng.normal();
      pred[i] = truth[i] + 0.3 * rng.normal();
    }
    const ScoreReport rep = score(pred, truth);
    REQUIRE_THAT(rep.r2 + rep.nmse, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("nmse invariant under common positive rescaling") {
  Rng rng(21);
  Eigen::VectorXd truth(40), pred(40);
  for (int i = 0; i < 40; ++i) {
    truth[i] = rng.normal();
    pred[i] = truth[i] + 0.2 * rng.normal();
  }
  const double c = 3.7;
  auto [m1, n1] = mse_nmse(pred, truth);
  auto [m2, n2] = mse_nmse(c * pred, c * truth);
  CHECK_THAT(n2, Catch::Matchers::WithinAbs(n1, 1e-12));
}

TEST_CASE("pattern fidelity") {
  CorrelationPattern a{Eigen::MatrixXd::Zero(2, 2), {0, 1}};
  a.values << 1, 2, 3, 4;
  CHECK_THAT(pattern_fidelity(a, a), Catch::Matchers::WithinAbs(1.0, 1e-12));

  CorrelationPattern b{Eigen::MatrixXd::Zero(2, 2), {0, 1}};
  b.values(0, 0) = 1.0;
  CorrelationPattern c{Eigen::MatrixXd::Zero(2, 2), {0, 1}};
  c.values(1, 1) = 1.0;
  CHECK(pattern_fidelity(b, c) == 0.0);

  // symmetric, bounded, and proportional patterns reach exactly 1
  CorrelationPattern d{2.5 * a.values, {0, 1}};
  CHECK_THAT(pattern_fidelity(a, d), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(pattern_fidelity(d, a), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // Bhattacharyya variant agrees on the extremes
  CHECK_THAT(pattern_fidelity(a, d, PatternFidelityKind::bhattacharyya),
             Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(pattern_fidelity(b, c, PatternFidelityKind::bhattacharyya) == 0.0);

  CHECK_THROWS_AS(
      pattern_fidelity(CorrelationPattern{Eigen::MatrixXd::Zero(2, 2), {0, 1}}, a),
      std::invalid_argument);
}

TEST_CASE("uhlmann fidelity") {
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(4);
  phi[0] = phi[3] = 1.0 / std::sqrt(2.0);
  const Eigen::MatrixXcd rho_phi = phi * phi.adjoint();
  CHECK_THAT(uhlmann_fidelity(rho_phi, rho_phi),
             Catch::Matchers::WithinAbs(1.0, 1e-12));

  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(4);
  e0[0] = 1.0;
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(4);
  e1[1] = 1.0;
  CHECK_THAT(uhlmann_fidelity(e0 * e0.adjoint(), e1 * e1.adjoint()),
             Catch::Matchers::WithinAbs(0.0, 1e-12));

  const Eigen::MatrixXcd mixed = Eigen::MatrixXcd::Identity(4, 4) / 4.0;
  CHECK_THAT(uhlmann_fidelity(rho_phi, mixed),
             Catch::Matchers::WithinAbs(0.25, 1e-10));
  CHECK_THAT(uhlmann_fidelity(mixed, rho_phi),
             Catch::Matchers::WithinAbs(0.25, 1e-10));

  // pure sigma reduces to <psi|rho|psi>
  Rng rng(22);
  Eigen::VectorXcd psi(4);
  for (int i = 0; i < 4; ++i) psi[i] = {rng.normal(), rng.normal()};
  psi.normalize();
  const Eigen::MatrixXcd rho_mix =
      0.7 * rho_phi + 0.3 * Eigen::MatrixXcd::Identity(4, 4) / 4.0;
  const double direct = (psi.adjoint() * rho_mix * psi)(0, 0).real();
  CHECK_THAT(uhlmann_fidelity(rho_mix, psi * psi.adjoint()),
             Catch::Matchers::WithinAbs(direct, 1e-10));

  Eigen::MatrixXcd not_psd = Eigen::MatrixXcd::Identity(2, 2);
  not_psd(0, 0) = -0.5;
  CHECK_THROWS_AS(uhlmann_fidelity(not_psd, Eigen::MatrixXcd::Identity(2, 2) / 2),
                  std::invalid_argument);
}

TEST_CASE("witness confusion") {
  Eigen::VectorXd truth(6), pred(6);
  truth << -0.4, -0.2, -0.01, 0.1, 0.2, 0.0;
  pred = truth;
  const ConfusionMatrix perfect = witness_confusion(pred, truth);
  CHECK(perfect.entangled_accuracy() == 1.0);
  CHECK(perfect.separable_false_positive_rate() == 0.0);
  CHECK(perfect.total() == 6);

  const ConfusionMatrix flipped = witness_confusion(-truth, truth);
  CHECK(flipped.entangled_accuracy() == 0.0);

  Eigen::VectorXd off(6);
  off << -0.4, 0.05, -0.01, 0.1, -0.05, 0.0;
  const ConfusionMatrix cm = witness_confusion(off, truth);
  CHECK(cm.tp == 2);
  CHECK(cm.fn == 1);
  CHECK(cm.fp == 1);
  CHECK(cm.tn == 2);
}
