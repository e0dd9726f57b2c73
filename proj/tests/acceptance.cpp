// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Each check pins its tolerance in code; measured values are
// printed alongside the verdict so a failing line is diagnosable on its own.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "qelm/harness.hpp"

using namespace qelm;

namespace {

int g_failures = 0;

void verdict(bool ok, const std::string& line) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", line.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

BiphotonAmplitude random_family_state(Rng& rng) {
  switch (rng.index(3)) {
    case 0: return sp_state(sample_qubit_weights(rng));
    case 1: return dp_state(sample_qubit_weights(rng));
    default:
      return qudit_state(sample_qudit_alphas(rng, 4, static_cast<int>(rng.index(3))));
  }
}

// --------------------------------------------------------------------------
// 1. Correspondence invariant
// --------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_match = 0.0;
  int wrong_deviating = 0, cases = 0;
  const double depths[5] = {0.5, 1.0, 1.4, 2.0, 2.6};
  for (int s = 0; s < 100; ++s) {
    const BiphotonAmplitude state = random_family_state(rng);
    const int setting = s % 5;
    const double theta = rng.uniform(-M_PI, M_PI);
    const ReservoirMap map = make_reservoir(depths[setting], theta);
    const BinWindow w =
        measurement_window(s % 2 ? MeasurementTask::qudit : MeasurementTask::qubit);
    const CorrelationPattern spont = spontaneous_pattern(state, map, w);
    const CorrelationPattern stim = stimulated_pattern(
        state, map, conjugated_seed_chain(map.idler_unitary),
        Eigen::VectorXd::Ones(8), w);
    const Eigen::MatrixXd a = spont.values / spont.values.norm();
    const Eigen::MatrixXd b = stim.values / stim.values.norm();
    worst_match = std::max(worst_match, (a - b).cwiseAbs().maxCoeff());

    const CorrelationPattern bad = stimulated_pattern(
        state, map, Eigen::MatrixXcd::Identity(8, 8), Eigen::VectorXd::Ones(8), w);
    const Eigen::MatrixXd c = bad.values / bad.values.norm();
    if ((a - c).cwiseAbs().maxCoeff() > 0.01) ++wrong_deviating;
    ++cases;
  }
  const double dt = elapsed_s(t0);
  verdict(worst_match < 1e-10 && wrong_deviating >= 95 && dt < 30.0,
          "1. correspondence: max |stim-spont| = " + fmt(worst_match, 3) +
              " (tol 1e-10); wrong-chain deviations " +
              std::to_string(wrong_deviating) + "/" + std::to_string(cases) +
              " (need >= 95); runtime " + fmt(dt, 3) + " s (< 30)");
}

// --------------------------------------------------------------------------
// 2. EOM algebra
// --------------------------------------------------------------------------
void criterion_2() {
  Rng rng(102);
  double worst_dagger = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double depth = rng.uniform(0.0, 4.0);
    const double theta = rng.uniform(-M_PI, M_PI);
    const EomUnitary u = eom_unitary({depth, theta, {-3, 4}, {}});
    const EomUnitary v = eom_unitary({depth, theta + M_PI, {-3, 4}, {}});
    worst_dagger =
        std::max(worst_dagger, (v.matrix - u.matrix.adjoint()).cwiseAbs().maxCoeff());
  }
  const EomUnitary id = eom_unitary({0.0, 1.2, {-3, 4}, {}});
  const double id_dev =
      (id.matrix - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff();

  const BinWindow wide{-32, 31};
  const EomUnitary u64 = eom_unitary({1.4, 0.4, wide, {}});
  double worst_norm = 0.0;
  for (int c = 16; c < 48; ++c)  // columns with full spread inside the window
    worst_norm = std::max(worst_norm,
                          std::abs(u64.matrix.col(c).squaredNorm() - 1.0));
  verdict(worst_dagger < 1e-12 && id_dev < 1e-12 && worst_norm < 1e-9,
          "2. eom algebra: dagger dev " + fmt(worst_dagger, 3) +
              " (tol 1e-12); identity dev " + fmt(id_dev, 3) +
              "; D=64 column-norm dev " + fmt(worst_norm, 3) + " (tol 1e-9)");
}

// --------------------------------------------------------------------------
// 3. Witness pipeline, noiseless
// --------------------------------------------------------------------------
void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = default_config(Task::witness);
  cfg.noiseless = true;
  const ResultsArtifact art = run_task(cfg);
  const double acc = art.confusion.entangled_accuracy();
  const double dt = elapsed_s(t0);
  verdict(art.scores.nmse <= 0.05 && acc >= 0.98 && dt < 120.0,
          "3. witness noiseless (290/96): NMSE = " + fmt(art.scores.nmse) +
              " (<= 0.05); entangled-class accuracy = " + fmt(acc) +
              " (>= 0.98); runtime " + fmt(dt, 3) + " s (< 120)");
}

// --------------------------------------------------------------------------
// 4. Witness pipeline, calibrated noise, 30 splits
// --------------------------------------------------------------------------
void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kSplits = 30;
  std::vector<double> accs(kSplits), mses(kSplits), fprs(kSplits);
  ExperimentConfig base = default_config(Task::witness);
  std::vector<ExperimentConfig> cfgs(kSplits, base);
  for (int s = 0; s < kSplits; ++s)
    cfgs[s].master_seed = Rng::derive(base.master_seed, 601, s);
  parallel_for(kSplits, 6, [&](std::size_t s) {
    const ResultsArtifact art = run_task(cfgs[s]);
    accs[s] = art.confusion.entangled_accuracy();
    mses[s] = art.scores.mse;
    fprs[s] = art.confusion.separable_false_positive_rate();
  });
  double acc_mean = 0, mse_mean = 0, fpr_mean = 0;
  for (int s = 0; s < kSplits; ++s) {
    acc_mean += accs[s] / kSplits;
    mse_mean += mses[s] / kSplits;
    fpr_mean += fprs[s] / kSplits;
  }
  const double dt = elapsed_s(t0);
  // paper: accuracy 93(4)% -> 2 sigma band [0.85, 1.01]; MSE 0.012(7) -> 2
  // sigma band [-0.002, 0.026]; FPR reported against 12(8)%.
  const bool ok = acc_mean >= 0.85 && acc_mean <= 1.01 && mse_mean <= 0.026 &&
                  dt < 600.0;
  verdict(ok, "4. witness noisy (30 splits): accuracy mean = " + fmt(acc_mean) +
                  " (2-sigma band [0.85, 1.01] of 93(4)%); MSE mean = " +
                  fmt(mse_mean) + " (<= 0.026 from 0.012(7)); separable FPR = " +
                  fmt(fpr_mean) + " (paper 12(8)%); runtime " + fmt(dt, 3) +
                  " s (< 600)");
}

// --------------------------------------------------------------------------
// 5. SATWAP
// --------------------------------------------------------------------------
double bell_operator_oracle(const Eigen::MatrixXcd& rho, int d) {
  const auto omega_pow = [&](double e) { return std::polar(1.0, 2.0 * M_PI * e / d); };
  const auto observable = [&](int setting, Party party) {
    const Eigen::MatrixXcd v = satwap_projectors(d, setting, party);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    for (int out = 0; out < d; ++out)
      a += omega_pow(out) * (v.col(out) * v.col(out).adjoint());
    return a;
  };
  const auto mat_pow = [&](const Eigen::MatrixXcd& m, int p) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(d, d);
    for (int i = 0; i < p; ++i) acc = acc * m;
    return acc;
  };
  const auto kron = [&](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd k(d * d, d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) k.block(i * d, j * d, d, d) = a(i, j) * b;
    return k;
  };
  const Eigen::MatrixXcd a1 = observable(1, Party::a), a2 = observable(2, Party::a);
  const Eigen::MatrixXcd b1 = observable(1, Party::b), b2 = observable(2, Party::b);
  Eigen::MatrixXcd bell = Eigen::MatrixXcd::Zero(d * d, d * d);
  for (int l = 1; l <= d - 1; ++l) {
    const std::complex<double> al = omega_pow((2.0 * l - d) / 8.0) / std::sqrt(2.0);
    bell += al * kron(mat_pow(a1, l), mat_pow(b1, d - l));
    bell += std::conj(al) * omega_pow(l) * kron(mat_pow(a1, l), mat_pow(b2, d - l));
    bell += al * kron(mat_pow(a2, l), mat_pow(b2, d - l));
    bell += std::conj(al) * kron(mat_pow(a2, l), mat_pow(b1, d - l));
  }
  return (bell * rho).trace().real();
}

void criterion_5() {
  // closed form evaluated independently with std::tan
  double bound_dev = 0.0;
  for (int d = 1; d <= 8; ++d) {
    const double want =
        0.5 * (3.0 / std::tan(M_PI / (4.0 * d)) - 1.0 / std::tan(3.0 * M_PI / (4.0 * d))) -
        2.0;
    bound_dev = std::max(bound_dev, std::abs(satwap_classical_bound(d) - want));
  }

  Rng rng(105);
  double route_dev = 0.0;
  bool ordering = true;
  for (int d = 2; d <= 4; ++d) {
    Eigen::VectorXcd mes = Eigen::VectorXcd::Zero(d * d);
    for (int j = 0; j < d; ++j) mes[j * d + j] = 1.0 / std::sqrt(d);
    const double val = satwap_value(mes, d);
    ordering = ordering && val > satwap_classical_bound(d) && val > 2.0 * (d - 2);
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXcd psi(d * d);
      for (int i = 0; i < d * d; ++i) psi[i] = {rng.normal(), rng.normal()};
      psi.normalize();
      const Eigen::MatrixXcd rho = psi * psi.adjoint();
      route_dev = std::max(route_dev,
                           std::abs(bell_operator_oracle(rho, d) - satwap_value(rho, d)));
    }
  }

  ExperimentConfig cfg = default_config(Task::satwap);
  cfg.noiseless = true;
  const ResultsArtifact art = run_task(cfg);

  verdict(bound_dev < 1e-12 && route_dev < 1e-10 && ordering &&
              art.scores.nmse <= 0.045,
          "5. satwap: C_d closed-form dev " + fmt(bound_dev, 3) +
              " (tol 1e-12); dual-route dev " + fmt(route_dev, 3) +
              " (tol 1e-10); MES orderings I_d > C_d, I_d > 2(d-2) " +
              (ordering ? "hold" : "VIOLATED") + "; noiseless NMSE (216/104) = " +
              fmt(art.scores.nmse) + " (<= 0.045 from 0.033(6))");
}

// --------------------------------------------------------------------------
// 6. Hamiltonian learning
// --------------------------------------------------------------------------
void criterion_6() {
  // parametrization invariant: ||c||^2 = 1 within 1e-12 on random draws
  Rng rng(106);
  double norm_dev = 0.0;
  for (int i = 0; i < 20000; ++i) {
    PureStateParams q;
    q.q = {rng.uniform(), rng.uniform(0, 2 * M_PI), rng.uniform(0, M_PI / 2),
           rng.uniform(0, 2 * M_PI), rng.uniform(0, M_PI / 2),
           rng.uniform(0, 2 * M_PI)};
    norm_dev = std::max(norm_dev, std::abs(params_to_c(q).squaredNorm() - 1.0));
  }

  ExperimentConfig noiseless = default_config(Task::hamiltonian);
  noiseless.noiseless = true;
  noiseless.jobs = 6;
  const auto t_mle = std::chrono::steady_clock::now();
  const ResultsArtifact clean = run_task(noiseless);
  const double wall = elapsed_s(t_mle);
  std::vector<double> sorted = clean.fidelities;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];

  // single-state MLE wall time, measured directly
  LabelVector y;
  y << 0.4, 0.2, 0.1, 0.05, 0.1, 0.15;
  PsoConfig pso = noiseless.pso;
  pso.seed = 7;
  const auto t_one = std::chrono::steady_clock::now();
  (void)mle_rank1_fit(y, pso);
  const double per_state = elapsed_s(t_one);

  ExperimentConfig noisy = default_config(Task::hamiltonian);
  noisy.jobs = 6;
  const ResultsArtifact rough = run_task(noisy);
  const double mean = rough.doc.at("fidelity_mean").get<double>();

  const bool ok = norm_dev < 1e-12 && median >= 0.99 && mean >= 0.88 &&
                  mean <= 1.04 && per_state < 2.0;
  verdict(ok,
          "6. hamiltonian: noiseless median fidelity = " + fmt(median) +
              " (>= 0.99); calibrated-noise mean fidelity = " + fmt(mean) +
              " (2-sigma band [0.88, 1.04] of 0.96(4)); ||c||^2 dev = " +
              fmt(norm_dev, 3) + " (tol 1e-12); per-state MLE = " +
              fmt(per_state, 3) + " s (< 2); noiseless run " + fmt(wall, 3) + " s");
}

// --------------------------------------------------------------------------
// 7. Regression correctness
// --------------------------------------------------------------------------
void criterion_7() {
  // alpha -> 0 matches the normal equations
  Rng rng(107);
  const int n = 120, f = 20;
  Eigen::MatrixXd x0(n, f);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) x0(i, j) = rng.normal();
  auto [x, st] = standardize(x0);
  Eigen::VectorXd w_true(f);
  for (int j = 0; j < f; ++j) w_true[j] = rng.normal();
  Eigen::VectorXd y = x * w_true;
  for (int i = 0; i < n; ++i) y[i] += 0.1 * rng.normal() + 0.4;
  EnetOptions tight;
  tight.max_sweeps = 500000;
  tight.tol = 1e-11;
  const SingleFit fit = elastic_net_fit(x, y, 0.0, 0.5, tight);
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::VectorXd w_ls = (xc.transpose() * xc).ldlt().solve(xc.transpose() * yc);
  const double ls_dev = (fit.weights - w_ls).cwiseAbs().maxCoeff();

  // KKT residuals over every shipped grid point, on a shipped-shape dataset
  ExperimentConfig wcfg = default_config(Task::witness);
  wcfg.noiseless = true;
  const GeneratedData data = generate_dataset(wcfg);
  auto [xs, sts] = standardize(data.train.feature_matrix());
  const Eigen::MatrixXd ys = data.train.label_matrix();
  double worst_kkt = 0.0;
  for (const auto& grid : {witness_grid(), satwap_grid(), hamiltonian_grid()}) {
    for (const double l1 : grid.l1_ratios) {
      Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(xs.cols(), ys.cols());
      std::vector<double> alphas = grid.alphas;
      std::sort(alphas.begin(), alphas.end(), std::greater<>());
      for (const double alpha : alphas) {
        const EnetFit fit_g = multitask_fit(xs, ys, alpha, l1, {}, &warm);
        warm = fit_g.weights;
        worst_kkt = std::max(worst_kkt, fit_g.kkt);
      }
    }
  }

  // variance threshold on the default noisy SATWAP training set: 64 -> 21 +- 3
  ExperimentConfig scfg = default_config(Task::satwap);
  const GeneratedData sdata = generate_dataset(scfg);
  const auto mask =
      variance_select(sdata.train.feature_matrix(), scfg.preprocess.variance_threshold);
  int kept = 0;
  for (const auto m : mask) kept += m;

  verdict(ls_dev < 1e-8 && worst_kkt <= 1e-8 && kept >= 18 && kept <= 24,
          "7. regression: alpha->0 vs normal equations dev = " + fmt(ls_dev, 3) +
              " (tol 1e-8); worst shipped-grid KKT = " + fmt(worst_kkt, 3) +
              " (tol 1e-8); satwap kept features = " + std::to_string(kept) +
              " (21 +- 3 of 64)");
}

// --------------------------------------------------------------------------
// 8. SNR calibration
// --------------------------------------------------------------------------
void criterion_8() {
  const SnrSummary s = snr_study(default_config(Task::snr));
  const bool ok = std::abs(s.coincidence_db - 16.0) <= 3.0 &&
                  std::abs(s.stimulated_db - 35.0) <= 4.0 &&
                  std::abs(s.improvement_db - 19.0) <= 5.0;
  verdict(ok, "8. snr: coincidence " + fmt(s.coincidence_db, 3) +
                  " dB (16 +- 3); stimulated " + fmt(s.stimulated_db, 3) +
                  " dB (35 +- 4); improvement " + fmt(s.improvement_db, 3) +
                  " dB (19 +- 5)");
}

// --------------------------------------------------------------------------
// 9. Determinism across runs and worker counts
// --------------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void criterion_9() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "qelm_acceptance_det";
  fs::remove_all(base);
  ExperimentConfig cfg = default_config(Task::witness);
  cfg.witness_train_separable = 10;
  cfg.witness_train_sp = 10;
  cfg.witness_train_dp = 20;
  cfg.witness_test_separable = 4;
  cfg.witness_test_sp = 4;
  cfg.witness_test_dp = 6;
  cfg.grid.folds = 5;

  bool files_equal = true, results_equal = true;
  std::string run1, run2;
  for (int run = 0; run < 2; ++run) {
    ExperimentConfig c = cfg;
    c.jobs = run == 0 ? 1 : 4;
    c.out_dir = (base / ("run" + std::to_string(run))).string();
    const ResultsArtifact art = run_task(c);
    nlohmann::json doc = art.doc;
    doc.erase("timing_ms");
    doc.erase("config");  // echoes the jobs count
    (run == 0 ? run1 : run2) = doc.dump();
  }
  results_equal = run1 == run2;
  files_equal =
      slurp(base / "run0" / "train.jsonl") == slurp(base / "run1" / "train.jsonl") &&
      slurp(base / "run0" / "test.jsonl") == slurp(base / "run1" / "test.jsonl");
  fs::remove_all(base);
  verdict(files_equal && results_equal,
          std::string("9. determinism: datasets byte-identical across jobs=1/4: ") +
              (files_equal ? "yes" : "NO") + "; results identical (excl. timing): " +
              (results_equal ? "yes" : "NO"));
}

}  // namespace

int main() {
  std::printf("acceptance suite (%s)\n", kVersion);
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
