// Command-line front end: dataset generation, readout training, inference on
// test sets, figure reproduction, SNR accounting, and a quick selftest.
//
//   qelm gen   --task witness --out data/
//   qelm train --task witness --data data/ --out run/
//   qelm infer --task witness --data data/ --model run/model.json --out run/
//   qelm reproduce --figure fig5e --out figs/
//   qelm snr
//   qelm selftest

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qelm/harness.hpp"

namespace {

using namespace qelm;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool have_seed = false;
  bool noiseless = false;
  int jobs = 1;
  std::string task = "witness";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "master seed")->each([&f](const std::string&) {
    f.have_seed = true;
  });
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_flag("--noiseless", f.noiseless, "disable measurement noise");
  cmd->add_option("--jobs", f.jobs, "worker threads");
  cmd->add_option("--task", f.task, "witness | satwap | hamiltonian");
}

ExperimentConfig make_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_config(f.config_path);
    if (f.task != "witness") cfg.task = task_from_string(f.task);
  } else {
    cfg = default_config(task_from_string(f.task));
  }
  if (f.have_seed) cfg.master_seed = f.seed;
  if (f.noiseless) cfg.noiseless = true;
  if (f.jobs > 1) cfg.jobs = f.jobs;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  return cfg;
}

int cmd_gen(const CommonFlags& f) {
  ExperimentConfig cfg = make_config(f);
  if (cfg.out_dir.empty()) cfg.out_dir = "data";
  const GeneratedData data = generate_dataset(cfg);
  std::ofstream cfg_out(std::filesystem::path(cfg.out_dir) / "config.txt");
  cfg_out << serialize_config(cfg);
  std::cout << "wrote " << data.train.records.size() << " train / "
            << data.test.records.size() << " test records to " << cfg.out_dir
            << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& data_dir) {
  ExperimentConfig cfg = make_config(f);
  const Dataset train = io::read_jsonl(std::filesystem::path(data_dir) / "train.jsonl");
  const TrainedReadout model = train_readout(train, cfg);
  const std::filesystem::path out = cfg.out_dir.empty() ? "." : cfg.out_dir;
  std::filesystem::create_directories(out);
  std::ofstream mo(out / "model.json", std::ios::binary);
  mo << detail::model_to_json(model).dump(2) << "\n";
  std::cout << "trained on " << train.records.size()
            << " records; alpha=" << model.chosen_alpha
            << " l1_ratio=" << model.chosen_l1_ratio
            << " cv_r2=" << model.cv_score << "\nmodel -> "
            << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_infer(const CommonFlags& f, const std::string& data_dir,
              const std::string& model_path) {
  ExperimentConfig cfg = make_config(f);
  const Dataset test = io::read_jsonl(std::filesystem::path(data_dir) / "test.jsonl");
  std::ifstream mi(model_path);
  if (!mi) throw std::runtime_error("cannot read model " + model_path);
  nlohmann::json mj;
  mi >> mj;
  const TrainedReadout model = detail::model_from_json(mj);

  const Eigen::MatrixXd x = test.feature_matrix();
  const Eigen::MatrixXd y = test.label_matrix();
  const Eigen::MatrixXd pred = predict(model, x);
  const ScoreReport rep = score(pred, y);
  std::cout << "n=" << x.rows() << " mse=" << rep.mse << " nmse=" << rep.nmse
            << " r2=" << rep.r2 << "\n";
  if (cfg.task == Task::witness) {
    const ConfusionMatrix cm = witness_confusion(pred.col(0), y.col(0));
    std::cout << "entangled accuracy=" << cm.entangled_accuracy()
              << " separable fpr=" << cm.separable_false_positive_rate() << "\n";
  }
  if (cfg.task == Task::hamiltonian) {
    double fid_acc = 0.0;
    std::vector<double> fids(test.records.size());
    parallel_for(test.records.size(), cfg.jobs, [&](std::size_t i) {
      LabelVector yv;
      for (int k = 0; k < 6; ++k) yv[k] = pred(static_cast<Eigen::Index>(i), k);
      PsoConfig pso = cfg.pso;
      pso.seed = Rng::derive(cfg.master_seed, 401, i);
      const MleResult mle = mle_rank1_fit(yv, pso);
      fids[i] = uhlmann_fidelity(mle.rho, detail::true_rho(test.records[i]));
    });
    for (const double v : fids) fid_acc += v;
    std::cout << "mle mean fidelity=" << fid_acc / fids.size() << "\n";
  }

  const std::filesystem::path out = cfg.out_dir.empty() ? "." : cfg.out_dir;
  std::filesystem::create_directories(out);
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    std::vector<std::string> row{
        std::to_string(test.records[static_cast<std::size_t>(i)].id),
        test.records[static_cast<std::size_t>(i)].family};
    for (Eigen::Index c = 0; c < y.cols(); ++c) row.push_back(io::fmt(y(i, c)));
    for (Eigen::Index c = 0; c < pred.cols(); ++c) row.push_back(io::fmt(pred(i, c)));
    rows.push_back(row);
  }
  std::vector<std::string> header{"id", "family"};
  for (Eigen::Index c = 0; c < y.cols(); ++c)
    header.push_back("true_" + std::to_string(c));
  for (Eigen::Index c = 0; c < pred.cols(); ++c)
    header.push_back("pred_" + std::to_string(c));
  io::write_csv(out / "predictions.csv", header, rows);
  std::cout << "predictions -> " << (out / "predictions.csv").string() << "\n";
  return 0;
}

int cmd_reproduce(const CommonFlags& f, const std::string& figure) {
  ExperimentConfig cfg = make_config(f);
  if (cfg.out_dir.empty()) cfg.out_dir = "figures";
  const auto path = reproduce(figure_from_string(figure), cfg);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_snr(const CommonFlags& f) {
  ExperimentConfig cfg = make_config(f);
  const SnrSummary s = snr_study(cfg);
  std::cout << "bright-bin average SNR, stimulated:  " << s.stimulated_db
            << " dB\nbright-bin average SNR, coincidence: " << s.coincidence_db
            << " dB\nimprovement:                          " << s.improvement_db
            << " dB\n";
  return 0;
}

int cmd_selftest(const CommonFlags& f) {
  int failures = 0;
  const auto report = [&failures](const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    Rng rng(1);
    bool ok = true;
    for (int i = 0; i < 20 && ok; ++i) {
      const double d = rng.uniform(0.0, 3.0), th = rng.uniform(-M_PI, M_PI);
      const auto u = eom_unitary({d, th, {-3, 4}, {}});
      const auto v = eom_unitary({d, th + M_PI, {-3, 4}, {}});
      ok = (v.matrix - u.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-12;
    }
    report("eom dagger-by-pi-shift", ok);
  }

  {
    Rng rng(2);
    bool ok = true;
    for (int i = 0; i < 25 && ok; ++i) {
      const auto state = dp_state(sample_qubit_weights(rng));
      const ReservoirMap map =
          make_reservoir(rng.uniform(0.3, 2.5), rng.uniform(-M_PI, M_PI));
      const BinWindow w = measurement_window(MeasurementTask::qubit);
      const auto spont = spontaneous_pattern(state, map, w);
      const auto stim = stimulated_pattern(
          state, map, conjugated_seed_chain(map.idler_unitary),
          Eigen::VectorXd::Ones(8), w);
      const Eigen::MatrixXd a = spont.values / spont.values.norm();
      const Eigen::MatrixXd b = stim.values / stim.values.norm();
      ok = (a - b).cwiseAbs().maxCoeff() < 1e-10;
    }
    report("stimulated/spontaneous correspondence", ok);
  }

  {
    ExperimentConfig cfg = default_config(Task::witness);
    cfg.witness_train_separable = 8;
    cfg.witness_train_sp = 8;
    cfg.witness_train_dp = 14;
    cfg.witness_test_separable = 3;
    cfg.witness_test_sp = 3;
    cfg.witness_test_dp = 4;
    cfg.grid.folds = 5;
    cfg.noiseless = true;
    cfg.master_seed = f.have_seed ? f.seed : 991;
    bool ok = false;
    try {
      const ResultsArtifact art = run_task(cfg);
      ok = art.scores.nmse < 0.5;
    } catch (const std::exception& e) {
      std::cerr << "  error: " << e.what() << "\n";
    }
    report("noiseless witness smoke run", ok);
  }

  {
    const SnrSummary s = snr_study(make_config(f), 10);
    report("snr calibration bands",
           s.stimulated_db > 31 && s.stimulated_db < 39 &&
               s.coincidence_db > 13 && s.coincidence_db < 19);
  }

  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frequency-bin QELM simulator: classical training, quantum inference"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string data_dir = "data";
  std::string model_path = "model.json";
  std::string figure = "fig4";

  CLI::App* gen = app.add_subcommand("gen", "generate train/test datasets");
  add_common(gen, common);

  CLI::App* train = app.add_subcommand("train", "fit the readout on a dataset");
  add_common(train, common);
  train->add_option("--data", data_dir, "dataset directory (train.jsonl)");

  CLI::App* infer = app.add_subcommand("infer", "apply a trained readout to a test set");
  add_common(infer, common);
  infer->add_option("--data", data_dir, "dataset directory (test.jsonl)");
  infer->add_option("--model", model_path, "model.json from `train`");

  CLI::App* rep = app.add_subcommand("reproduce", "emit figure data as CSV");
  add_common(rep, common);
  rep->add_option("--figure", figure, "fig4 | fig5e | fig6d | snr");

  CLI::App* snr = app.add_subcommand("snr", "bright-bin SNR accounting");
  add_common(snr, common);

  CLI::App* self = app.add_subcommand("selftest", "quick built-in checks");
  add_common(self, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(common);
    if (train->parsed()) return cmd_train(common, data_dir);
    if (infer->parsed()) return cmd_infer(common, data_dir, model_path);
    if (rep->parsed()) return cmd_reproduce(common, figure);
    if (snr->parsed()) return cmd_snr(common);
    if (self->parsed()) return cmd_selftest(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
