// Command-line front end: dataset generation, training runs, outer-surface
// sweeps and the theory verification suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "fairbatch/bilevel.hpp"
#include "fairbatch/dataset.hpp"
#include "fairbatch/metrics.hpp"
#include "fairbatch/trainer.hpp"

namespace {

using namespace fairbatch;

int cmd_generate(std::size_t n, std::uint64_t seed, const std::string& out) {
  const Dataset d = gen_synthetic(n, seed);
  write_csv(d, out);
  std::cout << "wrote " << d.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out,
              const std::string& checkpoint) {
  const TrainResult result = run_train(cfg);
  write_metrics_ndjson(result.records, out);
  std::string ckpt = checkpoint;
  if (ckpt.empty()) {
    const std::size_t dot = out.rfind('.');
    ckpt = (dot == std::string::npos ? out : out.substr(0, dot)) +
           ".checkpoint.json";
  }
  save_checkpoint(result.model, ckpt);

  const EpochRecord& last = result.records.back();
  std::cout << "epochs " << last.epoch << "  train_acc " << last.train_accuracy
            << "  test_acc " << last.test_accuracy << "  eo " << last.eo
            << "  ed " << last.ed << "  dp " << last.dp << "\n"
            << "metrics: " << out << "\ncheckpoint: " << ckpt << "\n";
  return 0;
}

int cmd_sweep(const std::string& fixture, std::size_t grid,
              const std::string& out) {
  InnerProblem1D problem;
  bool found = false;
  for (InnerProblem1D& p : fixture_library()) {
    if (p.name == fixture) {
      problem = std::move(p);
      found = true;
      break;
    }
  }
  if (!found) {
    std::cerr << "unknown fixture '" << fixture << "'; available:\n";
    for (const InnerProblem1D& p : fixture_library())
      std::cerr << "  " << p.name << "\n";
    return 2;
  }
  const OuterSurface s = sweep_surface(problem, grid);
  std::ofstream os(out);
  if (!os) {
    std::cerr << "cannot open '" << out << "' for writing\n";
    return 1;
  }
  os.precision(17);
  os << "lambda,F\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    os << s.lambda[i] << ',' << s.f_outer[i] << '\n';
  std::cout << "wrote " << s.size() << " grid points to " << out << "\n";
  return 0;
}

int cmd_verify(std::size_t grid, std::uint64_t seed, bool negative_control,
               const std::string& out) {
  VerifyOptions opt;
  opt.grid_size = grid;
  opt.seed = seed;
  opt.negative_control = negative_control;
  const TheoryReport report = run_verify(opt);
  for (const CheckResult& c : report.checks)
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail
              << "\n";
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) {
      std::cerr << "cannot open '" << out << "' for writing\n";
      return 1;
    }
    os << report_to_json(report) << "\n";
  }
  std::cout << (report.all_pass() ? "all checks passed\n" : "CHECKS FAILED\n");
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware training toolkit: adaptive minibatch sampling "
               "with group-fairness metrics and a theory verification lab"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic CSV dataset");
  std::size_t gen_n = 3000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of rows")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a classifier with a chosen sampler");
  RunConfig cfg;
  std::string train_out = "metrics.ndjson";
  std::string train_checkpoint;
  bool exact_batches = false;
  const std::map<std::string, Fairness> criterion_names{
      {"eqopp", Fairness::eqopp}, {"eqodds", Fairness::eqodds}, {"dp", Fairness::dp}};
  const std::map<std::string, SamplerKind> sampler_names{
      {"fairbatch", SamplerKind::fairbatch},
      {"uniform", SamplerKind::uniform},
      {"cutting", SamplerKind::cutting}};
  train->add_option("--data", cfg.data_path, "CSV dataset path (omit for synthetic)");
  train->add_option("--synthetic-n", cfg.synthetic_n, "Synthetic dataset size");
  train->add_option("--label-col", cfg.label_column, "Label column name");
  train->add_option("--sensitive-col", cfg.sensitive_column, "Sensitive column name");
  train->add_option("--criterion", cfg.criterion.kind, "Fairness criterion")
      ->transform(CLI::CheckedTransformer(criterion_names, CLI::ignore_case));
  train->add_option("--sampler", cfg.sampler, "Batch sampler")
      ->transform(CLI::CheckedTransformer(sampler_names, CLI::ignore_case));
  train->add_option("--alpha", cfg.alpha, "Lambda step size");
  train->add_option("--threshold", cfg.criterion.threshold,
                    "Loss-gap threshold below which lambda is not updated");
  train->add_option("--batch-size", cfg.batch_size, "Minibatch size");
  train->add_option("--epochs", cfg.epochs, "Training epochs");
  train->add_option("--seed", cfg.seed, "Run seed");
  train->add_option("--lr", cfg.lr, "Adam learning rate");
  train->add_option("--split", cfg.split_fraction, "Train fraction of the split");
  train->add_option("--lambda-every", cfg.lambda_every,
                    "Update lambda every k batches (0 = once per epoch)");
  train->add_flag("--exact-batches", exact_batches,
                  "Fix per-set batch counts by largest-remainder rounding");
  train->add_flag("--loss-weighted", cfg.loss_weighted,
                  "Reweight examples within each set by loss rank");
  train->add_option("--temperature", cfg.temperature,
                    "Exponent of the loss-rank weighting");
  train->add_option("--out", train_out, "Metrics NDJSON path");
  train->add_option("--checkpoint", train_checkpoint,
                    "Checkpoint JSON path (default: derived from --out)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Tabulate the outer objective F(lambda)");
  std::string sweep_fixture = "cosh-vs-quadratic";
  std::size_t sweep_grid = 2001;
  std::string sweep_out = "sweep.csv";
  sweep->add_option("--fixture", sweep_fixture, "Fixture name");
  sweep->add_option("--grid", sweep_grid, "Grid points")->check(CLI::Range(3, 1000000));
  sweep->add_option("--out", sweep_out, "Output CSV path");

  // verify
  auto* verify = app.add_subcommand("verify", "Run the theory verification suite");
  std::size_t verify_grid = 2001;
  std::uint64_t verify_seed = 1;
  bool negative_control = false;
  std::string verify_out;
  verify->add_option("--grid", verify_grid, "Grid points")
      ->check(CLI::Range(3, 1000000));
  verify->add_option("--seed", verify_seed, "Seed for sampled checks");
  verify->add_flag("--negative-control", negative_control,
                   "Inject a W-shaped surface that must be flagged");
  verify->add_option("--out", verify_out, "JSON report path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_n, gen_seed, gen_out);
    if (train->parsed()) {
      if (exact_batches) cfg.composition = BatchComposition::exact_counts;
      return cmd_train(cfg, train_out, train_checkpoint);
    }
    if (sweep->parsed()) return cmd_sweep(sweep_fixture, sweep_grid, sweep_out);
    if (verify->parsed())
      return cmd_verify(verify_grid, verify_seed, negative_control, verify_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
