// Experiment runner for the linearly adaptive cross entropy study: seeded
// training runs, paired-loss comparisons, gradient checking, and loss
// inspection. All data comes from local files or the synthetic generator;
// nothing is downloaded.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lace/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string loss;
  std::string out_dir;
  int epochs = -1;
  long long batch_size = -1;
  int trials = -1;
  int threads = -1;
  std::vector<std::size_t> dims;
  std::string cifar_train;
  std::string cifar_test;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file (flags override it)");
  cmd->add_option("--seed", flags.seed, "base seed for the run");
  cmd->add_option("--loss", flags.loss, "loss function: cross_entropy or adaptive")
      ->check(CLI::IsMember({"cross_entropy", "adaptive"}));
  cmd->add_option("--out", flags.out_dir, "output directory for CSV/summary files");
  cmd->add_option("--epochs", flags.epochs, "number of training epochs");
  cmd->add_option("--batch-size", flags.batch_size, "mini-batch size");
  cmd->add_option("--trials", flags.trials, "number of seeded trials");
  cmd->add_option("--threads", flags.threads, "trial workers to run in parallel");
  cmd->add_option("--dims", flags.dims, "model layer dims, e.g. --dims 32 64 10")
      ->delimiter(',');
  cmd->add_option("--cifar-train", flags.cifar_train,
                  "CIFAR-100 train.bin path (switches dataset to cifar100)");
  cmd->add_option("--cifar-test", flags.cifar_test, "CIFAR-100 test.bin path");
}

lace::ExperimentConfig build_config(const CLI::App* cmd, const CommonFlags& flags) {
  lace::ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = lace::load_config_file(flags.config_path);
  if (cmd->count("--seed")) cfg.base_seed = flags.seed;
  if (cmd->count("--loss")) cfg.loss = lace::loss_kind_from_name(flags.loss);
  if (cmd->count("--out")) cfg.out_dir = flags.out_dir;
  if (cmd->count("--epochs")) cfg.epochs = flags.epochs;
  if (cmd->count("--batch-size")) cfg.batch_size = static_cast<std::size_t>(flags.batch_size);
  if (cmd->count("--trials")) cfg.trials = flags.trials;
  if (cmd->count("--threads")) cfg.threads = flags.threads;
  if (cmd->count("--dims")) cfg.model_dims = flags.dims;
  if (cmd->count("--cifar-train") || cmd->count("--cifar-test")) {
    cfg.dataset.type = lace::DatasetSpec::Type::kCifar100;
    if (cmd->count("--cifar-train")) cfg.dataset.cifar.train_path = flags.cifar_train;
    if (cmd->count("--cifar-test")) cfg.dataset.cifar.test_path = flags.cifar_test;
  }
  lace::validate(cfg);
  return cfg;
}

int cmd_train(const CLI::App* cmd, const CommonFlags& flags) {
  const lace::ExperimentConfig cfg = build_config(cmd, flags);
  const lace::TrainCommandResult result = lace::run_train_command(cfg);
  std::cout << "loss: " << result.run.report.loss_name << '\n';
  std::cout << "epochs: " << result.run.report.records.size() << '\n';
  std::cout << "epoch-0 batch order checksum: 0x" << std::hex
            << result.run.epoch0_batch_checksum << std::dec << '\n';
  if (!result.run.report.records.empty()) {
    const lace::EpochRecord& last = result.run.report.records.back();
    std::cout << "final: train_loss " << lace::fmt_g17(last.train_loss)
              << ", test_top1_acc " << lace::fmt_g17(last.test_top1_acc)
              << ", test_top5_err " << lace::fmt_g17(last.test_top5_err) << '\n';
  }
  std::cout << "csv: " << result.csv_path << '\n';
  return 0;
}

int cmd_compare(const CLI::App* cmd, const CommonFlags& flags) {
  const lace::ExperimentConfig cfg = build_config(cmd, flags);
  const lace::CompareResult result = lace::run_compare(cfg);
  std::cout << lace::format_compare_table(result);
  std::cout << "summary: " << result.summary_path << '\n';
  return 0;
}

int cmd_inspect(const CLI::App* cmd, const CommonFlags& flags) {
  const lace::ExperimentConfig cfg = build_config(cmd, flags);
  const lace::LoadedData data = lace::load_dataset(cfg);
  auto describe = [](const char* name, const lace::Dataset& ds) {
    double lo = ds.features.data()[0];
    double hi = lo;
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
      lo = std::min(lo, ds.features.data()[i]);
      hi = std::max(hi, ds.features.data()[i]);
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.num_classes), 0);
    for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
    std::size_t min_count = counts[0];
    std::size_t max_count = counts[0];
    for (std::size_t c : counts) {
      min_count = std::min(min_count, c);
      max_count = std::max(max_count, c);
    }
    std::cout << name << ": n=" << ds.size() << ", feature_dim=" << ds.feature_dim()
              << ", classes=" << ds.num_classes << ", kind="
              << (ds.kind == lace::DataKind::kImage32x32x3 ? "image32x32x3" : "flat")
              << '\n';
    std::cout << "  feature range [" << lace::fmt_g17(lo) << ", " << lace::fmt_g17(hi)
              << "], per-class count min " << min_count << " max " << max_count
              << '\n';
  };
  describe("train", data.train);
  describe("test", data.test);
  double mean_norm = 0.0;
  for (double v : data.mean.values) mean_norm += v * v;
  std::cout << "train per-feature mean, L2 norm: " << lace::fmt_g17(std::sqrt(mean_norm))
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linearly adaptive cross entropy: losses, training, experiments"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run one seeded training trial");
  add_common_flags(train, train_flags);

  CommonFlags compare_flags;
  CLI::App* compare = app.add_subcommand(
      "compare", "run paired trials of both losses and aggregate them");
  add_common_flags(compare, compare_flags);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "check analytic loss gradients against finite differences");
  lace::GradCheckOptions gc;
  gradcheck->add_option("--classes", gc.class_counts, "class counts to test")
      ->delimiter(',');
  gradcheck->add_option("--samples", gc.samples, "random samples per class count");
  gradcheck->add_option("--seed", gc.seed, "seed for the sampled logits");
  gradcheck->add_option("--fd-step", gc.fd_step, "central-difference step");
  gradcheck->add_flag("--self-test-corrupt", gc.corrupt_hook,
                      "testing hook: corrupt the analytic gradient to force failure");

  CLI::App* eval = app.add_subcommand("eval-loss",
                                      "print both losses for one logits vector");
  std::vector<double> eval_logits;
  int eval_class = 0;
  eval->add_option("--logits", eval_logits, "logits, e.g. --logits 0,0")
      ->delimiter(',')
      ->required();
  eval->add_option("--class", eval_class, "true class index")->required();

  CommonFlags inspect_flags;
  CLI::App* inspect = app.add_subcommand("inspect-data",
                                         "load a dataset and print a summary");
  add_common_flags(inspect, inspect_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train, train_flags);
    if (compare->parsed()) return cmd_compare(compare, compare_flags);
    if (gradcheck->parsed()) {
      const lace::GradCheckReport report = lace::run_gradcheck(gc);
      std::cout << lace::format_gradcheck(report);
      return report.passed ? 0 : 1;
    }
    if (eval->parsed()) {
      std::cout << lace::format_eval_loss(lace::eval_loss(eval_logits, eval_class));
      return 0;
    }
    if (inspect->parsed()) return cmd_inspect(inspect, inspect_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
