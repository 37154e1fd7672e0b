#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "diana/checkpoint.hpp"
#include "diana/config.hpp"
#include "diana/harness.hpp"
#include "diana/json_io.hpp"

namespace fs = std::filesystem;
using namespace diana;

namespace {

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

void write_csv_header(std::ostream& out) {
  out << "strategy,seed,round,accuracy,selected_error_rate\n";
}

void write_csv_rows(std::ostream& out, const RunResult& r, std::uint64_t seed) {
  out << to_string(r.strategy) << ',' << seed << ",0," << r.initial_accuracy << ",\n";
  for (const auto& rep : r.rounds)
    out << to_string(r.strategy) << ',' << seed << ',' << rep.round << ',' << rep.accuracy << ','
        << rep.selected_error_rate << '\n';
}

RunResult run_strategy(const LoopConfig& loop, const DataPool& pool) {
  return loop.strategy == Strategy::DiaNA ? run_active_loop(loop, pool) : run_baseline(loop, pool);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// One run; every round leaves its report files under `out`.
int cmd_run(const std::string& config_path, const fs::path& out, const std::string& model_path) {
  const RunConfig cfg = config_or_default(config_path);
  const DataPool pool = cfg.make_pool();
  const RunResult result = run_strategy(cfg.loop, pool);

  fs::create_directories(out);
  for (const auto& rep : result.rounds) {
    const std::string r = std::to_string(rep.round);
    write_json(out / ("round_" + r + ".json"), rep);
    write_json(out / ("gmm_round_" + r + ".json"),
               gmm_fit_json(rep.gmm, rep.gmm_iterations, rep.gmm_objective));
    write_json(out / ("selection_round_" + r + ".json"), selection_trace_json(rep));
  }
  write_json(out / "result.json", result);
  std::ofstream csv(out / "summary.csv");
  write_csv_header(csv);
  write_csv_rows(csv, result, cfg.loop.seed);
  if (!model_path.empty()) save_checkpoint({result.model, cfg.loop.train}, model_path);

  std::cout << to_string(result.strategy) << ": initial accuracy " << result.initial_accuracy
            << ", final accuracy " << result.final_accuracy() << " after "
            << result.rounds.size() << " rounds; reports in " << out.string() << '\n';
  return 0;
}

/// Paired comparison: seed s drives both the dataset and the loop.
int cmd_compare(const std::string& config_path, const std::string& strategies, int seeds,
                const fs::path& out) {
  const RunConfig base = config_or_default(config_path);
  std::vector<Strategy> list;
  for (const auto& name : split_list(strategies)) list.push_back(strategy_from_string(name));
  if (list.empty()) throw std::invalid_argument("no strategies given");
  if (seeds < 1) throw std::invalid_argument("--seeds must be positive");

  std::ofstream file;
  if (!out.empty()) {
    fs::create_directories(out);
    file.open(out / "compare.csv");
  }
  std::ostream& csv = out.empty() ? std::cout : file;
  write_csv_header(csv);

  std::vector<double> final_sum(list.size(), 0);
  for (int s = 0; s < seeds; ++s) {
    RunConfig cfg = base;
    cfg.data.seed = static_cast<std::uint64_t>(s);
    cfg.loop.seed = static_cast<std::uint64_t>(s);
    const DataPool pool = cfg.make_pool();
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.loop.strategy = list[i];
      const RunResult r = run_strategy(cfg.loop, pool);
      write_csv_rows(csv, r, cfg.loop.seed);
      final_sum[i] += r.final_accuracy();
    }
  }
  for (std::size_t i = 0; i < list.size(); ++i)
    std::cerr << to_string(list[i]) << ": mean final accuracy " << final_sum[i] / seeds << '\n';
  return 0;
}

/// Consistency rates of the low- and high-loss parts of U after source
/// pretraining, for each k and quantile.
int cmd_diagnose(const std::string& config_path, const std::string& k_sweep,
                 const std::string& quantiles, const fs::path& out) {
  const RunConfig cfg = config_or_default(config_path);
  const DataPool pool = cfg.make_pool();
  TrainConfig train = cfg.loop.train;
  train.seed = cfg.loop.seed;
  Model model = make_classifier<double>(pool.input_dim(), cfg.loop.feature_dim, pool.num_classes(),
                                        stream_seed(cfg.loop.seed, Stream::ModelInit));
  model = pretrain_source(std::move(model), pool, train, cfg.loop.pretrain_epochs);
  const auto centroids = compute_centroids(model, labeled_examples(pool), pool.num_classes());

  std::ofstream file;
  if (!out.empty()) {
    fs::create_directories(out);
    file.open(out / "consistency.csv");
  }
  std::ostream& csv = out.empty() ? std::cout : file;
  csv << "k,quantile,loss_threshold,n_well_learnt,n_underfitted,rate_well_learnt,"
         "rate_underfitted\n";
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& ks : split_list(k_sweep)) {
    const int k = std::stoi(ks);
    if (k < 1 || k > cfg.loop.feature_dim) {
      std::cerr << "skipping k = " << k << ": outside [1, " << cfg.loop.feature_dim << "]\n";
      continue;
    }
    for (const auto& qs : split_list(quantiles)) {
      const auto d = consistency_by_loss(model, pool, centroids, k, std::stod(qs));
      csv << d.k << ',' << d.quantile << ',' << d.loss_threshold << ',' << d.n_well_learnt << ','
          << d.n_underfitted << ',' << opt(d.rate_well_learnt) << ','
          << opt(d.rate_underfitted) << '\n';
    }
  }
  return 0;
}

int cmd_generate(const std::string& config_path, const fs::path& out) {
  const RunConfig cfg = config_or_default(config_path);
  save_dataset_file(generate_shifted_dataset(cfg.data), out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active domain adaptation with informative sampling on synthetic shifted data"};
  app.require_subcommand(1);

  std::string config_path, strategies = "diana,random,entropy", k_sweep = "8,16,32,64",
                           quantiles = "0.25,0.5,0.75", model_path;
  std::string run_out, compare_out, diagnose_out, dataset_out;
  int seeds = 10;

  auto* run = app.add_subcommand("run", "Run one active-learning loop");
  run->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Directory for reports")->default_val("diana_out");
  run->add_option("--save-model", model_path, "Write the final model checkpoint here");

  auto* compare = app.add_subcommand("compare", "Compare strategies over paired seeds");
  compare->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  compare->add_option("--strategies", strategies, "Comma-separated strategy names")
      ->capture_default_str();
  compare->add_option("--seeds", seeds, "Number of seeds (0 .. N-1)")->capture_default_str();
  compare->add_option("--out", compare_out, "Directory for compare.csv (stdout if unset)");

  auto* diagnose =
      app.add_subcommand("diagnose-consistency", "Consistency rate of low- vs high-loss samples");
  diagnose->add_option("--config", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  diagnose->add_option("--k-sweep", k_sweep, "Comma-separated k values")->capture_default_str();
  diagnose->add_option("--quantiles", quantiles, "Comma-separated loss quantiles")
      ->capture_default_str();
  diagnose->add_option("--out", diagnose_out, "Directory for consistency.csv (stdout if unset)");

  auto* generate = app.add_subcommand("generate", "Write the configured synthetic dataset");
  generate->add_option("--config", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  generate->add_option("--out", dataset_out, "Dataset file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_out, model_path);
    if (*compare) return cmd_compare(config_path, strategies, seeds, compare_out);
    if (*diagnose) return cmd_diagnose(config_path, k_sweep, quantiles, diagnose_out);
    if (*generate) return cmd_generate(config_path, dataset_out);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
