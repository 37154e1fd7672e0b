#include "diana/config.hpp"

#include <fstream>
#include <sstream>

#include "diana/json_io.hpp"

namespace diana {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"epochs_per_round", c.epochs_per_round},
       {"batch_size", c.batch_size},       {"lambda_c", c.lambda_c},
       {"lambda_e", c.lambda_e},           {"aug_noise_sigma", c.aug_noise_sigma},
       {"aug_dropout_p", c.aug_dropout_p}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.epochs_per_round = j.value("epochs_per_round", d.epochs_per_round);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lambda_c = j.value("lambda_c", d.lambda_c);
  c.lambda_e = j.value("lambda_e", d.lambda_e);
  c.aug_noise_sigma = j.value("aug_noise_sigma", d.aug_noise_sigma);
  c.aug_dropout_p = j.value("aug_dropout_p", d.aug_dropout_p);
  c.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const ShiftConfig& c) {
  j = {{"num_classes", c.num_classes},
       {"input_dim", c.input_dim},
       {"n_source", c.n_source},
       {"n_target", c.n_target},
       {"shift_kind", to_string(c.shift_kind)},
       {"shift_magnitude", c.shift_magnitude},
       {"class_separation", c.class_separation},
       {"class_noise", c.class_noise},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ShiftConfig& c) {
  const ShiftConfig d;
  c.num_classes = j.value("num_classes", d.num_classes);
  c.input_dim = j.value("input_dim", d.input_dim);
  c.n_source = j.value("n_source", d.n_source);
  c.n_target = j.value("n_target", d.n_target);
  c.shift_kind = shift_kind_from_string(j.value("shift_kind", to_string(d.shift_kind)));
  c.shift_magnitude = j.value("shift_magnitude", d.shift_magnitude);
  c.class_separation = j.value("class_separation", d.class_separation);
  c.class_noise = j.value("class_noise", d.class_noise);
  c.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const SfdaConfig& c) {
  j = {{"t_v_init", c.t_v_init}, {"t_v_step", c.t_v_step}, {"t_c_step", c.t_c_step}};
  j["t_c_init"] = c.t_c_init ? nlohmann::json(*c.t_c_init) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SfdaConfig& c) {
  const SfdaConfig d;
  c.t_v_init = j.value("t_v_init", d.t_v_init);
  c.t_v_step = j.value("t_v_step", d.t_v_step);
  c.t_c_step = j.value("t_c_step", d.t_c_step);
  if (j.contains("t_c_init") && !j.at("t_c_init").is_null())
    c.t_c_init = j.at("t_c_init").get<double>();
}

void to_json(nlohmann::json& j, const LoopConfig& c) {
  j = {{"budget", c.budget},
       {"rounds", c.rounds},
       {"tau", c.tau},
       {"k", c.k},
       {"feature_dim", c.feature_dim},
       {"pretrain_epochs", c.pretrain_epochs},
       {"train", c.train},
       {"strategy", to_string(c.strategy)},
       {"seed", c.seed}};
  j["sfda"] = c.sfda ? nlohmann::json(*c.sfda) : nlohmann::json(nullptr);
  j["gmm_alpha"] = c.gmm_alpha ? nlohmann::json(*c.gmm_alpha) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, LoopConfig& c) {
  const LoopConfig d;
  c.budget = j.value("budget", d.budget);
  c.rounds = j.value("rounds", d.rounds);
  c.tau = j.value("tau", d.tau);
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  // k follows feature_dim / 8 unless given.
  c.k = j.value("k", std::max(1, c.feature_dim / 8));
  c.pretrain_epochs = j.value("pretrain_epochs", d.pretrain_epochs);
  c.train = j.value("train", d.train);
  c.strategy = strategy_from_string(j.value("strategy", to_string(d.strategy)));
  c.seed = j.value("seed", d.seed);
  c.sfda.reset();
  if (j.contains("sfda") && !j.at("sfda").is_null()) c.sfda = j.at("sfda").get<SfdaConfig>();
  c.gmm_alpha.reset();
  if (j.contains("gmm_alpha") && !j.at("gmm_alpha").is_null())
    c.gmm_alpha = j.at("gmm_alpha").get<double>();
}

void to_json(nlohmann::json& j, const GmmParams& p) {
  auto arr = [](const Eigen::Array4d& a) { return std::vector<double>(a.data(), a.data() + 4); };
  j = {{"pi", arr(p.pi)}, {"mu", arr(p.mu)}, {"sigma2", arr(p.sigma2)}};
}

void from_json(const nlohmann::json& j, GmmParams& p) {
  auto arr = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 4) throw std::runtime_error(std::string("GMM params: ") + key + " needs 4 values");
    return Eigen::Array4d(v[0], v[1], v[2], v[3]);
  };
  p.pi = arr("pi");
  p.mu = arr("mu");
  p.sigma2 = arr("sigma2");
}

nlohmann::json gmm_fit_json(const GmmParams& params, int iterations, double objective) {
  nlohmann::json j = params;
  j["iterations"] = iterations;
  j["objective"] = objective;
  return j;
}

namespace {

nlohmann::json partition_json(const PartitionSizes& p) {
  return {{"CC", p.cc}, {"UC", p.uc}, {"UI_residual", p.ui_residual}, {"CI", p.ci}};
}

}  // namespace

nlohmann::json selection_trace_json(const RoundReport& r) {
  auto selected = nlohmann::json::array();
  for (const auto& s : r.selected)
    selected.push_back({{"id", s.id}, {"posterior_ui", s.posterior_ui}});
  return {{"round", r.round}, {"selected", selected}, {"partition", partition_json(r.partition)}};
}

void to_json(nlohmann::json& j, const RoundReport& r) {
  j = selection_trace_json(r);
  j["accuracy"] = r.accuracy;
  j["selected_error_rate"] = r.selected_error_rate;
  j["gmm"] = gmm_fit_json(r.gmm, r.gmm_iterations, r.gmm_objective);
  j["target_labeled"] = r.target_labeled;
  j["target_unlabeled"] = r.target_unlabeled;
  j["train_loss"] = r.train_loss;
  j["cc_empty"] = r.cc_empty;
  j["uc_empty"] = r.uc_empty;
}

void to_json(nlohmann::json& j, const RunResult& r) {
  j = {{"strategy", to_string(r.strategy)},
       {"initial_accuracy", r.initial_accuracy},
       {"final_accuracy", r.final_accuracy()},
       {"rounds", r.rounds}};
}

DataPool RunConfig::make_pool() const {
  return dataset_path ? load_dataset_file(*dataset_path) : generate_shifted_dataset(data);
}

RunConfig run_config_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunConfig cfg;
  if (j.contains("data")) cfg.data = j.at("data").get<ShiftConfig>();
  if (j.contains("dataset_path") && !j.at("dataset_path").is_null())
    cfg.dataset_path = j.at("dataset_path").get<std::string>();
  if (j.contains("loop")) cfg.loop = j.at("loop").get<LoopConfig>();
  cfg.loop.validate();
  if (!cfg.dataset_path) cfg.data.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& cfg) {
  nlohmann::json j;
  j["data"] = cfg.data;
  j["dataset_path"] =
      cfg.dataset_path ? nlohmann::json(cfg.dataset_path->string()) : nlohmann::json(nullptr);
  j["loop"] = cfg.loop;
  return j.dump(2);
}

}  // namespace diana
