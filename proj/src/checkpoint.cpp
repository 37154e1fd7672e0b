#include "diana/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "diana/json_io.hpp"

namespace diana {

namespace {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                          const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw std::runtime_error(std::string("checkpoint: bad shape for ") + name);
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::runtime_error(std::string("checkpoint: bad shape for ") + name);
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index n, const char* name) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != n)
    throw std::runtime_error(std::string("checkpoint: bad length for ") + name);
  return Eigen::Map<const VectorXd>(values.data(), n);
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const Model& m = ckpt.model;
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["input_dim"] = m.input_dim();
  j["feature_dim"] = m.feature_dim();
  j["num_classes"] = m.num_classes();
  j["w_hidden"] = matrix_to_json(m.w_hidden);
  j["b_hidden"] = vector_to_json(m.b_hidden);
  j["w_out"] = matrix_to_json(m.w_out);
  j["b_out"] = vector_to_json(m.b_out);
  j["train"] = ckpt.train;
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const int d_in = j.at("input_dim").get<int>();
  const int d_feat = j.at("feature_dim").get<int>();
  const int c = j.at("num_classes").get<int>();
  if (d_in < 1 || d_feat < 1 || c < 1) throw std::runtime_error("checkpoint: bad dimensions");
  Checkpoint ckpt;
  ckpt.model.w_hidden = matrix_from_json(j.at("w_hidden"), d_feat, d_in, "w_hidden");
  ckpt.model.b_hidden = vector_from_json(j.at("b_hidden"), d_feat, "b_hidden");
  ckpt.model.w_out = matrix_from_json(j.at("w_out"), c, d_feat, "w_out");
  ckpt.model.b_out = vector_from_json(j.at("b_out"), c, "b_out");
  if (!ckpt.model.all_finite()) throw std::runtime_error("checkpoint: non-finite parameter");
  ckpt.train = j.at("train").get<TrainConfig>();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace diana
