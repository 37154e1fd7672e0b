#pragma once

// nlohmann/json bindings for the configuration and report types.

#include "json.hpp"

#include "diana/classifier.hpp"
#include "diana/datapool.hpp"
#include "diana/gmm.hpp"
#include "diana/harness.hpp"
#include "diana/sampler.hpp"

namespace diana {

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const ShiftConfig& c);
void from_json(const nlohmann::json& j, ShiftConfig& c);

void to_json(nlohmann::json& j, const SfdaConfig& c);
void from_json(const nlohmann::json& j, SfdaConfig& c);

void to_json(nlohmann::json& j, const LoopConfig& c);
void from_json(const nlohmann::json& j, LoopConfig& c);

void to_json(nlohmann::json& j, const GmmParams& p);
void from_json(const nlohmann::json& j, GmmParams& p);

/// Params dump: pi[4], mu[4], sigma2[4], iterations, objective.
nlohmann::json gmm_fit_json(const GmmParams& params, int iterations, double objective);

/// Selection trace: selected ids with posteriors and partition sizes.
nlohmann::json selection_trace_json(const RoundReport& r);

void to_json(nlohmann::json& j, const RoundReport& r);
void to_json(nlohmann::json& j, const RunResult& r);

}  // namespace diana
