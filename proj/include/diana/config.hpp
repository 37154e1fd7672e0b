#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "diana/datapool.hpp"
#include "diana/harness.hpp"

namespace diana {

/// A full run: where the data comes from plus the loop settings.
struct RunConfig {
  ShiftConfig data;
  std::optional<std::filesystem::path> dataset_path;  // replaces `data` when set
  LoopConfig loop;

  DataPool make_pool() const;
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& cfg);

}  // namespace diana
