#pragma once

#include <filesystem>
#include <string>

#include "diana/classifier.hpp"

namespace diana {

struct Checkpoint {
  Model model;
  TrainConfig train;
};

constexpr int kCheckpointVersion = 1;

/// JSON dump of every parameter matrix plus the training configuration.
/// Doubles are written in shortest round-trip form, so load(save(c)) == c
/// bit for bit.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace diana
