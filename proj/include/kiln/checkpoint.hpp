#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "json.hpp"
#include "kiln/model.hpp"

namespace kiln::model {

nlohmann::ordered_json to_json(const TrainConfig &config);
/// Reads the keys present over `base`; unknown keys raise InvalidArgument.
TrainConfig train_config_from_json(const nlohmann::json &j, TrainConfig base = {});

std::string to_json(const Checkpoint &ck);
Checkpoint checkpoint_from_json(const std::string &text);
void write_checkpoint(const Checkpoint &ck, const std::filesystem::path &path);
Checkpoint read_checkpoint(const std::filesystem::path &path);

/// `epoch,train_loss,val_loss,val_macro_f1` with round-trip precision.
std::string metrics_csv(std::span<const EpochLog> log);
void write_metrics_csv(std::span<const EpochLog> log, const std::filesystem::path &path);

} // namespace kiln::model
