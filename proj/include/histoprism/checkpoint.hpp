#pragma once

#include <filesystem>
#include <string>

#include "histoprism/model.hpp"
#include "histoprism/train.hpp"

namespace histoprism {

/// Self-describing model container: JSON header (config, training recipe,
/// trace, tensor directory) followed by the raw f64 little-endian tensors in
/// canonical order. Layout in docs/file_formats.md.
struct Checkpoint {
  ModelConfig config;
  TrainConfig train_config;
  TrainingTrace trace;
  ModelParams params;
  std::size_t trained_split = 0;
};

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Human-readable key/value config files (JSON). Missing keys keep the
/// field's default, so partial files are valid.
ModelConfig model_config_from_json_text(const std::string& text, const std::string& source);
TrainConfig train_config_from_json_text(const std::string& text, const std::string& source);
std::string model_config_to_json_text(const ModelConfig& cfg);
std::string train_config_to_json_text(const TrainConfig& tc);

}  // namespace histoprism
