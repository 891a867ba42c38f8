#pragma once

#include <filesystem>
#include <optional>

#include "defsurf/train/trainer.hpp"

namespace defsurf::io {

// Versioned binary checkpoint: magic + header JSON (config, iteration,
// delta, RNG states, tensor manifest, optimizer scalars) followed by raw
// float64 tensor payloads in manifest order. Round-trips exactly.
struct RawCheckpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat* find(const std::string& name) const;
};

void write_checkpoint_file(const std::filesystem::path& path,
                           const RawCheckpoint& checkpoint);
RawCheckpoint read_checkpoint_file(const std::filesystem::path& path);

void save_training_checkpoint(const std::filesystem::path& path,
                              const train::TrainConfig& config,
                              const fields::DeformationField& field,
                              const render::ShaderPair& shaders,
                              const std::optional<ad::Adam>& adam_coarse,
                              const std::optional<ad::Adam>& adam_fine,
                              const rng::Engine& view_rng,
                              const rng::Engine& pixel_rng, long iteration,
                              double delta);

struct LoadedModel {
  train::TrainConfig config;
  train::ModelBundle model;
  long iteration = 0;
  double delta = 0;
};

// Rebuilds the model from the stored config (encoders and eigenbasis are
// reconstructed deterministically from their seeds and policies) and
// restores every parameter tensor. Throws VersionError on mismatches.
LoadedModel load_model(const std::filesystem::path& path,
                       const std::filesystem::path& cache_dir = {});

}  // namespace defsurf::io
