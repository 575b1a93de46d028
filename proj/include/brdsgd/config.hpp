#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "brdsgd/analysis.hpp"
#include "brdsgd/experiment.hpp"

namespace brdsgd {

// Reads an experiment from TOML. Unknown keys are rejected. Relative file
// paths inside the config resolve against `base_dir`.
ExperimentConfig parse_experiment(std::string_view toml_text,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Deterministic TOML rendering of every field; parse_experiment() of the
// result reproduces the config. Used for hashing and the run manifest.
std::string canonical_text(const ExperimentConfig& cfg);

// Bound inputs read from a flat TOML table. Keys: rho chi beta M L mu Z R B k0
// a c1 c2, and c for the consensus bound. Missing keys keep `base`.
struct BoundFile {
  BoundInputs inputs;
  double c = 1.0;
};
BoundFile parse_bound_inputs(std::string_view toml_text, BoundFile base = {});

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace brdsgd
