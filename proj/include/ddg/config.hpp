#pragma once

#include <string>

#include "ddg/training.hpp"

namespace ddg {

// Parsed experiment configuration file (JSON). Unknown keys are rejected;
// relative paths are resolved against the config file's directory.
struct LabConfig {
  RunConfig run;  // manifest and specs filled in
  int ablation_seeds = 3;
  std::string dataset_path;  // resolved; empty when not set
  std::string output_dir;    // resolved; "." when not set
};

LabConfig load_config(const std::string& path);

}  // namespace ddg
