#pragma once

// Hyperparameters and run settings. Text form is flat `key = value` lines;
// '#' starts a comment.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evokg {

enum class Task { kLinks, kTime };
enum class Schedule { kTwoPhase, kFixed };

struct ModelConfig {
  Task task = Task::kLinks;
  int temporal_dim = 200;
  int structural_dim = 200;
  int layers = 2;
  int blocks = 2;
  int components = 128;
  int truncation = 20;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::optional<double> alpha;  // defaults by task: 1 for links, 0 for time
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip = 5.0;
  double dropout = 0.2;
  double sigma_floor = 1e-3;
  double sigma_ceiling = 2.0;  // inf disables
  int patience = 5;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::kTwoPhase;
  bool optimize_every_tick = false;
  bool use_time_score = true;

  double effective_alpha() const { return alpha.value_or(task == Task::kLinks ? 1.0 : 0.0); }

  // Throws std::invalid_argument naming the offending key.
  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  std::filesystem::path data_dir;  // train.txt / valid.txt / test.txt / stat.txt
  std::int64_t time_units_per_tick = 1;
  double hours_per_tick = 1.0;
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;
};

// Applies `key = value` to cfg; unknown keys and bad values throw
// std::invalid_argument.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a config file on top of cfg.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
void parse_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

// Every key in a fixed order, resolved values.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
std::string to_config_text(const RunConfig& cfg);

// Model-only subset used inside checkpoints.
std::string to_model_config_text(const ModelConfig& cfg);
ModelConfig parse_model_config_text(const std::string& text);

}  // namespace evokg
