#include "evokg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace evokg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("config: bad value for '" + key + "': '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("config: bad boolean for '" + key + "': '" + value + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Key {
  const char* name;
  bool model;  // stored in checkpoints
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(name, field)                                                              \
  Key{name, true,                                                                         \
      [](RunConfig& c, const std::string& v) { c.model.field = parse_number<int>(name, v); }, \
      [](const RunConfig& c) { return std::to_string(c.model.field); }}
#define DOUBLE_KEY(name, field)                                                      \
  Key{name, true,                                                                    \
      [](RunConfig& c, const std::string& v) {                                       \
        c.model.field = parse_number<double>(name, v);                               \
      },                                                                             \
      [](const RunConfig& c) { return fmt_double(c.model.field); }}
#define BOOL_KEY(name, field)                                                               \
  Key{name, true, [](RunConfig& c, const std::string& v) { c.model.field = parse_bool(name, v); }, \
      [](const RunConfig& c) { return std::string(c.model.field ? "true" : "false"); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"task", true,
          [](RunConfig& c, const std::string& v) {
            if (v == "links")
              c.model.task = Task::kLinks;
            else if (v == "time")
              c.model.task = Task::kTime;
            else
              throw std::invalid_argument("config: task must be 'links' or 'time'");
          },
          [](const RunConfig& c) {
            return std::string(c.model.task == Task::kLinks ? "links" : "time");
          }},
      INT_KEY("temporal_dim", temporal_dim),
      INT_KEY("structural_dim", structural_dim),
      INT_KEY("layers", layers),
      INT_KEY("blocks", blocks),
      INT_KEY("components", components),
      INT_KEY("truncation", truncation),
      DOUBLE_KEY("lambda1", lambda1),
      DOUBLE_KEY("lambda2", lambda2),
      Key{"alpha", true,
          [](RunConfig& c, const std::string& v) {
            if (v == "auto")
              c.model.alpha.reset();
            else
              c.model.alpha = parse_number<double>("alpha", v);
          },
          [](const RunConfig& c) {
            return c.model.alpha ? fmt_double(*c.model.alpha) : std::string("auto");
          }},
      DOUBLE_KEY("learning_rate", learning_rate),
      DOUBLE_KEY("weight_decay", weight_decay),
      DOUBLE_KEY("beta1", beta1),
      DOUBLE_KEY("beta2", beta2),
      DOUBLE_KEY("grad_clip", grad_clip),
      DOUBLE_KEY("dropout", dropout),
      DOUBLE_KEY("sigma_floor", sigma_floor),
      DOUBLE_KEY("sigma_ceiling", sigma_ceiling),
      INT_KEY("patience", patience),
      INT_KEY("max_epochs", max_epochs),
      Key{"seed", true,
          [](RunConfig& c, const std::string& v) {
            c.model.seed = parse_number<std::uint64_t>("seed", v);
          },
          [](const RunConfig& c) { return std::to_string(c.model.seed); }},
      Key{"schedule", true,
          [](RunConfig& c, const std::string& v) {
            if (v == "two_phase")
              c.model.schedule = Schedule::kTwoPhase;
            else if (v == "fixed")
              c.model.schedule = Schedule::kFixed;
            else
              throw std::invalid_argument("config: schedule must be 'two_phase' or 'fixed'");
          },
          [](const RunConfig& c) {
            return std::string(c.model.schedule == Schedule::kTwoPhase ? "two_phase" : "fixed");
          }},
      BOOL_KEY("optimize_every_tick", optimize_every_tick),
      BOOL_KEY("use_time_score", use_time_score),
      Key{"data_dir", false,
          [](RunConfig& c, const std::string& v) { c.data_dir = v; },
          [](const RunConfig& c) { return c.data_dir.string(); }},
      Key{"time_units_per_tick", false,
          [](RunConfig& c, const std::string& v) {
            c.time_units_per_tick = parse_number<std::int64_t>("time_units_per_tick", v);
          },
          [](const RunConfig& c) { return std::to_string(c.time_units_per_tick); }},
      Key{"hours_per_tick", false,
          [](RunConfig& c, const std::string& v) {
            c.hours_per_tick = parse_number<double>("hours_per_tick", v);
          },
          [](const RunConfig& c) { return fmt_double(c.hours_per_tick); }},
      Key{"out_dir", false, [](RunConfig& c, const std::string& v) { c.out_dir = v; },
          [](const RunConfig& c) { return c.out_dir.string(); }},
      Key{"checkpoint", false, [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
          [](const RunConfig& c) { return c.checkpoint.string(); }},
  };
  return table;
}

#undef INT_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

}  // namespace

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* rule) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + key + " " + rule);
  };
  require(temporal_dim >= 1, "temporal_dim", "must be >= 1");
  require(structural_dim >= 1, "structural_dim", "must be >= 1");
  require(layers >= 1, "layers", "must be >= 1");
  require(blocks >= 1, "blocks", "must be >= 1");
  require(temporal_dim % blocks == 0 && structural_dim % blocks == 0, "blocks",
          "must divide the embedding sizes");
  require(components >= 1, "components", "must be >= 1");
  require(truncation >= 1, "truncation", "must be >= 1");
  require(lambda1 >= 0.0, "lambda1", "must be >= 0");
  require(lambda2 >= 0.0, "lambda2", "must be >= 0");
  require(!alpha || (*alpha >= 0.0 && *alpha <= 1.0), "alpha", "must lie in [0, 1]");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(grad_clip >= 0.0, "grad_clip", "must be >= 0 (0 disables)");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
  require(sigma_floor > 0.0, "sigma_floor", "must be > 0");
  require(sigma_ceiling > sigma_floor, "sigma_ceiling", "must exceed sigma_floor");
  require(patience >= 1, "patience", "must be >= 1");
  require(max_epochs >= 0, "max_epochs", "must be >= 0");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

void parse_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  parse_config_text(cfg, buf.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

std::string to_model_config_text(const ModelConfig& cfg) {
  RunConfig run;
  run.model = cfg;
  std::string out;
  for (const auto& k : keys())
    if (k.model) out += std::string(k.name) + " = " + k.get(run) + "\n";
  return out;
}

ModelConfig parse_model_config_text(const std::string& text) {
  RunConfig run;
  parse_config_text(run, text, "checkpoint config");
  return run.model;
}

}  // namespace evokg
