#include "evokg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "evokg/checkpoint.hpp"
#include "evokg/config.hpp"
#include "evokg/errors.hpp"
#include "evokg/evaluator.hpp"
#include "evokg/plot.hpp"
#include "evokg/trainer.hpp"

namespace fs = std::filesystem;

namespace evokg {

namespace {

// Flags shared by every command; unset ones leave the config untouched.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::string> data;
  std::optional<std::string> alpha;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<bool> use_time_score;
  std::optional<std::string> task;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--set", f.sets, "KEY=VALUE override (repeatable)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint path");
  cmd->add_option("--data", f.data, "dataset directory (train/valid/test.txt)");
  cmd->add_option("--alpha", f.alpha, "time branch weight in [0,1] or 'auto'");
  cmd->add_option("--lambda1", f.lambda1, "weight of the time loss");
  cmd->add_option("--lambda2", f.lambda2, "weight of the structure loss");
  cmd->add_option("--use-time-score", f.use_time_score, "add the time term to link scores");
  cmd->add_option("--task", f.task, "links or time");
}

// default < config file < --set < dedicated flags.
RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw std::invalid_argument("config file not found: " + f.config);
    load_config_file(cfg, f.config);
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got " + kv);
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.model.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  if (f.data) cfg.data_dir = *f.data;
  if (f.alpha) set_config_value(cfg, "alpha", *f.alpha);
  if (f.lambda1) cfg.model.lambda1 = *f.lambda1;
  if (f.lambda2) cfg.model.lambda2 = *f.lambda2;
  if (f.use_time_score) cfg.model.use_time_score = *f.use_time_score;
  if (f.task) set_config_value(cfg, "task", *f.task);
  cfg.model.validate();
  return cfg;
}

Granularity granularity_of(const RunConfig& cfg) {
  return {cfg.time_units_per_tick, cfg.hours_per_tick};
}

Split load_data(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw ValidationError("no data directory given (--data or data_dir)");
  if (!fs::is_directory(cfg.data_dir))
    throw ValidationError("data directory not found: " + cfg.data_dir.string());
  return load_dataset_dir(cfg.data_dir, granularity_of(cfg));
}

fs::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? cfg.out_dir / "checkpoint.bin" : cfg.checkpoint;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string stats_block(const Split& s, const Granularity& g) {
  std::ostringstream os;
  const auto all = concat(concat(s.train, s.valid), s.test);
  os << "entities: " << all.num_entities() << '\n';
  os << "relations: " << all.num_relations() << '\n';
  os << "train_edges: " << s.train.size() << '\n';
  os << "valid_edges: " << s.valid.size() << '\n';
  os << "test_edges: " << s.test.size() << '\n';
  os << "hours_per_tick: " << g.hours_per_tick << '\n';
  if (auto first = all.first_tick()) {
    const auto last = *all.last_tick();
    os << "tick_range: " << *first << ".." << last << '\n';
    os << "tick_span: " << last - *first + 1 << '\n';
    os << "snapshots: " << all.snapshots().size() << '\n';
  }
  return os.str();
}

int cmd_ingest(const RunConfig& cfg, const std::string& raw, std::ostream& out) {
  const auto g = granularity_of(cfg);
  Split split;
  if (fs::is_directory(raw)) {
    split = load_dataset_dir(raw, g);
  } else if (fs::exists(raw)) {
    split.train = load_quadruple_file(raw, g);
  } else {
    throw ValidationError("input not found: " + raw);
  }
  fs::create_directories(cfg.out_dir);
  write_quadruple_file(cfg.out_dir / "train.txt", split.train);
  write_quadruple_file(cfg.out_dir / "valid.txt", split.valid);
  write_quadruple_file(cfg.out_dir / "test.txt", split.test);
  write_text(cfg.out_dir / "stat.txt", std::to_string(split.train.num_entities()) + '\t' +
                                           std::to_string(split.train.num_relations()) + '\n');
  const auto stats = stats_block(split, g);
  write_text(cfg.out_dir / "stats.txt", stats);
  out << stats;
  return kExitOk;
}

std::string train_report_text(const TrainReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "metric: " << r.metric << '\n';
  os << "epochs: " << r.epochs.size() << '\n';
  os << "best_epoch: " << r.best_epoch << '\n';
  if (r.best_metric) os << "best_metric: " << *r.best_metric << '\n';
  os << "epoch,phase,lambda1,lambda2,L_iet,L_triple,loss," << r.metric << '\n';
  for (const auto& e : r.epochs) {
    os << e.epoch << ',' << e.phase << ',' << e.weights.time << ',' << e.weights.triple << ',';
    if (e.weights.time > 0.0) os << e.losses.time_nll;
    os << ',';
    if (e.weights.triple > 0.0) os << e.losses.triple_nll;
    os << ',' << e.losses.total << ',' << e.valid_metric << '\n';
  }
  return os.str();
}

std::string loss_svg(const std::vector<EpochRecord>& epochs) {
  Series iet{"L_iet", {}, {}}, triple{"L_triple", {}, {}};
  for (const auto& e : epochs) {
    if (e.weights.time > 0.0) {
      iet.x.push_back(e.epoch);
      iet.y.push_back(e.losses.time_nll);
    }
    if (e.weights.triple > 0.0) {
      triple.x.push_back(e.epoch);
      triple.y.push_back(e.losses.triple_nll);
    }
  }
  std::vector<Series> s;
  if (!iet.x.empty()) s.push_back(iet);
  if (!triple.x.empty()) s.push_back(triple);
  return line_chart_svg("Training loss", "epoch", "summed NLL", s);
}

std::string valid_svg(const std::vector<EpochRecord>& epochs, const std::string& metric) {
  Series v{metric, {}, {}};
  for (const auto& e : epochs) {
    v.x.push_back(e.epoch);
    v.y.push_back(e.valid_metric);
  }
  return line_chart_svg("Validation " + metric, "epoch", metric, {v});
}

std::string tick_svg(const MetricReport& r, bool time) {
  Series s{time ? "MAE (hours)" : "MRR", {}, {}};
  for (const auto& t : r.per_tick) {
    if (time && !t.mae_hours) continue;
    s.x.push_back(static_cast<double>(t.tick));
    s.y.push_back(time ? *t.mae_hours : t.mrr);
  }
  return line_chart_svg((time ? "MAE per tick (" : "MRR per tick (") + r.split + ")", "tick",
                        s.name, {s});
}

void print_summary(const MetricReport& r, std::ostream& out) { out << to_report_text(r); }

MetricReport evaluate_task(const Model& model, const Split& split, const std::string& which,
                           bool use_time_score) {
  TemporalKG history, target;
  if (which == "train") {
    history = split.train.slice({});
    target = split.train;
  } else if (which == "valid") {
    history = split.train;
    target = split.valid;
  } else if (which == "test") {
    history = concat(split.train, split.valid);
    target = split.test;
  } else {
    throw std::invalid_argument("--split must be train, valid or test");
  }
  auto r = model.config().task == Task::kTime ? evaluate_times(model, history, target)
                                              : evaluate_links(model, history, target,
                                                               use_time_score);
  r.split = which;
  return r;
}

void write_metrics(const fs::path& dir, const MetricReport& r, bool time) {
  write_report_text(dir / "metrics.txt", r);
  write_report_csv(dir / "metrics.csv", r);
  write_svg(dir / "metric_vs_tick.svg", tick_svg(r, time));
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto split = load_data(cfg);
  if (split.train.empty()) throw ValidationError("training split is empty");
  fs::create_directories(cfg.out_dir);
  Model model(cfg.model, split.train.num_entities(), split.train.num_relations());
  Trainer trainer(model);
  const auto metric = cfg.model.task == Task::kTime ? "time_nll" : "mrr";
  std::ofstream log(cfg.out_dir / "train_log.jsonl", std::ios::binary);
  const auto report = trainer.fit(split.train, split.valid, [&](const EpochRecord& e) {
    const auto line = epoch_log_line(e, metric);
    log << line << '\n';
    out << line << '\n';
  });
  const auto ckpt = checkpoint_path(cfg);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, model);
  write_text(cfg.out_dir / "train_report.txt", train_report_text(report));
  write_svg(cfg.out_dir / "loss_curve.svg", loss_svg(report.epochs));
  write_svg(cfg.out_dir / "valid_curve.svg", valid_svg(report.epochs, metric));
  if (!split.test.empty()) {
    const auto r = evaluate_task(model, split, "test", cfg.model.use_time_score);
    write_metrics(cfg.out_dir, r, cfg.model.task == Task::kTime);
    print_summary(r, out);
  }
  out << "checkpoint: " << ckpt.string() << '\n';
  return kExitOk;
}

Model load_compatible(const RunConfig& cfg, const Split& split, const CommonFlags& flags) {
  const auto path = checkpoint_path(cfg);
  auto loaded = load_checkpoint(path);
  Model& m = loaded.model;
  if (m.num_entities() != split.train.num_entities() ||
      m.num_relations() != split.train.num_relations())
    throw ValidationError("checkpoint " + path.string() + " expects " +
                          std::to_string(m.num_entities()) + " entities and " +
                          std::to_string(m.num_relations()) + " relations; data has " +
                          std::to_string(split.train.num_entities()) + " and " +
                          std::to_string(split.train.num_relations()));
  if (flags.task) m.mutable_config().task = cfg.model.task;
  if (flags.alpha) m.mutable_config().alpha = cfg.model.alpha;
  if (flags.task || flags.alpha) m.params().time.alpha = m.config().effective_alpha();
  if (flags.use_time_score) m.mutable_config().use_time_score = cfg.model.use_time_score;
  return std::move(loaded.model);
}

int cmd_evaluate(const RunConfig& cfg, const CommonFlags& flags, const std::string& which,
                 std::ostream& out) {
  const auto split = load_data(cfg);
  const Model model = load_compatible(cfg, split, flags);
  const bool time = model.config().task == Task::kTime;
  fs::create_directories(cfg.out_dir);
  auto r = evaluate_task(model, split, which, model.config().use_time_score);
  write_metrics(cfg.out_dir, r, time);
  print_summary(r, out);
  if (time && which != "train") {
    const auto history = which == "test" ? concat(split.train, split.valid) : split.train;
    auto base = naive_time_baseline(history, which == "test" ? split.test : split.valid,
                                    model.config().effective_alpha());
    base.split = which;
    write_report_text(cfg.out_dir / "baseline.txt", base);
    out << "baseline_mae_hours: "
        << (base.mae_hours ? std::to_string(*base.mae_hours) : std::string("absent")) << '\n';
  }
  return kExitOk;
}

int cmd_predict_time(const RunConfig& cfg, const CommonFlags& flags, int s, int r, int o,
                     std::ostream& out) {
  const auto split = load_data(cfg);
  const Model model = load_compatible(cfg, split, flags);
  if (s < 0 || o < 0 || r < 0 || s >= model.num_entities() || o >= model.num_entities() ||
      r >= model.num_relations())
    throw std::invalid_argument("predict-time: id out of range");
  auto state = model.initial_state();
  propagate(model, state, concat(concat(split.train, split.valid), split.test));
  const auto& head = model.params().time;
  const auto ctx = model.time_context(state, s, r, o);
  const double hours = cfg.hours_per_tick;
  out << std::setprecision(10);
  auto show = [&](const char* name, TimeBranch b, std::optional<Tick> ref) {
    const double e = branch_expectations(ctx, head, b)(0, 0);
    out << name << "_expected_ticks: " << e << '\n';
    if (ref) {
      out << name << "_reference_tick: " << *ref << '\n';
      out << name << "_predicted_tick: " << static_cast<double>(*ref) + e << '\n';
      out << name << "_predicted_hours_after_reference: " << e * hours << '\n';
    } else {
      out << name << "_reference_tick: absent\n";
    }
  };
  const auto ls = state.tracker.last_entity_time(s);
  const auto lo = state.tracker.last_entity_time(o);
  std::optional<Tick> min_ref;
  if (ls || lo) min_ref = std::max(ls.value_or(*lo), lo.value_or(*ls));
  show("pair", TimeBranch::kPair, state.tracker.last_pair_time(s, o));
  show("min", TimeBranch::kMin, min_ref);
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
  const auto log_path = cfg.out_dir / "train_log.jsonl";
  std::ifstream in(log_path);
  if (!in) throw ValidationError("no training log at " + log_path.string());
  std::vector<EpochRecord> epochs;
  std::string metric = "mrr";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EpochRecord e;
    e.epoch = j.at("epoch").get<int>();
    e.phase = j.at("phase").get<int>();
    e.weights = {j.at("lambda1").get<double>(), j.at("lambda2").get<double>()};
    if (j.contains("L_iet")) e.losses.time_nll = j["L_iet"].get<double>();
    if (j.contains("L_triple")) e.losses.triple_nll = j["L_triple"].get<double>();
    e.losses.total = j.at("loss").get<double>();
    if (j.contains("time_nll")) metric = "time_nll";
    e.valid_metric = j.at(metric).get<double>();
    epochs.push_back(e);
  }
  write_svg(cfg.out_dir / "loss_curve.svg", loss_svg(epochs));
  write_svg(cfg.out_dir / "valid_curve.svg", valid_svg(epochs, metric));
  out << "epochs: " << epochs.size() << '\n';
  for (const auto& e : epochs)
    out << "epoch " << e.epoch << " phase " << e.phase << " loss " << e.losses.total << ' '
        << metric << ' ' << e.valid_metric << '\n';
  const auto csv = cfg.out_dir / "metrics.csv";
  if (fs::exists(csv))
    for (const auto& m : read_report_csv(csv))
      if (m.tick_bucket == "all") out << m.metric << ": " << m.value << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal knowledge graph event and time modelling"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* ingest = app.add_subcommand("ingest", "validate and canonicalise a dataset");
  std::string raw;
  ingest->add_option("input", raw, "dataset directory or quadruple file")->required();
  add_common(ingest, flags);

  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint");
  add_common(train, flags);

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a split");
  std::string which = "test";
  evaluate->add_option("--split", which, "train, valid or test");
  add_common(evaluate, flags);

  auto* predict = app.add_subcommand("predict-time", "expected next time of a triple");
  int s = -1, r = -1, o = -1;
  predict->add_option("--subject", s)->required();
  predict->add_option("--relation", r)->required();
  predict->add_option("--object", o)->required();
  add_common(predict, flags);

  auto* report = app.add_subcommand("report", "summarise a training run and redraw its plots");
  add_common(report, flags);

  auto* echo = app.add_subcommand("echo-config", "print the resolved configuration");
  add_common(echo, flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const auto cfg = resolve(flags);
    if (ingest->parsed()) return cmd_ingest(cfg, raw, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, flags, which, out);
    if (predict->parsed()) return cmd_predict_time(cfg, flags, s, r, o, out);
    if (report->parsed()) return cmd_report(cfg, out);
    out << to_config_text(cfg);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ValidationError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace evokg
