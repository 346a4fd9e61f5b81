#include "evokg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "evokg/errors.hpp"
#include "evokg/evaluator.hpp"

namespace evokg {

std::vector<ad::Matrix> parameter_values(const Model& model) {
  std::vector<ad::Matrix> out;
  for (const auto& p : model.parameters()) out.push_back(p.var.value());
  return out;
}

void restore_parameter_values(Model& model, const std::vector<ad::Matrix>& values) {
  auto params = model.parameters();
  if (params.size() != values.size())
    throw std::invalid_argument("restore_parameter_values: count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].var.mutable_value() = values[i];
}

namespace {

AdamWOptions adam_options(const ModelConfig& c) {
  AdamWOptions o;
  o.learning_rate = c.learning_rate;
  o.weight_decay = c.weight_decay;
  o.beta1 = c.beta1;
  o.beta2 = c.beta2;
  return o;
}

}  // namespace

Trainer::Trainer(Model& model)
    : model_(model),
      optimizer_(model.parameters(), adam_options(model.config())),
      dropout_rng_(model.config().seed ^ 0x9e3779b97f4a7c15ULL) {}

void Trainer::optimize(ad::Var& pending) {
  if (!pending.defined()) return;
  if (pending.requires_grad()) {
    ad::backward(pending);
    clip_grad_norm(optimizer_.parameters(), model_.config().grad_clip);
    optimizer_.step();
    optimizer_.zero_grad();
  }
  pending = ad::Var();
}

EpochLosses Trainer::train_epoch(const TemporalKG& train, LossWeights weights) {
  const auto& cfg = model_.config();
  const Dropout dropout{cfg.dropout, &dropout_rng_};
  const Dropout* dp = dropout.active() ? &dropout : nullptr;
  auto state = model_.initial_state();
  EpochLosses out;
  ad::Var pending;
  const auto snaps = train.snapshots();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& snap = snaps[i];
    if (i > 0) {
      auto tl = model_.tick_loss(state, snap, weights, dp);
      out.time_nll += tl.time_nll;
      out.triple_nll += tl.triple_nll;
      out.time_events += tl.time_events;
      out.time_skipped += tl.time_skipped;
      out.triple_events += tl.triple_events;
      if (tl.total.defined()) {
        out.total += tl.total.scalar();
        pending = pending.defined() ? pending + tl.total : tl.total;
        if (cfg.optimize_every_tick) {
          out.optimizer_steps += pending.requires_grad() ? 1 : 0;
          optimize(pending);
        }
      }
    }
    model_.advance(state, snap, dp);
    if ((i + 1) % static_cast<std::size_t>(cfg.truncation) == 0) {
      out.optimizer_steps += pending.defined() && pending.requires_grad() ? 1 : 0;
      optimize(pending);
      state.truncate();
    }
  }
  out.optimizer_steps += pending.defined() && pending.requires_grad() ? 1 : 0;
  optimize(pending);
  return out;
}

double Trainer::validation_metric(const TemporalKG& train, const TemporalKG& valid) const {
  if (model_.config().task == Task::kTime) return time_nll(model_, train, valid);
  const auto r = evaluate_links(model_, train, valid, model_.config().use_time_score);
  return r.mrr.value_or(0.0);
}

TrainReport Trainer::fit(const TemporalKG& train, const TemporalKG& valid,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train.empty()) throw ValidationError("training set is empty");
  const auto& cfg = model_.config();
  TrainReport report;
  report.metric = cfg.task == Task::kTime ? "time_nll" : "mrr";
  report.higher_is_better = cfg.task != Task::kTime;
  if (cfg.max_epochs == 0) return report;

  std::vector<LossWeights> phases;
  if (cfg.schedule == Schedule::kTwoPhase) phases.push_back({0.0, 1.0});
  phases.push_back({cfg.lambda1, cfg.lambda2});

  const bool has_valid = !valid.empty();
  auto better = [&](double a, const std::optional<double>& b) {
    if (!b) return true;
    if (!has_valid) return true;
    return report.higher_is_better ? a > *b : a < *b;
  };

  auto best_values = parameter_values(model_);
  int epoch = 0;
  for (std::size_t ph = 0; ph < phases.size() && epoch < cfg.max_epochs; ++ph) {
    std::optional<double> phase_best;
    int stale = 0;
    while (epoch < cfg.max_epochs) {
      const auto start = std::chrono::steady_clock::now();
      EpochRecord rec;
      rec.epoch = ++epoch;
      rec.phase = static_cast<int>(ph) + 1;
      rec.weights = phases[ph];
      rec.losses = train_epoch(train, phases[ph]);
      rec.valid_metric = has_valid ? validation_metric(train, valid) : 0.0;
      if (!std::isfinite(rec.valid_metric))
        throw NumericalError("non-finite validation metric at epoch " + std::to_string(epoch));
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (better(rec.valid_metric, report.best_metric)) {
        report.best_metric = rec.valid_metric;
        report.best_epoch = rec.epoch;
        best_values = parameter_values(model_);
      }
      if (better(rec.valid_metric, phase_best)) {
        phase_best = rec.valid_metric;
        stale = 0;
      } else {
        ++stale;
      }
      report.epochs.push_back(rec);
      if (on_epoch) on_epoch(rec);
      if (stale >= cfg.patience) break;
    }
    restore_parameter_values(model_, best_values);
  }
  return report;
}

std::string epoch_log_line(const EpochRecord& r, const std::string& metric) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["phase"] = r.phase;
  j["lambda1"] = r.weights.time;
  j["lambda2"] = r.weights.triple;
  if (r.weights.time > 0.0) j["L_iet"] = r.losses.time_nll;
  if (r.weights.triple > 0.0) j["L_triple"] = r.losses.triple_nll;
  j["loss"] = r.losses.total;
  j["optimizer_steps"] = r.losses.optimizer_steps;
  j[metric] = r.valid_metric;
  j["seconds"] = r.seconds;
  return j.dump();
}

}  // namespace evokg
