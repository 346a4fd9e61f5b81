#pragma once

// Temporal knowledge graph storage: quadruples, chronological splits,
// per-tick snapshots and the interaction history used for inter-event times.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace evokg {

using Tick = std::int64_t;

struct Quadruple {
  int subject = 0;
  int relation = 0;
  int object = 0;
  Tick tick = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

// How raw timestamps map to ticks and how long a tick lasts.
struct Granularity {
  std::int64_t units_per_tick = 1;  // raw timestamp units per tick
  double hours_per_tick = 1.0;

  static Granularity hours(std::int64_t h) { return {h, static_cast<double>(h)}; }
  static Granularity minutes(std::int64_t m) { return {m, static_cast<double>(m) / 60.0}; }
  static Granularity years(std::int64_t y) { return {y, 8760.0 * static_cast<double>(y)}; }
};

// Events sharing one tick. Views into the owning TemporalKG.
struct Snapshot {
  Tick tick = 0;
  std::span<const Quadruple> events;
};

class TemporalKG {
 public:
  TemporalKG() = default;

  // Stable-sorts by tick and validates ids, ticks and exact duplicates.
  // Counts <= 0 are inferred as max id + 1.
  static TemporalKG build(std::vector<Quadruple> quads, int num_entities = 0,
                          int num_relations = 0, Granularity granularity = {});

  const std::vector<Quadruple>& quadruples() const { return quads_; }
  int num_entities() const { return num_entities_; }
  int num_relations() const { return num_relations_; }
  const Granularity& granularity() const { return granularity_; }
  std::size_t size() const { return quads_.size(); }
  bool empty() const { return quads_.empty(); }
  std::optional<Tick> first_tick() const;
  std::optional<Tick> last_tick() const;

  // Sub-graph sharing counts and granularity.
  TemporalKG slice(std::vector<Quadruple> quads) const;

  // Ticks strictly increasing; empty ticks skipped.
  std::vector<Snapshot> snapshots() const;

 private:
  std::vector<Quadruple> quads_;
  int num_entities_ = 0;
  int num_relations_ = 0;
  Granularity granularity_;
};

// Concatenates graphs sharing entity/relation spaces (e.g. train + valid).
TemporalKG concat(const TemporalKG& a, const TemporalKG& b);

struct EntityRelationCounts {
  int num_entities = 0;
  int num_relations = 0;
};

// Tab-separated `s r o t [ignored...]`, one quadruple per line. Throws
// ParseError (with line number) or ValidationError.
TemporalKG load_quadruple_file(const std::filesystem::path& path, Granularity granularity,
                               std::optional<EntityRelationCounts> counts = std::nullopt);

// `num_entities<TAB>num_relations` sidecar.
EntityRelationCounts load_stat_file(const std::filesystem::path& path);

void write_quadruple_file(const std::filesystem::path& path, const TemporalKG& g);

struct Split {
  TemporalKG train;
  TemporalKG valid;
  TemporalKG test;
  std::vector<std::string> warnings;
};

// train: tick < first; valid: first <= tick < second; test: tick >= second.
Split chronological_split(const TemporalKG& g, Tick first, Tick second);

// Dataset directory in the common release layout: train.txt, valid.txt,
// test.txt and an optional stat.txt. Counts are shared across the three.
Split load_dataset_dir(const std::filesystem::path& dir, Granularity granularity);

struct InterEventTimes {
  std::optional<Tick> pair;  // since s and o last interacted with each other
  std::optional<Tick> min;   // since the more recent of s's or o's last event
};

// Last-interaction tables. Pair keys are unordered.
class HistoryTracker {
 public:
  // Snapshot ticks must be non-decreasing across calls.
  void observe(const Snapshot& snapshot);
  void observe_event(const Quadruple& q);

  // Requires every observed tick < q.tick.
  InterEventTimes inter_event_times(const Quadruple& q) const;

  std::optional<Tick> last_pair_time(int a, int b) const;
  std::optional<Tick> last_entity_time(int e) const;
  std::optional<Tick> latest_tick() const { return latest_; }
  std::optional<Tick> start_tick() const { return start_; }

  // Fallback elapsed time for pairs without history: t - start + 1 (1 if empty).
  Tick elapsed_since_start(Tick t) const;

  const std::unordered_map<std::uint64_t, Tick>& pair_table() const { return pair_; }
  const std::unordered_map<int, Tick>& entity_table() const { return entity_; }
  void restore(std::unordered_map<std::uint64_t, Tick> pair, std::unordered_map<int, Tick> entity,
               std::optional<Tick> start, std::optional<Tick> latest);

  static std::uint64_t pair_key(int a, int b);

 private:
  std::unordered_map<std::uint64_t, Tick> pair_;
  std::unordered_map<int, Tick> entity_;
  std::optional<Tick> start_;
  std::optional<Tick> latest_;
};

}  // namespace evokg
