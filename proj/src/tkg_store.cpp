#include "evokg/tkg_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "evokg/errors.hpp"

namespace evokg {

namespace {

struct QuadHash {
  std::size_t operator()(const Quadruple& q) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(q.subject);
    h = h * 1000003u ^ static_cast<std::uint64_t>(q.relation);
    h = h * 1000003u ^ static_cast<std::uint64_t>(q.object);
    h = h * 1000003u ^ static_cast<std::uint64_t>(q.tick);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

std::string describe(const Quadruple& q) {
  std::ostringstream os;
  os << "(" << q.subject << ", " << q.relation << ", " << q.object << ", " << q.tick << ")";
  return os.str();
}

bool parse_int(std::string_view field, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

TemporalKG TemporalKG::build(std::vector<Quadruple> quads, int num_entities, int num_relations,
                             Granularity granularity) {
  int max_entity = -1;
  int max_relation = -1;
  for (const auto& q : quads) {
    if (q.subject < 0 || q.object < 0 || q.relation < 0)
      throw ValidationError("negative id in quadruple " + describe(q));
    if (q.tick < 0) throw ValidationError("negative timestamp in quadruple " + describe(q));
    max_entity = std::max({max_entity, q.subject, q.object});
    max_relation = std::max(max_relation, q.relation);
  }
  if (num_entities <= 0) num_entities = max_entity + 1;
  if (num_relations <= 0) num_relations = max_relation + 1;
  if (max_entity >= num_entities)
    throw ValidationError("entity id " + std::to_string(max_entity) + " >= num_entities " +
                          std::to_string(num_entities));
  if (max_relation >= num_relations)
    throw ValidationError("relation id " + std::to_string(max_relation) +
                          " >= num_relations " + std::to_string(num_relations));

  std::stable_sort(quads.begin(), quads.end(),
                   [](const Quadruple& a, const Quadruple& b) { return a.tick < b.tick; });
  std::unordered_set<Quadruple, QuadHash> seen;
  seen.reserve(quads.size());
  for (const auto& q : quads)
    if (!seen.insert(q).second) throw ValidationError("duplicate quadruple " + describe(q));

  TemporalKG g;
  g.quads_ = std::move(quads);
  g.num_entities_ = num_entities;
  g.num_relations_ = num_relations;
  g.granularity_ = granularity;
  return g;
}

std::optional<Tick> TemporalKG::first_tick() const {
  if (quads_.empty()) return std::nullopt;
  return quads_.front().tick;
}

std::optional<Tick> TemporalKG::last_tick() const {
  if (quads_.empty()) return std::nullopt;
  return quads_.back().tick;
}

TemporalKG TemporalKG::slice(std::vector<Quadruple> quads) const {
  return build(std::move(quads), num_entities_, num_relations_, granularity_);
}

std::vector<Snapshot> TemporalKG::snapshots() const {
  std::vector<Snapshot> out;
  std::size_t begin = 0;
  while (begin < quads_.size()) {
    std::size_t end = begin;
    while (end < quads_.size() && quads_[end].tick == quads_[begin].tick) ++end;
    out.push_back({quads_[begin].tick,
                   std::span<const Quadruple>(quads_.data() + begin, end - begin)});
    begin = end;
  }
  return out;
}

TemporalKG concat(const TemporalKG& a, const TemporalKG& b) {
  std::vector<Quadruple> all = a.quadruples();
  all.insert(all.end(), b.quadruples().begin(), b.quadruples().end());
  return TemporalKG::build(std::move(all), std::max(a.num_entities(), b.num_entities()),
                           std::max(a.num_relations(), b.num_relations()), a.granularity());
}

TemporalKG load_quadruple_file(const std::filesystem::path& path, Granularity granularity,
                               std::optional<EntityRelationCounts> counts) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file: " + path.string());
  if (granularity.units_per_tick <= 0) throw ValidationError("granularity must be positive");

  std::vector<Quadruple> quads;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::int64_t fields[4];
    std::size_t pos = 0;
    for (int f = 0; f < 4; ++f) {
      if (pos > line.size())
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 4 tab-separated integers",
                         line_no);
      std::size_t tab = line.find('\t', pos);
      std::string_view field(line.data() + pos,
                             (tab == std::string::npos ? line.size() : tab) - pos);
      if (!parse_int(field, fields[f]))
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": field " +
                             std::to_string(f + 1) + " is not an integer: '" +
                             std::string(field) + "'",
                         line_no);
      pos = tab == std::string::npos ? line.size() + 1 : tab + 1;
    }
    for (int f = 0; f < 4; ++f)
      if (fields[f] < 0)
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": negative id or timestamp");
    quads.push_back({static_cast<int>(fields[0]), static_cast<int>(fields[1]),
                     static_cast<int>(fields[2]), fields[3] / granularity.units_per_tick});
  }
  const auto c = counts.value_or(EntityRelationCounts{});
  return TemporalKG::build(std::move(quads), c.num_entities, c.num_relations, granularity);
}

EntityRelationCounts load_stat_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open stat file: " + path.string());
  EntityRelationCounts c;
  if (!(in >> c.num_entities >> c.num_relations))
    throw ParseError(path.string() + ":1: expected num_entities<TAB>num_relations", 1);
  if (c.num_entities <= 0 || c.num_relations <= 0)
    throw ValidationError(path.string() + ": counts must be positive");
  return c;
}

void write_quadruple_file(const std::filesystem::path& path, const TemporalKG& g) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& q : g.quadruples())
    out << q.subject << '\t' << q.relation << '\t' << q.object << '\t'
        << q.tick * g.granularity().units_per_tick << '\n';
}

Split chronological_split(const TemporalKG& g, Tick first, Tick second) {
  if (first > second) throw ContractViolation("split boundaries must satisfy first <= second");
  std::vector<Quadruple> train, valid, test;
  for (const auto& q : g.quadruples()) {
    if (q.tick < first)
      train.push_back(q);
    else if (q.tick < second)
      valid.push_back(q);
    else
      test.push_back(q);
  }
  Split s{g.slice(std::move(train)), g.slice(std::move(valid)), g.slice(std::move(test)), {}};
  if (s.train.empty()) s.warnings.emplace_back("training split is empty");
  if (s.valid.empty()) s.warnings.emplace_back("validation split is empty");
  if (s.test.empty()) s.warnings.emplace_back("test split is empty");
  return s;
}

Split load_dataset_dir(const std::filesystem::path& dir, Granularity granularity) {
  std::optional<EntityRelationCounts> counts;
  if (std::filesystem::exists(dir / "stat.txt")) counts = load_stat_file(dir / "stat.txt");

  auto load = [&](const char* name) {
    return load_quadruple_file(dir / name, granularity, counts);
  };
  Split s{load("train.txt"), load("valid.txt"), load("test.txt"), {}};
  if (!counts) {
    const int ne = std::max({s.train.num_entities(), s.valid.num_entities(), s.test.num_entities()});
    const int nr =
        std::max({s.train.num_relations(), s.valid.num_relations(), s.test.num_relations()});
    s.train = TemporalKG::build(s.train.quadruples(), ne, nr, granularity);
    s.valid = TemporalKG::build(s.valid.quadruples(), ne, nr, granularity);
    s.test = TemporalKG::build(s.test.quadruples(), ne, nr, granularity);
  }
  if (s.valid.empty()) s.warnings.emplace_back("validation split is empty");
  if (s.test.empty()) s.warnings.emplace_back("test split is empty");
  return s;
}

std::uint64_t HistoryTracker::pair_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(static_cast<std::uint32_t>(std::min(a, b)));
  const auto hi = static_cast<std::uint64_t>(static_cast<std::uint32_t>(std::max(a, b)));
  return (lo << 32) | hi;
}

void HistoryTracker::observe_event(const Quadruple& q) {
  if (latest_ && q.tick < *latest_)
    throw ContractViolation("observe: tick " + std::to_string(q.tick) +
                            " precedes already observed tick " + std::to_string(*latest_));
  if (!start_) start_ = q.tick;
  latest_ = q.tick;
  pair_[pair_key(q.subject, q.object)] = q.tick;
  entity_[q.subject] = q.tick;
  entity_[q.object] = q.tick;
}

void HistoryTracker::observe(const Snapshot& snapshot) {
  if (latest_ && snapshot.tick < *latest_)
    throw ContractViolation("observe: snapshot tick " + std::to_string(snapshot.tick) +
                            " precedes already observed tick " + std::to_string(*latest_));
  for (const auto& q : snapshot.events) {
    if (q.tick != snapshot.tick) throw ContractViolation("observe: event tick differs from snapshot");
    observe_event(q);
  }
}

InterEventTimes HistoryTracker::inter_event_times(const Quadruple& q) const {
  if (latest_ && *latest_ >= q.tick)
    throw ContractViolation("inter_event_times: history contains tick " +
                            std::to_string(*latest_) + " >= query tick " +
                            std::to_string(q.tick));
  InterEventTimes out;
  if (auto p = last_pair_time(q.subject, q.object)) out.pair = q.tick - *p;
  const auto ls = last_entity_time(q.subject);
  const auto lo = last_entity_time(q.object);
  if (ls || lo) out.min = q.tick - std::max(ls.value_or(0), lo.value_or(0));
  return out;
}

std::optional<Tick> HistoryTracker::last_pair_time(int a, int b) const {
  auto it = pair_.find(pair_key(a, b));
  if (it == pair_.end()) return std::nullopt;
  return it->second;
}

std::optional<Tick> HistoryTracker::last_entity_time(int e) const {
  auto it = entity_.find(e);
  if (it == entity_.end()) return std::nullopt;
  return it->second;
}

Tick HistoryTracker::elapsed_since_start(Tick t) const {
  return start_ ? t - *start_ + 1 : 1;
}

void HistoryTracker::restore(std::unordered_map<std::uint64_t, Tick> pair,
                             std::unordered_map<int, Tick> entity, std::optional<Tick> start,
                             std::optional<Tick> latest) {
  pair_ = std::move(pair);
  entity_ = std::move(entity);
  start_ = start;
  latest_ = latest;
}

}  // namespace evokg
