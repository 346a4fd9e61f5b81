#include "evokg/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evokg/config.hpp"
#include "evokg/errors.hpp"

namespace evokg {

namespace {

class Writer {
 public:
  void line(const std::string& s) { out_ += s + '\n'; }
  template <typename T>
  void raw(const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void matrix(const ad::Matrix& m) {
    raw<std::int64_t>(m.rows());
    raw<std::int64_t>(m.cols());
    out_.append(reinterpret_cast<const char*>(m.data()),
                static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void text(const std::string& s) {
    raw<std::uint64_t>(s.size());
    out_ += s;
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::string line() {
    const auto end = s_.find('\n', pos_);
    if (end == std::string::npos) fail("unterminated header line");
    std::string out = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }
  void expect(const std::string& want) {
    if (line() != want) fail("expected '" + want + "'");
  }
  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  ad::Matrix matrix() {
    const auto rows = raw<std::int64_t>();
    const auto cols = raw<std::int64_t>();
    if (rows < 0 || cols < 0) fail("negative shape");
    ad::Matrix m(rows, cols);
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    need(bytes);
    std::memcpy(m.data(), s_.data() + pos_, bytes);
    pos_ += bytes;
    return m;
  }
  std::string text() {
    const auto n = raw<std::uint64_t>();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }
  [[noreturn]] static void fail(const std::string& why) {
    throw ValidationError("checkpoint: " + why);
  }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) fail("truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

void write_optional_tick(Writer& w, const std::optional<Tick>& t) {
  w.raw<std::uint8_t>(t ? 1 : 0);
  w.raw<std::int64_t>(t.value_or(0));
}

std::optional<Tick> read_optional_tick(Reader& r) {
  const auto present = r.raw<std::uint8_t>();
  const auto v = r.raw<std::int64_t>();
  return present ? std::optional<Tick>(v) : std::nullopt;
}

}  // namespace

std::string serialize_checkpoint(const Model& model, const RecurrentState* state) {
  Writer w;
  w.line(kCheckpointMagic);
  w.text(to_model_config_text(model.config()));
  w.raw<std::int32_t>(model.num_entities());
  w.raw<std::int32_t>(model.num_relations());
  const auto params = model.parameters();
  w.raw<std::uint64_t>(params.size());
  for (const auto& p : params) {
    w.text(p.name);
    w.matrix(p.var.value());
  }
  w.raw<std::uint8_t>(state ? 1 : 0);
  if (state) {
    w.matrix(state->entity_temporal.values());
    w.matrix(state->entity_structural.values());
    w.matrix(state->relation_temporal.values());
    w.matrix(state->relation_structural.values());
    w.raw<std::uint64_t>(state->seen_ids.size());
    for (int e : state->seen_ids) w.raw<std::int32_t>(e);
    const auto& t = state->tracker;
    write_optional_tick(w, t.start_tick());
    write_optional_tick(w, t.latest_tick());
    std::vector<std::pair<std::uint64_t, Tick>> pairs(t.pair_table().begin(),
                                                      t.pair_table().end());
    std::sort(pairs.begin(), pairs.end());
    w.raw<std::uint64_t>(pairs.size());
    for (const auto& [k, v] : pairs) {
      w.raw<std::uint64_t>(k);
      w.raw<std::int64_t>(v);
    }
    std::vector<std::pair<int, Tick>> ents(t.entity_table().begin(), t.entity_table().end());
    std::sort(ents.begin(), ents.end());
    w.raw<std::uint64_t>(ents.size());
    for (const auto& [k, v] : ents) {
      w.raw<std::int32_t>(k);
      w.raw<std::int64_t>(v);
    }
  }
  return w.take();
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const RecurrentState* state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto bytes = serialize_checkpoint(model, state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedCheckpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.line() != kCheckpointMagic) Reader::fail("bad magic or unsupported version");
  ModelConfig cfg;
  try {
    cfg = parse_model_config_text(r.text());
  } catch (const std::invalid_argument& e) {
    Reader::fail(e.what());
  }
  const auto ne = r.raw<std::int32_t>();
  const auto nr = r.raw<std::int32_t>();
  if (ne < 1 || nr < 1) Reader::fail("bad entity/relation counts");
  LoadedCheckpoint out{Model(cfg, ne, nr), std::nullopt};
  auto params = out.model.parameters();
  if (r.raw<std::uint64_t>() != params.size()) Reader::fail("parameter count mismatch");
  for (auto& p : params) {
    if (r.text() != p.name) Reader::fail("unexpected parameter, wanted " + p.name);
    auto m = r.matrix();
    if (m.rows() != p.var.rows() || m.cols() != p.var.cols())
      Reader::fail("shape mismatch for " + p.name);
    p.var.mutable_value() = std::move(m);
  }
  if (r.raw<std::uint8_t>()) {
    auto st = out.model.initial_state();
    auto restore = [&](StateTable& t, const char* what) {
      auto m = r.matrix();
      if (m.rows() != t.dim() || m.cols() != t.count())
        Reader::fail(std::string("state shape mismatch for ") + what);
      t.restore(std::move(m));
    };
    restore(st.entity_temporal, "entity_temporal");
    restore(st.entity_structural, "entity_structural");
    restore(st.relation_temporal, "relation_temporal");
    restore(st.relation_structural, "relation_structural");
    const auto nseen = r.raw<std::uint64_t>();
    std::vector<int> seen;
    for (std::uint64_t i = 0; i < nseen; ++i) {
      const auto e = r.raw<std::int32_t>();
      if (e < 0 || e >= ne) Reader::fail("seen entity out of range");
      seen.push_back(e);
    }
    st.mark_seen(seen);
    const auto start = read_optional_tick(r);
    const auto latest = read_optional_tick(r);
    std::unordered_map<std::uint64_t, Tick> pairs;
    const auto np = r.raw<std::uint64_t>();
    for (std::uint64_t i = 0; i < np; ++i) {
      const auto k = r.raw<std::uint64_t>();
      pairs[k] = r.raw<std::int64_t>();
    }
    std::unordered_map<int, Tick> ents;
    const auto nent = r.raw<std::uint64_t>();
    for (std::uint64_t i = 0; i < nent; ++i) {
      const auto k = r.raw<std::int32_t>();
      ents[k] = r.raw<std::int64_t>();
    }
    st.tracker.restore(std::move(pairs), std::move(ents), start, latest);
    out.state = std::move(st);
  }
  if (!r.done()) Reader::fail("trailing bytes");
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace evokg
