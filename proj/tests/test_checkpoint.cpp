#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "evokg/checkpoint.hpp"
#include "evokg/config.hpp"
#include "evokg/errors.hpp"
#include "evokg/evaluator.hpp"
#include "evokg/synthetic.hpp"
#include "evokg/trainer.hpp"
#include "test_util.hpp"

namespace evokg {
namespace {

using ad::Matrix;

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

ModelConfig config() {
  ModelConfig c;
  c.temporal_dim = 6;
  c.structural_dim = 4;
  c.layers = 2;
  c.blocks = 2;
  c.components = 3;
  c.alpha = 0.25;
  c.sigma_ceiling = INFINITY;
  c.seed = 21;
  c.max_epochs = 1;
  return c;
}

TEST(Checkpoint, ParametersAndConfigRoundTrip) {
  const auto split = period3_split();
  Model m(config(), 10, 2);
  Trainer(m).train_epoch(split.train, {1.0, 1.0});
  const auto bytes = serialize_checkpoint(m);
  EXPECT_EQ(bytes.rfind(kCheckpointMagic, 0), 0u);
  const auto loaded = deserialize_checkpoint(bytes);
  EXPECT_FALSE(loaded.state);
  EXPECT_EQ(loaded.model.num_entities(), 10);
  EXPECT_EQ(loaded.model.num_relations(), 2);
  EXPECT_EQ(to_model_config_text(loaded.model.config()), to_model_config_text(m.config()));
  const auto a = m.parameters(), b = loaded.model.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(bit_equal(a[i].var.value(), b[i].var.value())) << a[i].name;
  }
  EXPECT_EQ(loaded.model.params().time.alpha, 0.25);
  EXPECT_EQ(serialize_checkpoint(loaded.model), bytes);
}

TEST(Checkpoint, StateRoundTrip) {
  const auto split = period3_split();
  const Model m(config(), 10, 2);
  auto state = m.initial_state();
  propagate(m, state, split.train);
  const auto bytes = serialize_checkpoint(m, &state);
  const auto loaded = deserialize_checkpoint(bytes);
  ASSERT_TRUE(loaded.state);
  const auto& s = *loaded.state;
  EXPECT_TRUE(bit_equal(s.entity_temporal.values(), state.entity_temporal.values()));
  EXPECT_TRUE(bit_equal(s.entity_structural.values(), state.entity_structural.values()));
  EXPECT_TRUE(bit_equal(s.relation_temporal.values(), state.relation_temporal.values()));
  EXPECT_TRUE(bit_equal(s.relation_structural.values(), state.relation_structural.values()));
  EXPECT_EQ(s.seen_ids, state.seen_ids);
  EXPECT_EQ(s.seen, state.seen);
  EXPECT_EQ(s.tracker.pair_table(), state.tracker.pair_table());
  EXPECT_EQ(s.tracker.entity_table(), state.tracker.entity_table());
  EXPECT_EQ(s.tracker.latest_tick(), state.tracker.latest_tick());
  EXPECT_EQ(s.tracker.start_tick(), state.tracker.start_tick());
  EXPECT_EQ(serialize_checkpoint(loaded.model, &s), bytes);

  // A restored state scores exactly like the original.
  const auto q = split.valid.quadruples().front();
  EXPECT_TRUE(bit_equal(m.score_objects(state, q.subject, q.relation, q.tick, true),
                        loaded.model.score_objects(s, q.subject, q.relation, q.tick, true)));
}

TEST(Checkpoint, FileRoundTrip) {
  const Model m(config(), 4, 1);
  const auto dir = testing::fresh_dir("checkpoint_file");
  save_checkpoint(dir / "c.bin", m);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(dir / "c.bin").model), serialize_checkpoint(m));
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), ValidationError);
}

TEST(Checkpoint, CorruptInputThrows) {
  const Model m(config(), 4, 1);
  const auto bytes = serialize_checkpoint(m);
  EXPECT_THROW(deserialize_checkpoint(""), ValidationError);
  EXPECT_THROW(deserialize_checkpoint("NOT-A-CHECKPOINT\n" + bytes), ValidationError);
  for (std::size_t cut : {bytes.size() / 3, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), ValidationError) << cut;
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), ValidationError);
}

}  // namespace
}  // namespace evokg
