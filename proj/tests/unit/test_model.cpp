#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "gcn/checkpoint.hpp"
#include "gcn/model.hpp"
#include "gcn/train.hpp"
#include "support/oracles.hpp"

namespace {

using gcn::AuxSchema;
using gcn::AuxSlot;
using gcn::Matrix;
using gcn::ModelParameters;
using gcn::Vocabulary;

AuxSchema categories(int n) {
  AuxSlot s{gcn::SlotKind::Category, {}};
  for (int i = 0; i < n; ++i) s.labels.push_back("cat" + std::to_string(i));
  return AuxSchema({s});
}

Vocabulary alphabet(int n) {
  std::vector<char32_t> cs;
  for (int i = 0; i < n; ++i) cs.push_back(static_cast<char32_t>(0x21 + i));
  return Vocabulary(cs);
}

TEST(ConcatInput, Layout) {
  gcn::ModelConfig cfg{3, 1, 4, 1};
  EXPECT_EQ(gcn::concat_input(gcn::one_hot(1, 3), {0.5}, cfg), (std::vector<double>{0, 1, 0, 0.5}));
  gcn::ModelConfig plain{3, 0, 4, 1};
  EXPECT_EQ(gcn::concat_input(gcn::one_hot(2, 3), {}, plain), gcn::one_hot(2, 3));
  EXPECT_THROW(gcn::concat_input(gcn::one_hot(0, 3), {1, 2}, cfg), gcn::ArgumentError);
}

TEST(InitModel, ShapesAndDeterminism) {
  auto v = alphabet(96);
  ASSERT_EQ(v.size(), 99);
  auto m = gcn::init_model(v, categories(5), 64, 2, 11);
  EXPECT_EQ(m.config.input_dim(), 104);
  EXPECT_EQ(m.layers[0].input.rows(), 256);
  EXPECT_EQ(m.layers[0].input.cols(), 104);
  EXPECT_EQ(m.layers[1].input.cols(), 64);
  EXPECT_EQ(m.layers[1].recurrent.cols(), 64);
  EXPECT_TRUE(m == gcn::init_model(v, categories(5), 64, 2, 11));
  EXPECT_FALSE(m == gcn::init_model(v, categories(5), 64, 2, 12));
  float lo = 1, hi = -1;
  m.visit([&](const auto& a) {
    lo = std::min(lo, a.minCoeff());
    hi = std::max(hi, a.maxCoeff());
  });
  EXPECT_GE(lo, -0.08f);
  EXPECT_LE(hi, 0.08f);
  EXPECT_THROW(gcn::init_model(v, AuxSchema{}, 0, 2, 1), gcn::ArgumentError);
}

TEST(Transplant, WidensWithZeroColumnsAndCopiesTheRest) {
  auto v = alphabet(96);
  auto src = gcn::init_model(v, AuxSchema{}, 64, 2, 3);
  auto t = gcn::transplant(src, categories(5));
  ASSERT_EQ(t.layers[0].input.cols(), 104);
  EXPECT_TRUE((t.layers[0].input.rightCols(5).array() == 0.0f).all());
  EXPECT_TRUE(t.layers[0].input.leftCols(99) == src.layers[0].input);
  EXPECT_TRUE(t.layers[0].recurrent == src.layers[0].recurrent);
  EXPECT_TRUE(t.layers[1].input == src.layers[1].input);
  EXPECT_TRUE(t.output.weight == src.output.weight);
  EXPECT_THROW(gcn::transplant(t, categories(2)), gcn::ArgumentError);
}

TEST(Transplant, LogitsIdenticalForAnyAux) {
  auto src = gcn::random_parameters<double>({7, 0, 8, 2}, 5, 0.5);
  auto t = gcn::transplant(src, 3);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(0, 6);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 10; ++trial) {
    auto s0 = gcn::zero_states<double>(src.config, 1);
    auto s1 = gcn::zero_states<double>(t.config, 1);
    Matrix<double> aux(3, 1);
    aux << u(rng), u(rng), u(rng);
    for (int step = 0; step < 12; ++step) {
      const int c = ch(rng);
      Matrix<double> a = gcn::forward_step(src, {{c}, Matrix<double>(0, 1)}, s0);
      Matrix<double> b = gcn::forward_step(t, {{c}, aux}, s1);
      EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto v = alphabet(20);
  auto schema = AuxSchema({AuxSlot{}, categories(3).slots()[0]});
  gcn::Checkpoint ck{gcn::init_model(v, schema, 16, 2, 9), v, schema, {}};
  ck.meta.seed = 9;
  ck.meta.steps = 42;
  ck.meta.extra["note"] = "x";
  const auto path = std::filesystem::temp_directory_path() / ("gcn_ck_" + std::to_string(::getpid()));
  gcn::save_checkpoint(ck, path);
  auto back = gcn::load_checkpoint(path);
  EXPECT_TRUE(back.model == ck.model);
  EXPECT_TRUE(back.vocab == v);
  EXPECT_EQ(back.schema, schema);
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(gcn::serialize_checkpoint(back), gcn::io::read_file(path));
  std::filesystem::remove(path);
}

TEST(Checkpoint, SizeAccounting) {
  auto v = alphabet(96);
  gcn::Checkpoint ck{gcn::init_model(v, categories(5), 64, 2, 1), v, categories(5), {}};
  const auto bytes = gcn::serialize_checkpoint(ck);
  // Independent count: per layer 4H*(in + H + 1), output V*(H + 1).
  const std::size_t H = 64, V = 99;
  const std::size_t params = 4 * H * (104 + H + 1) + 4 * H * (H + H + 1) + V * (H + 1);
  EXPECT_EQ(ck.model.parameter_count(), params);
  const std::uint32_t header = static_cast<unsigned char>(bytes[4]) | static_cast<unsigned char>(bytes[5]) << 8 |
                               static_cast<unsigned char>(bytes[6]) << 16 | static_cast<unsigned char>(bytes[7]) << 24;
  EXPECT_EQ(bytes.size(), 8 + header + 4 * params);
}

TEST(Checkpoint, CorruptionIsDetected) {
  auto v = alphabet(5);
  gcn::Checkpoint ck{gcn::init_model(v, categories(2), 4, 1, 1), v, categories(2), {}};
  const auto good = gcn::serialize_checkpoint(ck);

  auto magic = good;
  magic[3] = '2';
  EXPECT_THROW(gcn::parse_checkpoint(magic), gcn::CheckpointVersionError);

  // Every single-byte flip inside the header is caught.
  const std::size_t header_len = static_cast<unsigned char>(good[4]) | static_cast<unsigned char>(good[5]) << 8;
  for (std::size_t i = 8; i < 8 + header_len; ++i) {
    auto bad = good;
    bad[i] ^= 0x01;
    EXPECT_THROW(gcn::parse_checkpoint(bad), gcn::CheckpointError) << "byte " << i;
  }
  auto payload = good;
  payload.back() ^= 0x40;
  EXPECT_THROW(gcn::parse_checkpoint(payload), gcn::CheckpointHeaderError);
  EXPECT_THROW(gcn::parse_checkpoint(good.substr(0, good.size() - 3)), gcn::CheckpointTruncatedError);
  EXPECT_THROW(gcn::parse_checkpoint(good.substr(0, 6)), gcn::CheckpointTruncatedError);
  EXPECT_THROW(gcn::parse_checkpoint(good + "xx"), gcn::CheckpointShapeError);
  EXPECT_THROW(gcn::load_checkpoint("/nonexistent/gcn.ckpt"), gcn::CheckpointError);
}

std::vector<gcn::ReviewRecord> small_corpus() {
  const char* texts[] = {"good beer", "bad beer", "fine ale", "dark stout", "hoppy ipa", "flat lager"};
  std::vector<gcn::ReviewRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(oracle::review("u", "i", i, "cat" + std::to_string(i % 2), texts[i]));
  return recs;
}

gcn::TrainingConfig quick_config(std::size_t steps) {
  gcn::TrainingConfig cfg;
  cfg.max_steps = steps;
  cfg.stream_count = 3;
  cfg.segment_length = 5;
  return cfg;
}

TEST(Train, ZeroLearningRateLeavesParametersBitIdentical) {
  auto c = gcn::ReviewCollection::from_records(small_corpus());
  auto v = gcn::build_vocabulary(c);
  auto schema = gcn::schema_from_collection(c, {gcn::SlotKind::Category});
  auto stream = gcn::BatchStream::assemble(c, v, schema, 3, 5, 1);
  auto m = gcn::init_model(v, schema, 8, 2, 1);
  const auto before = m;
  auto cfg = quick_config(7);
  cfg.optimizer.learning_rate = 0.0;
  auto log = gcn::train(m, stream, cfg);
  EXPECT_EQ(log.steps.size(), 7u);
  EXPECT_TRUE(m == before);
}

TEST(Train, DeterministicAndLossDecreases) {
  auto c = gcn::ReviewCollection::from_records(small_corpus());
  auto v = gcn::build_vocabulary(c);
  auto stream = gcn::BatchStream::assemble(c, v, AuxSchema{}, 3, 5, 1);
  auto a = gcn::init_model(v, AuxSchema{}, 16, 1, 4), b = a;
  auto cfg = quick_config(400);
  cfg.optimizer.learning_rate = 1e-2;
  auto la = gcn::train(a, stream, cfg);
  auto lb = gcn::train(b, stream, cfg);
  EXPECT_TRUE(a == b);
  ASSERT_EQ(la.steps.size(), lb.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) EXPECT_EQ(la.steps[i].loss, lb.steps[i].loss);
  double last_epoch = 0;
  for (std::size_t i = la.steps.size() - 4; i < la.steps.size(); ++i) last_epoch += la.steps[i].loss / 4;
  EXPECT_LT(last_epoch, 0.25 * la.steps.front().loss);
}

TEST(Train, TransplantedFirstLossEqualsSource) {
  auto c = gcn::ReviewCollection::from_records(small_corpus());
  auto v = gcn::build_vocabulary(c);
  auto schema = gcn::schema_from_collection(c, {gcn::SlotKind::Rating, gcn::SlotKind::Category});
  auto src = gcn::init_model(v, AuxSchema{}, 8, 2, 2);
  auto gcn_model = gcn::transplant(src, schema);
  auto plain = gcn::BatchStream::assemble(c, v, AuxSchema{}, 3, 5, 8);
  auto cond = gcn::BatchStream::assemble(c, v, schema, 3, 5, 8);
  auto l0 = gcn::train(src, plain, quick_config(1));
  auto l1 = gcn::train(gcn_model, cond, quick_config(1));
  EXPECT_EQ(l0.steps[0].loss, l1.steps[0].loss);
}

TEST(Train, NonFiniteLossAborts) {
  auto c = gcn::ReviewCollection::from_records(small_corpus());
  auto v = gcn::build_vocabulary(c);
  auto stream = gcn::BatchStream::assemble(c, v, AuxSchema{}, 3, 5, 1);
  auto m = gcn::init_model(v, AuxSchema{}, 4, 1, 1);
  m.output.bias(0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(gcn::train(m, stream, quick_config(2)), gcn::NonFiniteLossError);
}

TEST(Train, HeldoutPatienceStopsEarly) {
  auto c = gcn::ReviewCollection::from_records(small_corpus());
  auto v = gcn::build_vocabulary(c);
  auto stream = gcn::BatchStream::assemble(c, v, AuxSchema{}, 3, 5, 1);
  auto m = gcn::init_model(v, AuxSchema{}, 4, 1, 1);
  auto cfg = quick_config(50);
  cfg.optimizer.learning_rate = 0.0;  // held-out NLL never improves after the first evaluation
  cfg.eval_every = 5;
  cfg.patience = 2;
  AuxSchema none;
  auto log = gcn::train(m, stream, cfg, &c, &v, &none);
  EXPECT_TRUE(log.stopped_early);
  EXPECT_EQ(log.evals.size(), 3u);
  EXPECT_EQ(log.steps.size(), 15u);
}

}  // namespace
