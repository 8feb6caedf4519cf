#include <doctest.h>

#include <algorithm>

#include "turnkit/cli.hpp"
#include "turnkit/synth.hpp"
#include "turnkit/train.hpp"

using namespace turnkit;

namespace {

struct Fixture {
  SynthCorpus corpus;
  PreparedData data;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    SynthConfig sc;
    sc.n_sessions = 6;
    sc.sentences_per_session = 10;
    sc.seed = 5;
    Fixture x{generate(sc), {}};
    PrepareConfig pc;
    pc.split_ratio = {4, 1, 1};
    x.data = prepare_sessions(x.corpus.sessions, pc, 5, x.corpus.lexicon);
    return x;
  }();
  return f;
}

TrainConfig toy(FusionOption fusion, HeadKind head = HeadKind::ThreeWay) {
  TrainConfig t;
  t.fusion = fusion;
  t.head = head;
  t.learning_rate = 2e-3;
  t.epochs = 2;
  t.batch_size = 8;
  t.seed = 1;
  t.model.backbone_dim = 4;
  t.model.proj_dim = 4;
  t.model.embed_dim = 8;
  t.model.layers = 1;
  t.model.heads = 2;
  t.model.ff_dim = 16;
  t.model.max_len = 32;
  t.rank = 2;
  return t;
}

TrainResult run(const TrainConfig& t, const std::vector<Checkpoint>& init = {}) {
  const auto& f = fixture();
  return train(t, f.data.samples[0], f.data.samples[1], &f.corpus.frames, init);
}

// Paths whose values differ between two checkpoints of the same shape.
std::vector<std::string> changed(const Checkpoint& a, const Checkpoint& b) {
  std::vector<std::string> out;
  for (const auto& [path, m] : a.parameters)
    if ((m.array() != b.parameters.at(path).array()).any()) out.push_back(path);
  return out;
}

bool starts(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

}  // namespace

TEST_CASE("freeze policy table") {
  using F = FusionOption;
  CHECK(is_trainable(F::FusionOpt2, false, "head.weight"));
  CHECK_FALSE(is_trainable(F::FusionOpt2, false, "acoustic.projection.weight"));
  CHECK_FALSE(is_trainable(F::FusionOpt2, false, "text.token_embedding"));
  CHECK(is_trainable(F::FusionOpt1, false, "acoustic.projection.weight"));
  CHECK_FALSE(is_trainable(F::FusionOpt1, false, "acoustic.backbone.weight"));
  CHECK(is_trainable(F::FusionOpt1, false, "text.layers.0.attn.q.weight"));
  CHECK_FALSE(is_trainable(F::FusionOpt1, true, "text.layers.0.attn.q.weight"));
  CHECK(is_trainable(F::FusionOpt1, true, "text.layers.0.attn.q.lora_a"));
  CHECK(is_trainable(F::TextOnly, false, "text.final_norm.gain"));
  CHECK_FALSE(is_trainable(F::AcousticOnly, false, "acoustic.backbone.bias"));
  CHECK(is_trainable(F::AcousticOnly, false, "acoustic.projection.bias"));
  CHECK(is_trainable(F::TextOnly, false, "head.task2.weight"));
}

TEST_CASE("config validation") {
  auto t = toy(FusionOption::FusionOpt1);
  t.epochs = -1;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = toy(FusionOption::AcousticOnly);
  t.use_low_rank = true;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = toy(FusionOption::TextOnly);
  t.use_low_rank = true;
  t.rank = 8;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK_THROWS_AS(train(toy(FusionOption::TextOnly), {}, {}, nullptr), Error);
}

TEST_CASE("zero learning rate leaves parameters and validation loss unchanged") {
  auto t = toy(FusionOption::FusionOpt1);
  t.learning_rate = 0.0;
  const auto r = run(t);
  REQUIRE(r.log.size() == 2);
  CHECK(*r.log[0].val_loss == *r.log[1].val_loss);

  ModelConfig mc = r.checkpoint.config;
  TurnModel<float> fresh(mc, FusionOption::FusionOpt1, HeadKind::ThreeWay);
  Checkpoint init;
  store_parameters(fresh, init);
  CHECK(changed(init, r.checkpoint).empty());
}

TEST_CASE("FusionOpt2 trains only the fusion head") {
  auto text_cfg = toy(FusionOption::TextOnly);
  const auto text = run(text_cfg).checkpoint;
  const auto acoustic = run(toy(FusionOption::AcousticOnly)).checkpoint;

  auto t = toy(FusionOption::FusionOpt2);
  const auto trained = run(t, {acoustic, text}).checkpoint;
  t.learning_rate = 0.0;
  const auto untouched = run(t, {acoustic, text}).checkpoint;
  const auto diff = changed(trained, untouched);
  REQUIRE_FALSE(diff.empty());
  for (const auto& p : diff) CHECK_MESSAGE(starts(p, "head"), p);
  // Warm start copied the single-modality branches.
  for (const auto& [path, m] : text.parameters)
    if (starts(path, "text.")) CHECK((m.array() == trained.parameters.at(path).array()).all());
  for (const auto& [path, m] : acoustic.parameters)
    if (starts(path, "acoustic.")) CHECK((m.array() == trained.parameters.at(path).array()).all());
  CHECK(trained.trainable.size() == 2);
}

TEST_CASE("FusionOpt1 keeps the acoustic backbone fixed") {
  auto t = toy(FusionOption::FusionOpt1);
  const auto trained = run(t).checkpoint;
  t.learning_rate = 0.0;
  const auto untouched = run(t).checkpoint;
  const auto diff = changed(trained, untouched);
  bool projection = false, text = false;
  for (const auto& p : diff) {
    CHECK_FALSE(starts(p, "acoustic.backbone"));
    projection |= starts(p, "acoustic.projection");
    text |= starts(p, "text.");
  }
  CHECK(projection);
  CHECK(text);
}

TEST_CASE("low-rank training changes adapters only inside the text encoder") {
  auto t = toy(FusionOption::FusionOpt1);
  t.use_low_rank = true;
  const auto r = run(t);
  t.learning_rate = 0.0;
  const auto untouched = run(t).checkpoint;
  bool lora = false;
  for (const auto& p : changed(r.checkpoint, untouched)) {
    if (starts(p, "text.")) CHECK_MESSAGE(p.find(".lora_") != std::string::npos, p);
    lora |= p.find(".lora_") != std::string::npos;
  }
  CHECK(lora);
  CHECK(r.checkpoint.meta.trainable_fraction() < 1.0);
  CHECK(r.checkpoint.meta.trainable_fraction() > 0.0);
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
  auto t = toy(FusionOption::TextOnly, HeadKind::MultiTaskBinary);
  t.use_history = true;
  t.epochs = 3;
  const auto a = run(t), b = run(t);
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(*a.log[i].val_loss == *b.log[i].val_loss);
  }
  CHECK(checkpoint_bytes(a.checkpoint) == checkpoint_bytes(b.checkpoint));
  double best = 1e300;
  for (const auto& e : a.log) best = std::min(best, *e.val_loss);
  CHECK(*a.checkpoint.meta.val_loss == best);
}

TEST_CASE("scores carry three values") {
  const auto& f = fixture();
  const auto three = run(toy(FusionOption::FusionOpt1)).checkpoint;
  const auto recs = score_samples(three, f.data.samples[2], &f.corpus.frames);
  REQUIRE(recs.size() == f.data.samples[2].size());
  for (const auto& r : recs) CHECK(r.scores[0] + r.scores[1] + r.scores[2] == doctest::Approx(1.0).epsilon(1e-6));

  auto t = toy(FusionOption::FusionOpt1, HeadKind::MultiTaskBinary);
  t.use_history = true;
  const auto multi = run(t).checkpoint;
  for (const auto& r : score_samples(multi, f.data.samples[2], &f.corpus.frames))
    for (double s : r.scores) CHECK((s >= 0.0 && s <= 1.0));
  CHECK_THROWS_AS(score_samples(multi, f.data.samples[2], nullptr), Error);
}

TEST_CASE("model texts") {
  Sample s;
  s.tokens = {"so", "i"};
  s.history = {{false, {"hi"}}};
  CHECK(model_texts(s, HeadKind::ThreeWay, false) == std::vector<std::string>{"so i"});
  CHECK(model_texts(s, HeadKind::ThreeWay, true) == std::vector<std::string>{"<spkOther> hi. <spkSelf> so i."});
  const auto multi = model_texts(s, HeadKind::MultiTaskBinary, false);
  REQUIRE(multi.size() == 3);
  CHECK(multi[1] == "Identify if another speaker will backchannel at the end of the sentence: <spkSelf> so i.");
}
