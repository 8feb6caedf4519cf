#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "turnkit/model/checkpoint.hpp"
#include "turnkit/model/model.hpp"
#include "turnkit/model/tokenizer.hpp"

using namespace turnkit;
using turnkit::testing::check_gradients;
using turnkit::testing::toy_config;

namespace {

Matrix<double> random_frames(int t, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix<double> m(t, d);
  fill_normal(m, 1.0, rng);
  return m;
}

}  // namespace

TEST_CASE("acoustic pooling and projection") {
  Linear<double> proj(3, 2);
  std::mt19937_64 rng(1);
  proj.init(rng);
  fill_normal(proj.bias.value, 1.0, rng);

  const Matrix<double> one = random_frames(1, 3, 2);
  CHECK((encode_acoustic(one, proj) - proj.apply(one.row(0).transpose())).norm() < 1e-12);

  Matrix<double> same(5, 3);
  same.rowwise() = one.row(0);
  CHECK((encode_acoustic(same, proj) - proj.apply(one.row(0).transpose())).norm() < 1e-12);

  // Independent oracle: explicit sums.
  const Matrix<double> f = random_frames(4, 3, 3);
  Vector<double> expect(2);
  for (int o = 0; o < 2; ++o) {
    double acc = proj.bias.value(o);
    for (int i = 0; i < 3; ++i) {
      double mean = 0;
      for (int t = 0; t < 4; ++t) mean += f(t, i);
      acc += proj.weight.value(o, i) * mean / 4.0;
    }
    expect(o) = acc;
  }
  CHECK((encode_acoustic(f, proj) - expect).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(encode_acoustic(Matrix<double>(0, 3), proj), Error);
}

TEST_CASE("text encoder reads out the last position") {
  auto cfg = toy_config(10);
  TextEncoder<double> enc(cfg.text());
  std::mt19937_64 rng(4);
  enc.init(rng);
  const std::vector<int> abc = {3, 5, 7};
  typename TextEncoder<double>::Cache c;
  const auto last = enc.forward(abc, c);
  const auto full = enc.hidden_states(abc);
  CHECK((last - full.row(2).transpose()).cwiseAbs().maxCoeff() < 1e-6);

  const std::vector<int> single = {3};
  CHECK((enc.forward(single, c) - enc.hidden_states(single).row(0).transpose()).norm() < 1e-12);

  // Causality: the prefix states do not depend on later tokens.
  const std::vector<int> abcd = {3, 5, 7, 2};
  CHECK((enc.hidden_states(abcd).topRows(3) - full).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("text encoder keeps the last max_len tokens") {
  auto cfg = toy_config(10);
  cfg.max_len = 4;
  TextEncoder<double> enc(cfg.text());
  std::mt19937_64 rng(4);
  enc.init(rng);
  const std::vector<int> longer = {1, 2, 3, 4, 5, 6};
  const std::vector<int> tail = {3, 4, 5, 6};
  typename TextEncoder<double>::Cache c1, c2;
  CHECK((enc.forward(longer, c1) - enc.forward(tail, c2)).norm() == 0.0);
}

TEST_CASE("three-way classification examples") {
  Linear<double> head(2, 3);
  Vector<double> e(2);
  e << 1, 0;
  auto c = classify(e, head);
  for (int k = 0; k < 3; ++k) CHECK(c.posteriors(k) == doctest::Approx(1.0 / 3));

  head.weight.value << 1, 0, 0, 1, 0, 0;
  c = classify(e, head);
  CHECK(c.logits(0) == doctest::Approx(1.0));
  CHECK(c.posteriors(0) == doctest::Approx(0.5761).epsilon(1e-4));
  CHECK(c.posteriors(1) == doctest::Approx(0.2119).epsilon(1e-3));
  CHECK(c.posteriors(2) == doctest::Approx(0.2119).epsilon(1e-3));

  head.bias.value.setConstant(5.0);
  const auto shifted = classify(e, head);
  CHECK((shifted.posteriors - c.posteriors).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fusion concatenates then applies the affine map") {
  Linear<double> head(5, 3);
  std::mt19937_64 rng(5);
  head.init(rng);
  fill_normal(head.bias.value, 1.0, rng);
  Vector<double> ea(2), el(3);
  ea << 0.5, -1.0;
  el << 2.0, 0.25, -0.75;
  Vector<double> expect(3);
  for (int o = 0; o < 3; ++o) {
    expect(o) = head.bias.value(o);
    for (int i = 0; i < 2; ++i) expect(o) += head.weight.value(o, i) * ea(i);
    for (int i = 0; i < 3; ++i) expect(o) += head.weight.value(o, 2 + i) * el(i);
  }
  CHECK((fuse(ea, el, head) - expect).cwiseAbs().maxCoeff() < 1e-6);

  const Vector<double> zero = Vector<double>::Zero(3);
  const Vector<double> acoustic_only = head.weight.value.leftCols(2) * ea + head.bias.value;
  CHECK((fuse(ea, zero, head) - acoustic_only).norm() < 1e-12);
  CHECK_THROWS_AS(fuse(ea, Vector<double>(), head), Error);
  CHECK_THROWS_AS(fuse(ea, Vector<double>::Zero(4).eval(), head), Error);
}

TEST_CASE("model head input dimension is the sum of branch widths") {
  const auto cfg = toy_config(12);
  TurnModel<double> m(cfg, FusionOption::FusionOpt1, HeadKind::ThreeWay);
  CHECK(m.three_way_head().in_dim() == cfg.proj_dim + cfg.embed_dim);
  TurnModel<double> a(cfg, FusionOption::AcousticOnly, HeadKind::ThreeWay);
  CHECK(a.three_way_head().in_dim() == cfg.proj_dim);
  CHECK_FALSE(a.has_text());
}

TEST_CASE("losses") {
  CHECK(binary_cross_entropy(0.5, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(binary_cross_entropy(0.5, 0.0) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(binary_cross_entropy(1.0, 1.0) < 1e-6);
  CHECK(binary_cross_entropy(0.0, 0.0) < 1e-6);
  CHECK(std::isfinite(binary_cross_entropy(0.0, 1.0)));
  CHECK(binary_cross_entropy_logit_grad(0.0, 1.0) == 0.0);

  // Per-task BCE values 0.1, 0.2, 0.3 -> sum 0.6.
  std::array<std::vector<double>, 3> probs, targets;
  for (int s = 0; s < 3; ++s) {
    const double bce = 0.1 * (s + 1);
    probs[s] = {std::exp(-bce)};
    targets[s] = {1.0};
  }
  CHECK(multitask_loss(probs, targets) == doctest::Approx(0.6));

  Vector<double> logits(3);
  logits << 2.0, -1.0, 0.5;
  const double lse = std::log(std::exp(2.0) + std::exp(-1.0) + std::exp(0.5));
  CHECK(cross_entropy(logits, 2) == doctest::Approx(lse - 0.5));
}

TEST_CASE("multi-task routing and gradient isolation") {
  const auto cfg = toy_config(12);
  TurnModel<double> m(cfg, FusionOption::TextOnly, HeadKind::MultiTaskBinary);
  const std::vector<int> ids = {4, 5, 6};
  std::array<std::vector<ModelView<double>>, 3> batches;
  batches[1] = {{nullptr, ids}, {nullptr, ids}};
  const auto out = m.multitask_forward(batches);
  CHECK(out[0].empty());
  CHECK(out[1].size() == 2);
  CHECK(out[2].empty());

  std::array<std::vector<int>, 3> targets;
  targets[1] = {1, 0};
  m.zero_grad();
  m.multitask_loss(batches, targets, true);
  double other = 0.0, own = 0.0;
  m.visit([&](const std::string& path, const Parameter<double>& p) {
    if (path.rfind("head.task1", 0) == 0) own += p.grad.norm();
    if (path.rfind("head.task0", 0) == 0 || path.rfind("head.task2", 0) == 0) other += p.grad.norm();
  });
  CHECK(other == 0.0);
  CHECK(own > 0.0);

  // Same text, different instruction index: independent heads.
  CHECK(m.task_probability(0, {nullptr, ids}) != m.task_probability(2, {nullptr, ids}));
}

TEST_CASE("low-rank adapters start as an exact no-op") {
  auto cfg = toy_config(12);
  TurnModel<double> base(cfg, FusionOption::TextOnly, HeadKind::ThreeWay);
  TurnModel<double> adapted = base;
  adapted.apply_low_rank_adapters(2);
  const std::vector<int> ids = {1, 4, 9, 2};
  const auto a = base.classify_view({nullptr, ids}).logits;
  const auto b = adapted.classify_view({nullptr, ids}).logits;
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  AdaptedLinear<double> lin(8, 8);
  std::mt19937_64 rng(0);
  lin.add_adapter(2, rng);
  CHECK(lin.lora_a.size() + lin.lora_b.size() == 32);
  AdaptedLinear<double> bad(8, 8);
  CHECK_THROWS_AS(bad.add_adapter(8, rng), Error);
  CHECK_THROWS_AS(bad.add_adapter(0, rng), Error);
}

TEST_CASE("analytic gradients match central differences") {
  const std::vector<int> ids1 = {1, 4, 9, 2}, ids2 = {3, 3, 7}, ids3 = {5};
  const Matrix<double> f1 = random_frames(5, 3, 11), f2 = random_frames(2, 3, 12), f3 = random_frames(3, 3, 13);
  const std::vector<ModelView<double>> views = {{&f1, ids1}, {&f2, ids2}, {&f3, ids3}};
  const std::vector<int> labels = {0, 2, 1};

  for (auto fusion : {FusionOption::AcousticOnly, FusionOption::TextOnly, FusionOption::FusionOpt1}) {
    for (int rank : {0, 2}) {
      if (rank > 0 && fusion == FusionOption::AcousticOnly) continue;
      auto cfg = toy_config(12, 21);
      cfg.lora_rank = rank;
      TurnModel<double> m(cfg, fusion, HeadKind::ThreeWay);
      // Move adapters away from zero so their gradients are exercised fully.
      std::mt19937_64 rng(9);
      m.visit([&](const std::string& path, Parameter<double>& p) {
        if (path.find("lora_b") != std::string::npos) fill_normal(p.value, 0.3, rng);
      });
      auto loss = [&](bool g) { return m.three_way_loss(views, labels, g); };
      const auto r = check_gradients(m, loss, [](const std::string& p) { return p.rfind("acoustic.backbone", 0) != 0; });
      CAPTURE(fusion_name(fusion));
      CAPTURE(rank);
      CAPTURE(r.worst_path);
      CHECK(r.checked > 0);
      CHECK(r.worst <= 1.0);
    }
  }

  auto cfg = toy_config(12, 22);
  TurnModel<double> mt(cfg, FusionOption::FusionOpt1, HeadKind::MultiTaskBinary);
  std::array<std::vector<ModelView<double>>, 3> batches = {views, views, views};
  std::array<std::vector<int>, 3> targets = {std::vector<int>{1, 0, 0}, {0, 0, 1}, {0, 1, 0}};
  auto loss = [&](bool g) { return mt.multitask_loss(batches, targets, g); };
  const auto r = check_gradients(mt, loss, [](const std::string& p) { return p.rfind("acoustic.backbone", 0) != 0; });
  CAPTURE(r.worst_path);
  CHECK(r.worst <= 1.0);
}

TEST_CASE("vocabulary") {
  const auto toks = Vocabulary::tokenize("Identify if x: <spkSelf> so i think.");
  CHECK(toks == std::vector<std::string>{"Identify", "if", "x", ":", "<spkSelf>", "so", "i", "think", "."});
  const auto v = Vocabulary::build({"hello there.", "w1 w2"});
  CHECK(v.id("hello") != v.unknown_id());
  CHECK(v.id("never-seen") == v.unknown_id());
  CHECK(v.id("<spkOther>") != v.unknown_id());
  CHECK(Vocabulary(v.tokens()).encode("hello w2 zzz") == v.encode("hello w2 zzz"));
}

TEST_CASE("checkpoint round trip preserves outputs exactly") {
  auto cfg = toy_config(12, 3);
  cfg.lora_rank = 2;
  TurnModel<float> m(cfg, FusionOption::FusionOpt1, HeadKind::MultiTaskBinary);
  Checkpoint ck;
  store_parameters(m, ck);
  ck.vocabulary = Vocabulary().tokens();
  ck.use_history = true;
  ck.trainable = {"head.task0.weight"};
  ck.meta.epoch = 3;
  ck.meta.val_loss = 0.25;

  const auto bytes = checkpoint_bytes(ck);
  CHECK(bytes.substr(0, 8) == std::string("TURNKIT\x01", 8));
  const auto back = checkpoint_from_bytes(bytes);
  CHECK(checkpoint_bytes(back) == bytes);
  CHECK(back.use_history);
  CHECK(back.meta.epoch == 3);
  CHECK(back.config.lora_rank == 2);

  const auto m2 = model_from_checkpoint<float>(back);
  Matrix<float> f(2, 3);
  f << 1, 2, 3, 4, 5, 6;
  const std::vector<int> ids = {1, 2, 3};
  for (int s = 0; s < 3; ++s) CHECK(m.task_probability(s, {&f, ids}) == m2.task_probability(s, {&f, ids}));

  const auto path = std::filesystem::temp_directory_path() / "turnkit_test_ckpt.bin";
  save_checkpoint(ck, path);
  CHECK(checkpoint_bytes(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(checkpoint_from_bytes("NOTACKPT0000"), Error);
  auto truncated = bytes.substr(0, bytes.size() - 4);
  CHECK_THROWS_AS(checkpoint_from_bytes(truncated), Error);
  Checkpoint missing = ck;
  missing.parameters.erase("head.task1.bias");
  CHECK_THROWS_AS(model_from_checkpoint<float>(missing), Error);
}
