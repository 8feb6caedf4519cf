#include "turnkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "turnkit/instructions.hpp"

namespace turnkit {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate", "must be a non-negative finite number");
  if (epochs < 1) throw ConfigError("epochs", "must be positive");
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (history_len < 0) throw ConfigError("history_len", "must be non-negative");
  if (use_low_rank) {
    if (!uses_text(fusion)) throw ConfigError("low_rank", "needs a text branch");
    if (rank < 1 || rank >= model.embed_dim) throw ConfigError("rank", "must be in [1, embed_dim)");
  }
  if (model.proj_dim < 1) throw ConfigError("proj_dim", "must be positive");
  if (model.backbone_dim < 0) throw ConfigError("backbone_dim", "must be non-negative");
  if (model.embed_dim < 1) throw ConfigError("embed_dim", "must be positive");
  if (model.layers < 0) throw ConfigError("layers", "must be non-negative");
  if (model.heads < 1 || model.embed_dim % model.heads != 0)
    throw ConfigError("heads", "must be positive and divide embed_dim");
  if (model.ff_dim < 1) throw ConfigError("ff_dim", "must be positive");
  if (model.max_len < 1) throw ConfigError("max_len", "must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
}

bool is_trainable(FusionOption fusion, bool low_rank, const std::string& path) {
  auto starts = [&](const char* p) { return path.rfind(p, 0) == 0; };
  if (starts("head.") || path == "head") return true;
  if (fusion == FusionOption::FusionOpt2) return false;
  if (starts("acoustic.backbone.")) return false;
  if (starts("acoustic.projection.")) return fusion == FusionOption::AcousticOnly || fusion == FusionOption::FusionOpt1;
  if (starts("text.")) {
    if (fusion == FusionOption::AcousticOnly) return false;
    return !low_rank || path.find(".lora_") != std::string::npos;
  }
  return false;
}

bool FreezePolicy::any_with_prefix(const std::string& prefix) const {
  auto it = trainable_.lower_bound(prefix);
  return it != trainable_.end() && it->rfind(prefix, 0) == 0;
}

std::vector<std::string> model_texts(const Sample& s, HeadKind head, bool use_history) {
  static const std::vector<HistoryEntry> kNone;
  const auto& history = use_history ? s.history : kNone;
  if (head == HeadKind::ThreeWay) {
    if (!use_history) {
      std::string t;
      for (const auto& w : s.tokens) t += (t.empty() ? "" : " ") + w;
      return {t};
    }
    return {compose_context(history, s)};
  }
  std::vector<std::string> out;
  for (int k = 0; k < kNumClasses; ++k) out.push_back(compose_with_history(InstructionIndex(k), history, s));
  return out;
}

namespace {

std::vector<HistoryEntry> clip_history(const std::vector<HistoryEntry>& h, int len) {
  if (static_cast<int>(h.size()) <= len) return h;
  return {h.end() - len, h.end()};
}

Sample with_history_len(const Sample& s, int len) {
  Sample c = s;
  c.history = clip_history(s.history, len);
  return c;
}

}  // namespace

std::vector<EncodedExample> encode_samples(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                           HeadKind head, bool use_history, const FrameSource* frames) {
  std::vector<EncodedExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    EncodedExample e;
    e.sample_id = s.sample_id;
    e.label = to_int(s.label);
    if (frames) e.frames = frames->frames(s.acoustic_ref);
    for (const auto& t : model_texts(s, head, use_history)) e.ids.push_back(vocab.encode(t));
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

using Model = TurnModel<float>;

double batch_loss(Model& model, const std::vector<EncodedExample>& ex, std::span<const std::size_t> idx, bool grad) {
  if (model.head_kind() == HeadKind::ThreeWay) {
    std::vector<ModelView<float>> views;
    std::vector<int> labels;
    for (auto i : idx) {
      views.push_back({ex[i].frames.get(), ex[i].ids[0]});
      labels.push_back(ex[i].label);
    }
    return model.three_way_loss(views, labels, grad);
  }
  std::array<std::vector<ModelView<float>>, 3> views;
  std::array<std::vector<int>, 3> targets;
  for (int s = 0; s < 3; ++s)
    for (auto i : idx) {
      views[s].push_back({ex[i].frames.get(), ex[i].ids[s]});
      targets[s].push_back(ex[i].label == s ? 1 : 0);
    }
  return model.multitask_loss(views, targets, grad);
}

void warm_start(Model& model, const std::vector<Checkpoint>& init) {
  model.visit([&](const std::string& path, Parameter<float>& p) {
    if (path.rfind("head", 0) == 0) return;
    for (const auto& ck : init) {
      auto it = ck.parameters.find(path);
      if (it == ck.parameters.end()) continue;
      if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
        throw Error("warm start: parameter " + path + " has a different shape in the initial checkpoint");
      p.value = it->second;
    }
  });
}

}  // namespace

double evaluate_loss(Model& model, const std::vector<EncodedExample>& examples) {
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return batch_loss(model, examples, idx, false);
}

TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& val_samples, const FrameSource* frames,
                  const std::vector<Checkpoint>& init) {
  config.validate();
  if (train_samples.empty()) throw Error("train: empty training set");
  if (uses_acoustic(config.fusion) && !frames) throw Error("train: acoustic features required for this fusion mode");
  TrainResult result;

  ModelConfig mc = config.model;
  mc.seed = config.seed;
  mc.lora_rank = config.use_low_rank ? config.rank : 0;

  // Vocabulary: from an initial text branch if given, else from training texts.
  const Checkpoint* text_init = nullptr;
  for (const auto& ck : init)
    if (uses_text(ck.fusion)) text_init = &ck;
  Vocabulary vocab;
  if (text_init && uses_text(config.fusion)) {
    vocab = Vocabulary(text_init->vocabulary);
    const auto& tc = text_init->config;
    mc.embed_dim = tc.embed_dim;
    mc.layers = tc.layers;
    mc.heads = tc.heads;
    mc.ff_dim = tc.ff_dim;
    mc.max_len = tc.max_len;
    if (tc.lora_rank > 0) mc.lora_rank = tc.lora_rank;
  } else {
    std::vector<std::string> texts;
    for (const auto& s : train_samples)
      for (auto& t : model_texts(with_history_len(s, config.history_len), config.head, config.use_history))
        texts.push_back(std::move(t));
    vocab = Vocabulary::build(texts);
  }
  mc.vocab_size = vocab.size();

  auto clipped = [&](const std::vector<Sample>& v) {
    std::vector<Sample> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(with_history_len(s, config.history_len));
    return out;
  };
  const FrameSource* fs_ptr = uses_acoustic(config.fusion) ? frames : nullptr;
  const auto train_ex = encode_samples(clipped(train_samples), vocab, config.head, config.use_history, fs_ptr);
  const auto val_ex = encode_samples(clipped(val_samples), vocab, config.head, config.use_history, fs_ptr);
  if (fs_ptr) {
    mc.frame_dim = static_cast<int>(train_ex.front().frames->cols());
    for (const auto& ck : init)
      if (uses_acoustic(ck.fusion)) {
        mc.backbone_dim = ck.config.backbone_dim;
        mc.proj_dim = ck.config.proj_dim;
      }
  }

  Model model(mc, config.fusion, config.head);
  warm_start(model, init);
  const bool low_rank = model.config().lora_rank > 0;
  const auto policy = FreezePolicy::for_model(model, low_rank);
  model.acoustic_grad = policy.any_with_prefix("acoustic.");
  model.text_grad = policy.any_with_prefix("text.");

  Checkpoint base;
  base.use_history = config.use_history;
  base.history_len = config.history_len;
  base.vocabulary = vocab.tokens();
  base.trainable = policy.paths();
  base.meta.seed = config.seed;
  base.meta.total_parameters = model.parameter_count();
  model.visit([&](const std::string& path, const Parameter<float>& p) {
    if (policy.trainable(path)) base.meta.trainable_parameters += static_cast<std::size_t>(p.size());
  });
  if (val_ex.empty()) result.warnings.push_back("empty validation set; selecting the epoch with the lowest training loss");

  Adam<float> adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(train_ex.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<double> best;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b, std::min<std::size_t>(config.batch_size, order.size() - b));
      model.zero_grad();
      const double loss = batch_loss(model, train_ex, idx, true);
      if (!std::isfinite(loss))
        throw Error("non-finite training loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps + 1) +
                    "; try a lower learning rate");
      adam.step(model, policy);
      sum += loss;
      ++steps;
    }
    EpochLog log{epoch, sum / static_cast<double>(steps), std::nullopt};
    if (!val_ex.empty()) {
      log.val_loss = evaluate_loss(model, val_ex);
      if (!std::isfinite(*log.val_loss)) throw Error("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.log.push_back(log);

    const double criterion = log.val_loss.value_or(log.train_loss);
    if (!best || criterion < *best) {
      best = criterion;
      result.checkpoint = base;
      store_parameters(model, result.checkpoint);
      result.checkpoint.meta.epoch = epoch;
      result.checkpoint.meta.train_loss = log.train_loss;
      result.checkpoint.meta.val_loss = log.val_loss;
    }
  }
  return result;
}

std::vector<ScoreRecord> score_samples(const Checkpoint& checkpoint, const std::vector<Sample>& samples,
                                       const FrameSource* frames) {
  const auto model = model_from_checkpoint<float>(checkpoint);
  const Vocabulary vocab(checkpoint.vocabulary);
  if (uses_acoustic(checkpoint.fusion) && !frames) throw Error("score: acoustic features required for this model");

  std::vector<ScoreRecord> out;
  out.reserve(samples.size());
  for (const auto& raw : samples) {
    const Sample s = with_history_len(raw, checkpoint.history_len);
    const auto texts = model_texts(s, checkpoint.head, checkpoint.use_history);
    std::shared_ptr<const FrameMatrix> f;
    if (uses_acoustic(checkpoint.fusion)) f = frames->frames(s.acoustic_ref);
    ScoreRecord r;
    r.sample_id = s.sample_id;
    r.true_label = s.label;
    if (checkpoint.head == HeadKind::ThreeWay) {
      const auto ids = vocab.encode(texts[0]);
      const auto c = model.classify_view({f.get(), ids});
      for (int k = 0; k < 3; ++k) r.scores[k] = c.posteriors(k);
    } else {
      for (int k = 0; k < 3; ++k) {
        const auto ids = vocab.encode(texts[k]);
        r.scores[k] = model.task_probability(k, {f.get(), ids});
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string training_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::ordered_json j = {{"epoch", e.epoch},
                                {"train_loss", e.train_loss},
                                {"val_loss", e.val_loss ? nlohmann::ordered_json(*e.val_loss) : nullptr}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace turnkit
