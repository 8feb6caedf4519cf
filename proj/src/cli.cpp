#include "turnkit/cli.hpp"

#include <charconv>
#include <chrono>
#include <deque>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <unistd.h>

#include "turnkit/corpus_io.hpp"
#include "turnkit/features.hpp"
#include "turnkit/manifest.hpp"
#include "turnkit/metrics.hpp"
#include "turnkit/synth.hpp"
#include "turnkit/train.hpp"

#ifndef TURNKIT_VERSION
#define TURNKIT_VERSION "0.0.0"
#endif

namespace turnkit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- prepare ---------------------------------------------------------------

PreparedData prepare_sessions(std::vector<DialogSession> sessions, const PrepareConfig& config, std::uint64_t seed,
                              const std::optional<BackchannelLexicon>& lexicon) {
  if (sessions.empty()) throw Error("prepare: no sessions");
  PreparedData out;
  Diagnostics diag;
  std::vector<std::string> ids;
  for (auto& s : sessions) {
    s.words = normalize_words(s.words, config.malformed, &diag);
    ids.push_back(s.session_id);
  }
  out.splits = split_sessions(ids, config.split_ratio);

  if (lexicon) {
    out.lexicon = *lexicon;
  } else {
    std::vector<DialogSession> train_sessions;
    for (const auto& s : sessions)
      if (out.splits.at(s.session_id) == Split::Train) train_sessions.push_back(s);
    out.lexicon = BackchannelLexicon::from_corpus(train_sessions, config.lexicon_size);
  }
  if (out.lexicon.size() == 0) diag.warn("backchannel lexicon is empty; no backchannel labels will be produced");

  auto& st = out.stats;
  st.sessions = sessions.size();
  for (const auto& s : sessions) {
    st.words += s.words.size();
    const auto ex = extract_backchannel_candidates(s, out.lexicon);
    LabelStats ls;
    const auto labeled = serialize_and_label(ex.pruned, ex.candidates, &ls);
    st.speaker_changes += ls.speaker_changes;
    st.backchannels += ls.backchannels;
    st.dropped_candidates += ls.dropped_candidates;
    st.collisions += ls.collisions;
    if (ls.dropped_candidates)
      diag.warn(s.session_id + ": " + std::to_string(ls.dropped_candidates) +
                " backchannel candidate(s) without a preceding word of the other speaker");
    auto samples = build_samples(s.session_id, labeled, static_cast<std::size_t>(config.history_len));
    auto& dst = out.samples[static_cast<int>(out.splits.at(s.session_id))];
    dst.insert(dst.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
  }

  for (int k = 0; k < 3; ++k) st.counts_before[k] = class_counts(out.samples[k]);
  out.samples[0] = downsample_continuing(out.samples[0], seed);
  if (config.downsample_val) out.samples[1] = downsample_continuing(out.samples[1], seed + 1);
  for (int k = 0; k < 3; ++k) st.counts_after[k] = class_counts(out.samples[k]);
  st.warnings = diag.warnings.size();
  out.warnings = std::move(diag.warnings);
  return out;
}

PreparedData prepare_corpus(const fs::path& corpus_dir, const PrepareConfig& config, std::uint64_t seed,
                            const std::optional<fs::path>& lexicon_file) {
  const fs::path session_dir = fs::is_directory(corpus_dir / "sessions") ? corpus_dir / "sessions" : corpus_dir;
  const auto files = list_session_files(session_dir);
  if (files.empty()) throw Error("no session files (*.jsonl) in " + session_dir.string());
  std::vector<DialogSession> sessions;
  for (const auto& f : files) sessions.push_back(read_session_file(f));

  std::optional<BackchannelLexicon> lexicon;
  if (lexicon_file)
    lexicon = read_lexicon_file(*lexicon_file);
  else if (fs::exists(corpus_dir / "lexicon.txt"))
    lexicon = read_lexicon_file(corpus_dir / "lexicon.txt");
  return prepare_sessions(std::move(sessions), config, seed, lexicon);
}

namespace {

std::string samples_text(const std::vector<Sample>& samples) {
  std::ostringstream ss;
  write_samples(ss, samples);
  return ss.str();
}

ojson counts_json(const std::array<std::size_t, 3>& c) {
  return {{"continuing_speech", c[0]}, {"backchannel", c[1]}, {"turn_taking", c[2]}};
}

}  // namespace

void write_prepared(const PreparedData& data, const fs::path& out_dir, const fs::path& corpus_dir) {
  static const char* kFiles[3] = {"train.jsonl", "val.jsonl", "test.jsonl"};
  for (int k = 0; k < 3; ++k) write_file_atomic(out_dir / kFiles[k], samples_text(data.samples[k]));
  write_file_atomic(out_dir / "splits.json", split_manifest_json(data.splits));
  std::ostringstream lex;
  write_lexicon(lex, data.lexicon);
  write_file_atomic(out_dir / "lexicon.txt", lex.str());

  const auto& st = data.stats;
  ojson j;
  j["corpus"] = corpus_dir.string();
  j["sessions"] = st.sessions;
  j["words"] = st.words;
  j["speaker_changes"] = st.speaker_changes;
  j["backchannels"] = st.backchannels;
  j["dropped_candidates"] = st.dropped_candidates;
  j["collisions"] = st.collisions;
  j["warnings"] = st.warnings;
  for (int k = 0; k < 3; ++k) {
    const char* name = split_name(static_cast<Split>(k));
    j["before_downsampling"][name] = counts_json(st.counts_before[k]);
    j["after_downsampling"][name] = counts_json(st.counts_after[k]);
  }
  write_file_atomic(out_dir / "stats.json", j.dump(2) + "\n");
}

// ---- CLI plumbing ----------------------------------------------------------

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

// Flags that override configuration keys (flags > file > defaults).
class Overrides {
 public:
  enum class Kind { Int, Number, String, Ratio, Flag };

  void add(CLI::App* app, const std::string& flag, const std::string& key, Kind kind, const std::string& help) {
    auto& it = items_.emplace_back(Item{key, kind, {}, false, nullptr});
    if (kind == Kind::Flag)
      it.opt = app->add_flag(flag, it.flag, help);
    else
      it.opt = app->add_option(flag, it.value, help);
  }

  void apply(ToolkitConfig& cfg) const {
    for (const auto& it : items_) {
      if (it.opt->count() == 0) continue;
      cfg.set(it.key, to_json(it));
    }
  }

 private:
  struct Item {
    std::string key;
    Kind kind;
    std::string value;
    bool flag;
    CLI::Option* opt;
  };

  static nlohmann::json to_json(const Item& it) {
    const std::string& v = it.value;
    switch (it.kind) {
      case Kind::Flag:
        return it.flag;
      case Kind::String:
        return v;
      case Kind::Int: {
        long long x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(it.key, "expected integer, got '" + v + "'");
        if (it.key == "seed" && x >= 0) return static_cast<unsigned long long>(x);
        return x;
      }
      case Kind::Number:
        return parse_number(it.key, v);
      case Kind::Ratio: {
        nlohmann::json arr = nlohmann::json::array();
        std::istringstream in(v);
        for (std::string part; std::getline(in, part, ':');) arr.push_back(parse_number(it.key, part));
        if (arr.size() != 3) throw ConfigError(it.key, "expected train:val:test, got '" + v + "'");
        return arr;
      }
    }
    return nullptr;
  }

  static double parse_number(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError(key, "expected number, got '" + v + "'");
    return d;
  }

  std::deque<Item> items_;
};

// Writes a directory artifact under a sibling temporary name; renamed into
// place by commit(), removed otherwise.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(normalize(std::move(target))) {
    if (fs::exists(target_) && !fs::is_empty(target_) && !fs::exists(manifest_path_for(target_)))
      throw Error("refusing to replace non-empty directory " + target_.string() + " that was not produced by turnkit");
    tmp_ = target_;
    tmp_ += ".tmp." + std::to_string(::getpid());
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& path() const { return tmp_; }
  const fs::path& target() const { return target_; }

  void commit() {
    if (fs::exists(target_)) {
      fs::path old = target_;
      old += ".old." + std::to_string(::getpid());
      fs::rename(target_, old);
      fs::rename(tmp_, target_);
      fs::remove_all(old);
    } else {
      if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
      fs::rename(tmp_, target_);
    }
    committed_ = true;
  }

 private:
  static fs::path normalize(fs::path p) {
    std::string s = p.string();
    while (s.size() > 1 && s.back() == '/') s.pop_back();
    return s;
  }

  fs::path target_, tmp_;
  bool committed_ = false;
};

struct Invocation {
  explicit Invocation(std::string name) : command(std::move(name)) {}

  std::string command;
  std::string config_path;
  Overrides overrides;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  ToolkitConfig config() const {
    ToolkitConfig cfg = config_path.empty() ? ToolkitConfig{} : load_config(config_path);
    overrides.apply(cfg);
    cfg.validate();
    return cfg;
  }

  RunManifest manifest(const ToolkitConfig& cfg, std::vector<std::string> inputs, std::vector<std::string> outputs) const {
    RunManifest m;
    m.command = command;
    m.config_json = cfg.to_json().dump();
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.seed = cfg.seed();
    m.version = TURNKIT_VERSION;
    m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return m;
  }
};

void add_common(CLI::App* app, Invocation& inv) {
  app->add_option("--config", inv.config_path, "Flat JSON configuration file")->check(CLI::ExistingFile);
  inv.overrides.add(app, "--seed", "seed", Overrides::Kind::Int, "Random seed");
}

ojson model_descriptor(const Checkpoint& ck) {
  return {{"fusion", fusion_name(ck.fusion)},
          {"head", head_name(ck.head)},
          {"use_history", ck.use_history},
          {"history_len", ck.history_len},
          {"low_rank", ck.config.lora_rank > 0}};
}

// Corpus directory for acoustic features: the flag, else the "corpus" entry
// of stats.json beside the sample file.
fs::path resolve_corpus(const std::string& flag, const fs::path& samples_file) {
  if (!flag.empty()) return flag;
  const fs::path stats = samples_file.parent_path() / "stats.json";
  if (fs::exists(stats)) {
    const auto j = nlohmann::json::parse(read_file(stats));
    if (j.contains("corpus") && j["corpus"].is_string()) return j["corpus"].get<std::string>();
  }
  return {};
}

std::unique_ptr<FeatureStore> feature_store(FusionOption fusion, const fs::path& corpus) {
  if (!uses_acoustic(fusion)) return nullptr;
  if (corpus.empty()) throw Error("acoustic features needed: pass --corpus");
  if (!fs::is_directory(corpus / "features")) throw Error("no features directory in " + corpus.string());
  return std::make_unique<FeatureStore>(corpus);
}

void print_warnings(const std::vector<std::string>& warnings, std::size_t limit = 10) {
  for (std::size_t i = 0; i < warnings.size() && i < limit; ++i) std::cerr << "warning: " << warnings[i] << "\n";
  if (warnings.size() > limit) std::cerr << "warning: ... " << warnings.size() - limit << " more\n";
}

// ---- report table ----------------------------------------------------------

struct ReportRow {
  std::string source, fusion = "?", head = "?", history = "?";
  std::array<std::optional<double>, 3> auc;
  std::optional<double> avg_auc, avg_eer, bacc;
};

int fusion_rank(const std::string& f) {
  static const std::vector<std::string> order = {"acoustic", "text", "opt1", "opt2"};
  auto it = std::find(order.begin(), order.end(), f);
  return static_cast<int>(it - order.begin());
}

ReportRow read_report_row(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  ReportRow r;
  r.source = path.filename().string();
  if (j.contains("model") && j["model"].is_object()) {
    const auto& m = j["model"];
    r.fusion = m.value("fusion", "?");
    r.head = m.value("head", "?");
    if (m.contains("use_history")) r.history = m["use_history"].get<bool>() ? "yes" : "no";
  }
  for (int c = 0; c < 3; ++c) {
    const char* name = turn_event_name(static_cast<TurnEvent>(c));
    if (j.contains(name) && j[name].is_object()) r.auc[c] = j[name]["auc"].get<double>();
  }
  if (j.contains("average")) {
    r.avg_auc = j["average"]["auc"].get<double>();
    r.avg_eer = j["average"]["eer"].get<double>();
  } else {
    throw Error(path.string() + " is not a metrics file");
  }
  if (j.contains("bacc")) r.bacc = j["bacc"].get<double>();
  return r;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::pair<std::string, std::string> render_report(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tuple(fusion_rank(a.fusion), a.head, a.history) < std::tuple(fusion_rank(b.fusion), b.head, b.history);
  });
  const std::vector<std::string> header = {"fusion", "head", "history", "auc_continuing", "auc_backchannel",
                                           "auc_turn", "auc_average", "eer_average", "bacc", "source"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.fusion, r.head, r.history, fmt(r.auc[0]), fmt(r.auc[1]), fmt(r.auc[2]), fmt(r.avg_auc),
                     fmt(r.avg_eer), fmt(r.bacc), r.source});

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream text, csv;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c)
      text << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << row[c];
    text << "\n";
    for (std::size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << row[c];
    csv << "\n";
  };
  line(header);
  for (std::size_t c = 0; c < header.size(); ++c) text << (c ? "  " : "") << std::string(width[c], '-');
  text << "\n";
  for (const auto& row : cells) line(row);
  return {text.str(), csv.str()};
}

}  // namespace

// ---- run -------------------------------------------------------------------

int run(int argc, const char* const* argv) {
  CLI::App app{"Turn-taking and backchannel prediction toolkit"};
  app.set_version_flag("--version", TURNKIT_VERSION);
  app.require_subcommand(1);

  using K = Overrides::Kind;

  // synth
  Invocation synth_inv{"synth"};
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground-truth labels");
  add_common(synth, synth_inv);
  synth->add_option("--out", synth_out, "Output corpus directory")->required();
  synth_inv.overrides.add(synth, "--sessions", "n_sessions", K::Int, "Number of sessions");
  synth_inv.overrides.add(synth, "--sentences", "sentences_per_session", K::Int, "Sentences per session");
  synth_inv.overrides.add(synth, "--vocab-size", "vocab_size", K::Int, "Vocabulary size");
  synth_inv.overrides.add(synth, "--frame-dim", "frame_dim", K::Int, "Feature dimension");
  synth_inv.overrides.add(synth, "--frame-rate", "frame_rate", K::Int, "Frames per second");
  synth_inv.overrides.add(synth, "--acoustic-cue", "acoustic_cue", K::Number, "Acoustic cue strength in [0,1]");
  synth_inv.overrides.add(synth, "--lexical-cue", "lexical_cue", K::Number, "Lexical cue strength in [0,1]");
  synth_inv.overrides.add(synth, "--backchannel-rate", "backchannel_rate", K::Number, "Backchannel rate per word");
  synth_inv.overrides.add(synth, "--turn-rate", "turn_rate", K::Number, "Turn change rate per sentence");

  // prepare
  Invocation prep_inv{"prepare"};
  std::string prep_corpus, prep_out, prep_lexicon;
  auto* prep = app.add_subcommand("prepare", "Label a corpus and write split, balanced sample sets");
  add_common(prep, prep_inv);
  prep->add_option("--corpus", prep_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--lexicon", prep_lexicon, "Backchannel lexicon file")->check(CLI::ExistingFile);
  prep_inv.overrides.add(prep, "--split-ratio", "split_ratio", K::Ratio, "Session split ratio train:val:test");
  prep_inv.overrides.add(prep, "--lexicon-size", "lexicon_size", K::Int, "Size of a data-driven lexicon");
  prep_inv.overrides.add(prep, "--history-len", "history_len", K::Int, "Sentences of dialog history kept");
  prep_inv.overrides.add(prep, "--malformed", "malformed_policy", K::String, "drop or abort on malformed brackets");

  // train
  Invocation train_inv{"train"};
  std::string train_file, val_file, train_corpus, train_out;
  std::vector<std::string> train_init;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(tr, train_inv);
  tr->add_option("--train", train_file, "Training samples (JSONL)")->required()->check(CLI::ExistingFile);
  tr->add_option("--val", val_file, "Validation samples (JSONL)")->check(CLI::ExistingFile);
  tr->add_option("--corpus", train_corpus, "Corpus directory holding acoustic features");
  tr->add_option("--init", train_init, "Checkpoint(s) to warm-start branches from")->check(CLI::ExistingFile);
  tr->add_option("--out", train_out, "Output checkpoint")->required();
  train_inv.overrides.add(tr, "--fusion", "fusion", K::String, "acoustic, text, opt1 or opt2");
  train_inv.overrides.add(tr, "--head", "head", K::String, "three_way or multitask");
  train_inv.overrides.add(tr, "--history", "use_history", K::Flag, "Prepend dialog history to the text");
  train_inv.overrides.add(tr, "--history-len", "history_len", K::Int, "Sentences of dialog history used");
  train_inv.overrides.add(tr, "--low-rank", "low_rank", K::Flag, "Train low-rank adapters instead of the text encoder");
  train_inv.overrides.add(tr, "--rank", "rank", K::Int, "Adapter rank");
  train_inv.overrides.add(tr, "--lr", "learning_rate", K::Number, "Learning rate");
  train_inv.overrides.add(tr, "--epochs", "epochs", K::Int, "Epochs");
  train_inv.overrides.add(tr, "--batch-size", "batch_size", K::Int, "Minibatch size");
  train_inv.overrides.add(tr, "--backbone-dim", "backbone_dim", K::Int, "Frozen acoustic backbone width (0: none)");
  train_inv.overrides.add(tr, "--proj-dim", "proj_dim", K::Int, "Acoustic projection width");
  train_inv.overrides.add(tr, "--embed-dim", "embed_dim", K::Int, "Text encoder width");
  train_inv.overrides.add(tr, "--layers", "layers", K::Int, "Text encoder layers");
  train_inv.overrides.add(tr, "--heads", "heads", K::Int, "Attention heads");
  train_inv.overrides.add(tr, "--ff-dim", "ff_dim", K::Int, "Feed-forward width");
  train_inv.overrides.add(tr, "--max-len", "max_len", K::Int, "Maximum text length in tokens");

  // score
  Invocation score_inv{"score"};
  std::string score_ckpt, score_samples_file, score_corpus, score_out;
  auto* sc = app.add_subcommand("score", "Score samples with a checkpoint");
  add_common(sc, score_inv);
  sc->add_option("--checkpoint", score_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  sc->add_option("--samples", score_samples_file, "Samples (JSONL)")->required()->check(CLI::ExistingFile);
  sc->add_option("--corpus", score_corpus, "Corpus directory holding acoustic features");
  sc->add_option("--out", score_out, "Output score CSV")->required();

  // evaluate
  Invocation eval_inv{"evaluate"};
  std::string eval_scores, eval_out, eval_export;
  auto* ev = app.add_subcommand("evaluate", "Compute AUC, EER and bAcc from a score CSV");
  add_common(ev, eval_inv);
  ev->add_option("--scores", eval_scores, "Score CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", eval_out, "Output metrics JSON")->required();
  ev->add_option("--export-dir", eval_export, "Directory for ROC and histogram CSVs");

  // report
  Invocation report_inv{"report"};
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* rp = app.add_subcommand("report", "Tabulate several metrics files");
  add_common(rp, report_inv);
  rp->add_option("metrics", report_inputs, "Metrics JSON files")->required()->check(CLI::ExistingFile);
  rp->add_option("--out", report_out, "Output stem; writes <stem>.txt and <stem>.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      const auto cfg = synth_inv.config();
      const auto corpus = generate(cfg.synth);
      StagedDir dir(synth_out);
      write_corpus(corpus, dir.path());
      dir.commit();
      write_run_manifest(synth_inv.manifest(cfg, {}, {dir.target().string()}), dir.target());
      std::size_t words = 0;
      for (const auto& s : corpus.sessions) words += s.words.size();
      std::cout << "wrote " << corpus.sessions.size() << " sessions (" << words << " words) to "
                << dir.target().string() << "\n";
    } else if (prep->parsed()) {
      const auto cfg = prep_inv.config();
      std::optional<fs::path> lex;
      if (!prep_lexicon.empty()) lex = prep_lexicon;
      const auto data = prepare_corpus(prep_corpus, cfg.prepare, cfg.seed(), lex);
      print_warnings(data.warnings);
      StagedDir dir(prep_out);
      write_prepared(data, dir.path(), prep_corpus);
      dir.commit();
      std::vector<std::string> inputs = {prep_corpus};
      if (lex) inputs.push_back(lex->string());
      write_run_manifest(prep_inv.manifest(cfg, inputs, {dir.target().string()}), dir.target());
      for (int k = 0; k < 3; ++k) {
        const auto& c = data.stats.counts_after[k];
        std::cout << split_name(static_cast<Split>(k)) << ": " << data.samples[k].size() << " samples (C " << c[0]
                  << ", B " << c[1] << ", T " << c[2] << ")\n";
      }
    } else if (tr->parsed()) {
      const auto cfg = train_inv.config();
      const auto train_samples = read_samples_file(train_file);
      const auto val_samples = val_file.empty() ? std::vector<Sample>{} : read_samples_file(val_file);
      std::vector<Checkpoint> init;
      for (const auto& p : train_init) init.push_back(load_checkpoint(p));
      const auto store = feature_store(cfg.train.fusion, resolve_corpus(train_corpus, train_file));
      const auto result = train(cfg.train, train_samples, val_samples, store.get(), init);
      print_warnings(result.warnings);
      for (const auto& e : result.log) {
        std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss;
        if (e.val_loss) std::cout << " val_loss " << *e.val_loss;
        std::cout << "\n";
      }
      const fs::path out = train_out;
      fs::path log = out;
      log += ".log.jsonl";
      save_checkpoint(result.checkpoint, out);
      write_file_atomic(log, training_log_jsonl(result.log));
      std::vector<std::string> inputs = {train_file};
      if (!val_file.empty()) inputs.push_back(val_file);
      inputs.insert(inputs.end(), train_init.begin(), train_init.end());
      auto m = train_inv.manifest(cfg, inputs, {out.string(), log.string()});
      m.model_json = model_descriptor(result.checkpoint).dump();
      write_run_manifest(m, out);
      write_run_manifest(m, log);
      const auto& meta = result.checkpoint.meta;
      std::cout << "best epoch " << meta.epoch << "; trainable parameters " << meta.trainable_parameters << " of "
                << meta.total_parameters << "\n";
    } else if (sc->parsed()) {
      const auto cfg = score_inv.config();
      const auto ckpt = load_checkpoint(score_ckpt);
      const auto samples = read_samples_file(score_samples_file);
      const auto store = feature_store(ckpt.fusion, resolve_corpus(score_corpus, score_samples_file));
      const auto records = score_samples(ckpt, samples, store.get());
      std::ostringstream csv;
      write_scores_csv(csv, records);
      write_file_atomic(score_out, csv.str());
      auto m = score_inv.manifest(cfg, {score_ckpt, score_samples_file}, {score_out});
      m.model_json = model_descriptor(ckpt).dump();
      write_run_manifest(m, score_out);
      std::cout << "scored " << records.size() << " samples\n";
    } else if (ev->parsed()) {
      const auto cfg = eval_inv.config();
      std::ifstream in(eval_scores);
      const auto records = read_scores_csv(in);
      const auto r = report(records);
      print_warnings(r.warnings);
      auto j = ojson::parse(report_json(r));
      const auto score_manifest = manifest_path_for(eval_scores);
      if (fs::exists(score_manifest)) {
        const auto sm = ojson::parse(read_file(score_manifest));
        if (sm.contains("model")) j["model"] = sm["model"];
      }
      std::vector<std::string> outputs = {eval_out};
      std::optional<StagedDir> exports;
      if (!eval_export.empty()) {
        exports.emplace(eval_export);
        std::ostringstream roc, hist;
        write_roc_csv(roc, records);
        write_histogram_csv(hist, records);
        write_file_atomic(exports->path() / "roc.csv", roc.str());
        write_file_atomic(exports->path() / "histogram.csv", hist.str());
        outputs.push_back(exports->target().string());
      }
      write_file_atomic(eval_out, j.dump(2) + "\n");
      const auto m = eval_inv.manifest(cfg, {eval_scores}, outputs);
      if (exports) {
        exports->commit();
        write_run_manifest(m, exports->target());
      }
      write_run_manifest(m, eval_out);
      std::cout << "average AUC " << fmt(r.average_auc) << ", average EER " << fmt(r.average_eer);
      if (r.bacc) std::cout << ", bAcc " << fmt(*r.bacc);
      std::cout << "\n";
    } else if (rp->parsed()) {
      const auto cfg = report_inv.config();
      std::vector<ReportRow> rows;
      for (const auto& p : report_inputs) rows.push_back(read_report_row(p));
      const auto [text, csv] = render_report(rows);
      const fs::path txt = report_out + ".txt", csv_path = report_out + ".csv";
      write_file_atomic(txt, text);
      write_file_atomic(csv_path, csv);
      const auto m = report_inv.manifest(cfg, report_inputs, {txt.string(), csv_path.string()});
      write_run_manifest(m, txt);
      write_run_manifest(m, csv_path);
      std::cout << text;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace turnkit
