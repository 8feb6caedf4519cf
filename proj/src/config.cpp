#include "turnkit/config.hpp"

#include <functional>
#include <map>

#include "turnkit/manifest.hpp"

namespace turnkit {

namespace {

using json = nlohmann::json;

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected integer");
  return v.get<int>();
}

double as_number(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError(key, "expected boolean");
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected string");
  return v.get<std::string>();
}

using Setter = std::function<void(ToolkitConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto int_key = [&](const char* name, auto member) {
      t[name] = [member](ToolkitConfig& c, const std::string& k, const json& v) { member(c) = as_int(k, v); };
    };
    auto num_key = [&](const char* name, auto member) {
      t[name] = [member](ToolkitConfig& c, const std::string& k, const json& v) { member(c) = as_number(k, v); };
    };
    auto bool_key = [&](const char* name, auto member) {
      t[name] = [member](ToolkitConfig& c, const std::string& k, const json& v) { member(c) = as_bool(k, v); };
    };

    t["seed"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ConfigError(k, "expected non-negative integer");
      c.train.seed = v.get<std::uint64_t>();
      c.synth.seed = c.train.seed;
    };
    num_key("learning_rate", [](ToolkitConfig& c) -> double& { return c.train.learning_rate; });
    int_key("epochs", [](ToolkitConfig& c) -> int& { return c.train.epochs; });
    int_key("batch_size", [](ToolkitConfig& c) -> int& { return c.train.batch_size; });
    t["fusion"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      try {
        c.train.fusion = fusion_from_name(as_string(k, v));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(k, e.what());
      }
    };
    t["head"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      try {
        c.train.head = head_from_name(as_string(k, v));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(k, e.what());
      }
    };
    bool_key("use_history", [](ToolkitConfig& c) -> bool& { return c.train.use_history; });
    t["history_len"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      c.train.history_len = c.prepare.history_len = as_int(k, v);
    };
    bool_key("low_rank", [](ToolkitConfig& c) -> bool& { return c.train.use_low_rank; });
    int_key("rank", [](ToolkitConfig& c) -> int& { return c.train.rank; });
    int_key("backbone_dim", [](ToolkitConfig& c) -> int& { return c.train.model.backbone_dim; });
    int_key("proj_dim", [](ToolkitConfig& c) -> int& { return c.train.model.proj_dim; });
    int_key("embed_dim", [](ToolkitConfig& c) -> int& { return c.train.model.embed_dim; });
    int_key("layers", [](ToolkitConfig& c) -> int& { return c.train.model.layers; });
    int_key("heads", [](ToolkitConfig& c) -> int& { return c.train.model.heads; });
    int_key("ff_dim", [](ToolkitConfig& c) -> int& { return c.train.model.ff_dim; });
    int_key("max_len", [](ToolkitConfig& c) -> int& { return c.train.model.max_len; });
    num_key("adam_beta1", [](ToolkitConfig& c) -> double& { return c.train.adam_beta1; });
    num_key("adam_beta2", [](ToolkitConfig& c) -> double& { return c.train.adam_beta2; });
    num_key("adam_eps", [](ToolkitConfig& c) -> double& { return c.train.adam_eps; });

    t["split_ratio"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      if (!v.is_array() || v.size() != 3) throw ConfigError(k, "expected array of 3 numbers");
      for (int i = 0; i < 3; ++i) c.prepare.split_ratio[i] = as_number(k, v[i]);
    };
    t["lexicon_size"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      const int n = as_int(k, v);
      if (n < 1) throw ConfigError(k, "must be positive");
      c.prepare.lexicon_size = static_cast<std::size_t>(n);
    };
    t["malformed_policy"] = [](ToolkitConfig& c, const std::string& k, const json& v) {
      const auto s = as_string(k, v);
      if (s == "drop") c.prepare.malformed = MalformedPolicy::DropWithWarning;
      else if (s == "abort") c.prepare.malformed = MalformedPolicy::Abort;
      else throw ConfigError(k, "expected \"drop\" or \"abort\"");
    };
    bool_key("downsample_val", [](ToolkitConfig& c) -> bool& { return c.prepare.downsample_val; });

    int_key("n_sessions", [](ToolkitConfig& c) -> int& { return c.synth.n_sessions; });
    int_key("sentences_per_session", [](ToolkitConfig& c) -> int& { return c.synth.sentences_per_session; });
    int_key("vocab_size", [](ToolkitConfig& c) -> int& { return c.synth.vocab_size; });
    int_key("frame_dim", [](ToolkitConfig& c) -> int& { return c.synth.frame_dim; });
    int_key("frame_rate", [](ToolkitConfig& c) -> int& { return c.synth.frame_rate; });
    num_key("acoustic_cue", [](ToolkitConfig& c) -> double& { return c.synth.acoustic_cue_strength; });
    num_key("lexical_cue", [](ToolkitConfig& c) -> double& { return c.synth.lexical_cue_strength; });
    num_key("backchannel_rate", [](ToolkitConfig& c) -> double& { return c.synth.backchannel_rate; });
    num_key("turn_rate", [](ToolkitConfig& c) -> double& { return c.synth.turn_rate; });
    return t;
  }();
  return table;
}

}  // namespace

void ToolkitConfig::set(const std::string& key, const json& value) {
  const auto& t = setters();
  auto it = t.find(key);
  if (it == t.end()) throw ConfigError(key, "unknown key");
  it->second(*this, key, value);
}

void ToolkitConfig::validate() const {
  train.validate();
  synth.validate();
  for (double r : prepare.split_ratio)
    if (!(r > 0.0)) throw ConfigError("split_ratio", "entries must be positive");
  if (prepare.history_len < 0) throw ConfigError("history_len", "must be non-negative");
}

nlohmann::ordered_json ToolkitConfig::to_json() const {
  const auto& m = train.model;
  return {
      {"seed", train.seed},
      {"learning_rate", train.learning_rate},
      {"epochs", train.epochs},
      {"batch_size", train.batch_size},
      {"fusion", fusion_name(train.fusion)},
      {"head", head_name(train.head)},
      {"use_history", train.use_history},
      {"history_len", train.history_len},
      {"low_rank", train.use_low_rank},
      {"rank", train.rank},
      {"backbone_dim", m.backbone_dim},
      {"proj_dim", m.proj_dim},
      {"embed_dim", m.embed_dim},
      {"layers", m.layers},
      {"heads", m.heads},
      {"ff_dim", m.ff_dim},
      {"max_len", m.max_len},
      {"adam_beta1", train.adam_beta1},
      {"adam_beta2", train.adam_beta2},
      {"adam_eps", train.adam_eps},
      {"split_ratio", prepare.split_ratio},
      {"lexicon_size", prepare.lexicon_size},
      {"malformed_policy", prepare.malformed == MalformedPolicy::Abort ? "abort" : "drop"},
      {"downsample_val", prepare.downsample_val},
      {"n_sessions", synth.n_sessions},
      {"sentences_per_session", synth.sentences_per_session},
      {"vocab_size", synth.vocab_size},
      {"frame_dim", synth.frame_dim},
      {"frame_rate", synth.frame_rate},
      {"acoustic_cue", synth.acoustic_cue_strength},
      {"lexical_cue", synth.lexical_cue_strength},
      {"backchannel_rate", synth.backchannel_rate},
      {"turn_rate", synth.turn_rate},
  };
}

ToolkitConfig parse_config(const std::string& text) {
  ToolkitConfig c;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  for (const auto& [key, value] : j.items()) c.set(key, value);
  c.validate();
  return c;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  return parse_config(read_file(path));
}

}  // namespace turnkit
