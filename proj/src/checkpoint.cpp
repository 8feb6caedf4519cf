#include "turnkit/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "turnkit/manifest.hpp"

namespace turnkit {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'U', 'R', 'N', 'K', 'I', 'T', '\x01'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json config_json(const ModelConfig& c) {
  return {{"frame_dim", c.frame_dim},   {"backbone_dim", c.backbone_dim}, {"proj_dim", c.proj_dim},
          {"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},       {"layers", c.layers},
          {"heads", c.heads},           {"ff_dim", c.ff_dim},             {"max_len", c.max_len},
          {"lora_rank", c.lora_rank},   {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.frame_dim = j.at("frame_dim").get<int>();
  c.backbone_dim = j.at("backbone_dim").get<int>();
  c.proj_dim = j.at("proj_dim").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.lora_rank = j.at("lora_rank").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& [path, m] : ckpt.parameters) {
    index.push_back({{"path", path},
                     {"rows", m.rows()},
                     {"cols", m.cols()},
                     {"offset", offset},
                     {"trainable", ckpt.trainable.count(path) > 0}});
    offset += static_cast<std::size_t>(m.size());
  }
  json meta = {{"seed", ckpt.meta.seed},
               {"epoch", ckpt.meta.epoch},
               {"train_loss", ckpt.meta.train_loss},
               {"val_loss", ckpt.meta.val_loss ? json(*ckpt.meta.val_loss) : json(nullptr)},
               {"trainable_parameters", ckpt.meta.trainable_parameters},
               {"total_parameters", ckpt.meta.total_parameters},
               {"trainable_fraction", ckpt.meta.trainable_fraction()}};
  json manifest = {{"format", "turnkit-checkpoint"},
                   {"version", 1},
                   {"config", config_json(ckpt.config)},
                   {"fusion", fusion_name(ckpt.fusion)},
                   {"head", head_name(ckpt.head)},
                   {"use_history", ckpt.use_history},
                   {"history_len", ckpt.history_len},
                   {"vocabulary", ckpt.vocabulary},
                   {"metadata", meta},
                   {"parameters", index}};
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof kMagic);
  const std::uint64_t n = text.size();
  out.append(reinterpret_cast<const char*>(&n), sizeof n);
  out += text;
  for (const auto& [path, m] : ckpt.parameters) {
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.append(reinterpret_cast<const char*>(rm.data()), sizeof(float) * static_cast<std::size_t>(rm.size()));
  }
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw Error("not a turnkit checkpoint");
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + 8, sizeof n);
  if (16 + n > bytes.size()) throw Error("checkpoint truncated (manifest)");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(16, n));
  } catch (const json::parse_error& e) {
    throw Error(std::string("checkpoint manifest: ") + e.what());
  }
  const char* data = bytes.data() + 16 + n;
  const std::size_t data_floats = (bytes.size() - 16 - n) / sizeof(float);

  Checkpoint c;
  try {
    c.config = config_from_json(manifest.at("config"));
    c.fusion = fusion_from_name(manifest.at("fusion").get<std::string>());
    c.head = head_from_name(manifest.at("head").get<std::string>());
    c.use_history = manifest.at("use_history").get<bool>();
    c.history_len = manifest.at("history_len").get<int>();
    c.vocabulary = manifest.at("vocabulary").get<std::vector<std::string>>();
    const auto& meta = manifest.at("metadata");
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    c.meta.epoch = meta.at("epoch").get<int>();
    c.meta.train_loss = meta.at("train_loss").get<double>();
    if (!meta.at("val_loss").is_null()) c.meta.val_loss = meta.at("val_loss").get<double>();
    c.meta.trainable_parameters = meta.at("trainable_parameters").get<std::size_t>();
    c.meta.total_parameters = meta.at("total_parameters").get<std::size_t>();
    for (const auto& e : manifest.at("parameters")) {
      const auto path = e.at("path").get<std::string>();
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      const auto offset = e.at("offset").get<std::size_t>();
      if (offset + static_cast<std::size_t>(rows * cols) > data_floats)
        throw Error("checkpoint truncated (parameter " + path + ")");
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
      std::memcpy(rm.data(), data + offset * sizeof(float), sizeof(float) * static_cast<std::size_t>(rows * cols));
      c.parameters[path] = rm;
      if (e.at("trainable").get<bool>()) c.trainable.insert(path);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint manifest: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_bytes(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

}  // namespace turnkit
