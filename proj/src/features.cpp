#include "turnkit/features.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "turnkit/manifest.hpp"

namespace turnkit {

using RowMajorFrames = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

fs::path feature_path(const fs::path& corpus_dir, const std::string& session_id, const std::string& speaker,
                      int sentence_id) {
  return corpus_dir / "features" / session_id / (speaker + "_" + std::to_string(sentence_id) + ".f32");
}

std::string feature_bytes(const FrameMatrix& frames) {
  const RowMajorFrames rm = frames;
  return std::string(reinterpret_cast<const char*>(rm.data()), sizeof(float) * static_cast<std::size_t>(rm.size()));
}

std::string feature_sidecar_json(const SentenceFeatures& f) {
  nlohmann::ordered_json j = {{"T", f.frames.rows()}, {"d_f", f.frames.cols()}, {"frame_rate", f.frame_rate}};
  return j.dump() + "\n";
}

void write_features(const fs::path& f32_path, const SentenceFeatures& f) {
  write_file_atomic(f32_path, feature_bytes(f.frames));
  write_file_atomic(fs::path(f32_path).replace_extension(".json"), feature_sidecar_json(f));
}

SentenceFeatures read_features(const fs::path& f32_path) {
  const auto sidecar = fs::path(f32_path).replace_extension(".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(sidecar));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad feature sidecar " + sidecar.string() + ": " + e.what());
  }
  const auto rows = j.at("T").get<Eigen::Index>();
  const auto cols = j.at("d_f").get<Eigen::Index>();
  const std::string bytes = read_file(f32_path);
  if (bytes.size() != sizeof(float) * static_cast<std::size_t>(rows * cols))
    throw Error("feature file " + f32_path.string() + " does not match its sidecar shape");
  RowMajorFrames rm(rows, cols);
  std::memcpy(rm.data(), bytes.data(), bytes.size());
  return {rm, j.at("frame_rate").get<double>()};
}

Eigen::Index frames_for_span(double start, double end, double frame_rate, Eigen::Index total) {
  if (total < 1) throw Error("acoustic segment has no frames");
  const auto n = static_cast<Eigen::Index>(std::ceil((end - start) * frame_rate - 1e-6));
  return std::clamp<Eigen::Index>(n, 1, total);
}

namespace {
std::shared_ptr<const FrameMatrix> slice(const SentenceFeatures& f, const AcousticRef& ref) {
  const auto n = frames_for_span(ref.start, ref.end, f.frame_rate, f.frames.rows());
  return std::make_shared<const FrameMatrix>(f.frames.topRows(n));
}
}  // namespace

std::shared_ptr<const FrameMatrix> InMemoryFrames::frames(const AcousticRef& ref) const {
  auto it = sentences_.find({ref.session_id, ref.speaker, ref.sentence_id});
  if (it == sentences_.end())
    throw Error("no features for " + ref.session_id + "/" + ref.speaker + "_" + std::to_string(ref.sentence_id));
  return slice(it->second, ref);
}

std::shared_ptr<const FrameMatrix> FeatureStore::frames(const AcousticRef& ref) const {
  const SentenceKey key{ref.session_id, ref.speaker, ref.sentence_id};
  std::lock_guard lock(mu_);
  auto it = cache_.find(key);
  if (it == cache_.end())
    it = cache_.emplace(key, read_features(feature_path(dir_, ref.session_id, ref.speaker, ref.sentence_id))).first;
  return slice(it->second, ref);
}

}  // namespace turnkit
