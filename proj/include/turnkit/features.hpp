#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include "turnkit/corpus.hpp"
#include "turnkit/model/tensor.hpp"

namespace turnkit {

namespace fs = std::filesystem;

using FrameMatrix = Matrix<float>;

// Per-sentence frame features: T x d_f float32, row-major, little-endian,
// with a JSON sidecar {"T": ..., "d_f": ..., "frame_rate": ...}.
struct SentenceFeatures {
  FrameMatrix frames;
  double frame_rate = 0.0;
};

fs::path feature_path(const fs::path& corpus_dir, const std::string& session_id, const std::string& speaker,
                      int sentence_id);  // ".f32"; sidecar has ".json"
void write_features(const fs::path& f32_path, const SentenceFeatures& f);
std::string feature_bytes(const FrameMatrix& frames);
std::string feature_sidecar_json(const SentenceFeatures& f);
SentenceFeatures read_features(const fs::path& f32_path);

// Number of leading frames covering [start, end] of a sentence.
Eigen::Index frames_for_span(double start, double end, double frame_rate, Eigen::Index total);

// Supplies the acoustic segment a sample refers to.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::shared_ptr<const FrameMatrix> frames(const AcousticRef& ref) const = 0;
};

using SentenceKey = std::tuple<std::string, std::string, int>;  // session, speaker, sentence

class InMemoryFrames : public FrameSource {
 public:
  void add(const SentenceKey& key, SentenceFeatures f) { sentences_[key] = std::move(f); }
  std::shared_ptr<const FrameMatrix> frames(const AcousticRef& ref) const override;
  const std::map<SentenceKey, SentenceFeatures>& sentences() const { return sentences_; }

 private:
  std::map<SentenceKey, SentenceFeatures> sentences_;
};

// Reads feature files from <corpus>/features lazily, caching whole sentences.
class FeatureStore : public FrameSource {
 public:
  explicit FeatureStore(fs::path corpus_dir) : dir_(std::move(corpus_dir)) {}
  std::shared_ptr<const FrameMatrix> frames(const AcousticRef& ref) const override;

 private:
  fs::path dir_;
  mutable std::mutex mu_;
  mutable std::map<SentenceKey, SentenceFeatures> cache_;
};

}  // namespace turnkit
