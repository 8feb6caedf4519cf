#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"

namespace turnkit {

struct ScoreRecord {
  std::string sample_id;
  TurnEvent true_label = TurnEvent::ContinuingSpeech;
  std::array<double, 3> scores{};  // indexed by TurnEvent
};

struct RocPoint {
  double threshold;  // scores >= threshold are called positive
  double fpr;
  double tpr;
};

// Staircase ROC: one point per distinct score (descending) plus the +inf and
// -inf sentinels. Throws if either side is empty.
std::vector<RocPoint> roc_points(std::span<const double> pos, std::span<const double> neg);

// Trapezoidal area under roc_points; equals P(pos > neg) + P(pos == neg) / 2.
double auc(std::span<const double> pos, std::span<const double> neg);

struct EerPoint {
  double fpr = 0.0;
  double fnr = 0.0;
};

// Equal error rate, by linear interpolation between the two staircase points
// where FPR - FNR changes sign.
EerPoint eer_point(std::span<const double> pos, std::span<const double> neg);
double eer(std::span<const double> pos, std::span<const double> neg);

// Two-class balanced accuracy over TurnTaking vs ContinuingSpeech records;
// Backchannel records are ignored. Turn shift predicted iff
// score_turn > score_continue.
double balanced_accuracy_two_class(std::span<const ScoreRecord> records);

struct ClassMetrics {
  double auc = 0.0;
  double eer = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

struct MetricsReport {
  std::array<std::optional<ClassMetrics>, 3> per_class;
  double average_auc = 0.0;
  double average_eer = 0.0;
  std::optional<double> bacc;
  std::array<std::size_t, 3> counts{};
  std::vector<std::string> warnings;
};

// One-vs-rest per class on scores[c]; averages are unweighted over the
// classes that have both positives and negatives.
MetricsReport report(std::span<const ScoreRecord> records);

std::string report_json(const MetricsReport& r);

// CSV exports: class,threshold,fpr,tpr and class,bin_lo,bin_hi,n_pos,n_neg.
void write_roc_csv(std::ostream& out, std::span<const ScoreRecord> records);
void write_histogram_csv(std::ostream& out, std::span<const ScoreRecord> records, int bins = 20);

// Score CSV: sample_id,true_label,score_continue,score_backchannel,score_turn
inline constexpr const char* kScoreCsvHeader = "sample_id,true_label,score_continue,score_backchannel,score_turn";
void write_scores_csv(std::ostream& out, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_scores_csv(std::istream& in);

}  // namespace turnkit
