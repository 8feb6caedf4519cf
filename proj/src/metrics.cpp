#include "turnkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace turnkit {

std::vector<RocPoint> roc_points(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw Error("roc: need at least one positive and one negative score");
  std::vector<double> p(pos.begin(), pos.end()), n(neg.begin(), neg.end());
  std::sort(p.begin(), p.end(), std::greater<>());
  std::sort(n.begin(), n.end(), std::greater<>());
  std::vector<double> thresholds;
  std::merge(p.begin(), p.end(), n.begin(), n.end(), std::back_inserter(thresholds), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double np = static_cast<double>(p.size()), nn = static_cast<double>(n.size());
  std::vector<RocPoint> out;
  out.reserve(thresholds.size() + 2);
  out.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t ip = 0, in = 0;
  for (double t : thresholds) {
    while (ip < p.size() && p[ip] >= t) ++ip;
    while (in < n.size() && n[in] >= t) ++in;
    out.push_back({t, static_cast<double>(in) / nn, static_cast<double>(ip) / np});
  }
  out.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  return out;
}

double auc(std::span<const double> pos, std::span<const double> neg) {
  const auto pts = roc_points(pos, neg);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  return std::clamp(area, 0.0, 1.0);
}

EerPoint eer_point(std::span<const double> pos, std::span<const double> neg) {
  const auto pts = roc_points(pos, neg);
  auto gap = [](const RocPoint& r) { return r.fpr - (1.0 - r.tpr); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double g = gap(pts[i]);
    if (g == 0.0) return {pts[i].fpr, 1.0 - pts[i].tpr};
    if (i + 1 < pts.size() && g < 0.0 && gap(pts[i + 1]) > 0.0) {
      const auto& a = pts[i];
      const auto& b = pts[i + 1];
      const double lambda = -g / (gap(b) - g);
      const double fpr = a.fpr + lambda * (b.fpr - a.fpr);
      const double fnr = (1.0 - a.tpr) + lambda * (a.tpr - b.tpr);
      return {fpr, fnr};
    }
  }
  // gap runs from -1 at (0,0) to +1 at (1,1), so a crossing always exists.
  throw Error("eer: no crossing found");
}

double eer(std::span<const double> pos, std::span<const double> neg) {
  const auto p = eer_point(pos, neg);
  return 0.5 * (p.fpr + p.fnr);
}

double balanced_accuracy_two_class(std::span<const ScoreRecord> records) {
  std::size_t tt = 0, tt_hit = 0, cs = 0, cs_hit = 0;
  for (const auto& r : records) {
    const bool predicted_turn = r.scores[2] > r.scores[0];
    if (r.true_label == TurnEvent::TurnTaking) {
      ++tt;
      tt_hit += predicted_turn;
    } else if (r.true_label == TurnEvent::ContinuingSpeech) {
      ++cs;
      cs_hit += !predicted_turn;
    }
  }
  if (tt == 0 || cs == 0) throw Error("balanced accuracy: both TurnTaking and ContinuingSpeech records are required");
  return 0.5 * (static_cast<double>(tt_hit) / tt + static_cast<double>(cs_hit) / cs);
}

MetricsReport report(std::span<const ScoreRecord> records) {
  if (records.empty()) throw Error("report: no score records");
  MetricsReport r;
  for (const auto& rec : records) ++r.counts[to_int(rec.true_label)];

  double auc_sum = 0.0, eer_sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> pos, neg;
    for (const auto& rec : records) (to_int(rec.true_label) == c ? pos : neg).push_back(rec.scores[c]);
    if (pos.empty() || neg.empty()) {
      r.warnings.push_back(std::string("class ") + turn_event_name(static_cast<TurnEvent>(c)) +
                           (pos.empty() ? " has no positives" : " has no negatives") + "; excluded from averages");
      continue;
    }
    ClassMetrics m{auc(pos, neg), eer(pos, neg), pos.size(), neg.size()};
    auc_sum += m.auc;
    eer_sum += m.eer;
    ++present;
    r.per_class[c] = m;
  }
  if (present == 0) throw Error("report: no class has both positives and negatives");
  r.average_auc = auc_sum / present;
  r.average_eer = eer_sum / present;
  if (r.counts[0] > 0 && r.counts[2] > 0) r.bacc = balanced_accuracy_two_class(records);
  return r;
}

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  for (int c = 0; c < kNumClasses; ++c) {
    const char* name = turn_event_name(static_cast<TurnEvent>(c));
    if (const auto& m = r.per_class[c])
      j[name] = {{"auc", m->auc}, {"eer", m->eer}, {"n_pos", m->n_pos}, {"n_neg", m->n_neg}};
    else
      j[name] = nullptr;
  }
  j["average"] = {{"auc", r.average_auc}, {"eer", r.average_eer}};
  if (r.bacc) j["bacc"] = *r.bacc;
  j["counts"] = {{"continuing_speech", r.counts[0]}, {"backchannel", r.counts[1]}, {"turn_taking", r.counts[2]}};
  return j.dump(2) + "\n";
}

void write_roc_csv(std::ostream& out, std::span<const ScoreRecord> records) {
  out << "class,threshold,fpr,tpr\n";
  char buf[96];
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> pos, neg;
    for (const auto& rec : records) (to_int(rec.true_label) == c ? pos : neg).push_back(rec.scores[c]);
    if (pos.empty() || neg.empty()) continue;
    for (const auto& p : roc_points(pos, neg)) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
      out << turn_event_name(static_cast<TurnEvent>(c)) << buf;
    }
  }
}

void write_histogram_csv(std::ostream& out, std::span<const ScoreRecord> records, int bins) {
  if (bins < 1) throw Error("histogram needs at least one bin");
  out << "class,bin_lo,bin_hi,n_pos,n_neg\n";
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> pos(bins, 0), neg(bins, 0);
    for (const auto& rec : records) {
      const int b = std::clamp(static_cast<int>(std::floor(rec.scores[c] * bins)), 0, bins - 1);
      ++(to_int(rec.true_label) == c ? pos : neg)[b];
    }
    for (int b = 0; b < bins; ++b)
      out << turn_event_name(static_cast<TurnEvent>(c)) << ',' << static_cast<double>(b) / bins << ','
          << static_cast<double>(b + 1) / bins << ',' << pos[b] << ',' << neg[b] << '\n';
  }
}

void write_scores_csv(std::ostream& out, std::span<const ScoreRecord> records) {
  out << kScoreCsvHeader << '\n';
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, ",%d,%.9g,%.9g,%.9g\n", to_int(r.true_label), r.scores[0], r.scores[1],
                  r.scores[2]);
    out << r.sample_id << buf;
  }
}

std::vector<ScoreRecord> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("score CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoreCsvHeader) throw Error("score CSV: unexpected header '" + line + "'");
  std::vector<ScoreRecord> out;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 5) throw Error("score CSV line " + std::to_string(lineno) + ": expected 5 columns");
    ScoreRecord r;
    r.sample_id = cols[0];
    try {
      r.true_label = turn_event_from_int(std::stoi(cols[1]));
      for (int k = 0; k < 3; ++k) r.scores[k] = std::stod(cols[2 + k]);
    } catch (const std::logic_error&) {
      throw Error("score CSV line " + std::to_string(lineno) + ": malformed number");
    }
    for (double s : r.scores)
      if (!std::isfinite(s)) throw Error("score CSV line " + std::to_string(lineno) + ": non-finite score");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace turnkit
