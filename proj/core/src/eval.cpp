#include "artid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "artid/net.hpp"
#include "artid/textio.hpp"

namespace artid {

namespace {

using nlohmann::json;

double euclidean(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ShapeError("embedding dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

std::vector<EmbeddingRecord> load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  std::vector<EmbeddingRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      EmbeddingRecord r;
      r.track_id = j.at("track_id").get<std::string>();
      r.artist_id = j.at("artist_id").get<std::string>();
      r.vector = j.at("vector").get<std::vector<float>>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::string embeddings_jsonl(const std::vector<EmbeddingRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["track_id"] = r.track_id;
    j["artist_id"] = r.artist_id;
    j["vector"] = r.vector;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_embeddings(const std::vector<EmbeddingRecord>& records,
                     const std::string& path) {
  write_text_file(path, embeddings_jsonl(records));
}

std::vector<float> track_embedding(const std::vector<std::vector<float>>& segments) {
  if (segments.empty()) throw DataError("track embedding needs at least one segment");
  const std::size_t d = segments[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& s : segments) {
    if (s.size() != d) throw ShapeError("segment embedding dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) mean[i] += s[i];
  }
  const double inv = 1.0 / static_cast<double>(segments.size());
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(mean[i] * inv);
  return l2_normalize(out);
}

ArtistModel build_artist_model(const std::string& artist_id,
                               const std::vector<std::vector<float>>& tracks) {
  if (tracks.empty()) throw DataError("artist model needs at least one track");
  ArtistModel model;
  model.artist_id = artist_id;
  model.members = tracks;
  model.centroid = track_embedding(tracks);
  return model;
}

std::size_t classify_nn(const std::vector<float>& test,
                        const std::vector<ArtistModel>& models, ClassifyMode mode) {
  if (models.empty()) throw DataError("classification needs at least one model");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < models.size(); ++m) {
    double dist;
    if (mode == ClassifyMode::centroid) {
      dist = euclidean(test, models[m].centroid);
    } else {
      dist = std::numeric_limits<double>::infinity();
      for (const auto& member : models[m].members) {
        dist = std::min(dist, euclidean(test, member));
      }
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = m;
    }
  }
  return best;
}

double classification_accuracy(const std::vector<std::string>& assigned,
                               const std::vector<std::string>& truth) {
  if (assigned.size() != truth.size() || assigned.empty()) {
    throw DataError("assignment and truth lists must be nonempty and aligned");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    if (assigned[i] == truth[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(assigned.size());
}

std::vector<VerificationScore> verification_scores(
    const std::vector<EmbeddingRecord>& tests,
    const std::vector<ArtistModel>& models) {
  if (tests.empty() || models.empty()) {
    throw EvaluationError("verification needs tests and models");
  }
  std::vector<VerificationScore> scores;
  scores.reserve(tests.size() * models.size());
  for (const auto& t : tests) {
    for (const auto& m : models) {
      VerificationScore s;
      s.distance = euclidean(t.vector, m.centroid);
      s.same_artist = (t.artist_id == m.artist_id);
      scores.push_back(s);
    }
  }
  return scores;
}

namespace {

struct SweepPoint {
  double threshold;
  double fpr;
  double fnr;
};

// FPR and FNR evaluated at every observed distance, ascending; both are
// right-continuous step functions of the threshold.
std::vector<SweepPoint> sweep(const std::vector<VerificationScore>& scores,
                              std::size_t& positives, std::size_t& negatives) {
  positives = negatives = 0;
  std::vector<double> pos, neg;
  for (const auto& s : scores) {
    if (s.same_artist) pos.push_back(s.distance); else neg.push_back(s.distance);
  }
  positives = pos.size();
  negatives = neg.size();
  if (positives == 0 || negatives == 0) {
    throw EvaluationError("EER needs at least one same-artist and one "
                          "different-artist score");
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> thresholds;
  thresholds.reserve(scores.size());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<SweepPoint> points;
  points.reserve(thresholds.size());
  for (double t : thresholds) {
    // same-artist distances strictly above t are misses
    const auto miss = pos.end() - std::upper_bound(pos.begin(), pos.end(), t);
    // different-artist distances at or below t are false accepts
    const auto fa = std::upper_bound(neg.begin(), neg.end(), t) - neg.begin();
    points.push_back({t, static_cast<double>(fa) / negatives,
                      static_cast<double>(miss) / positives});
  }
  return points;
}

}  // namespace

EerResult compute_eer(const std::vector<VerificationScore>& scores) {
  std::size_t positives = 0, negatives = 0;
  const auto points = sweep(scores, positives, negatives);

  // Virtual starting point just below the smallest distance: everything is
  // rejected, so FNR = 1 and FPR = 0.
  double prev_t = points.front().threshold;
  double prev_fnr = 1.0, prev_fpr = 0.0;
  for (const auto& p : points) {
    const double diff = p.fnr - p.fpr;
    if (diff <= 0.0) {
      if (diff == 0.0) return EerResult{p.fnr, p.threshold};
      const double diff0 = prev_fnr - prev_fpr;
      const double lambda = diff0 / (diff0 - diff);
      EerResult r;
      r.eer = prev_fnr + lambda * (p.fnr - prev_fnr);
      r.threshold = prev_t + lambda * (p.threshold - prev_t);
      return r;
    }
    prev_t = p.threshold;
    prev_fnr = p.fnr;
    prev_fpr = p.fpr;
  }
  // Unreachable: at the largest distance FNR = 0 and FPR = 1.
  throw EvaluationError("error-rate curves did not cross");
}

std::vector<RocPoint> error_curve(const std::vector<VerificationScore>& scores) {
  std::size_t positives = 0, negatives = 0;
  const auto points = sweep(scores, positives, negatives);
  std::vector<RocPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.threshold, p.fpr, p.fnr});
  return out;
}

}  // namespace artid
