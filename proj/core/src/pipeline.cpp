#include "artid/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "artid/audio_io.hpp"
#include "artid/parallel.hpp"

namespace artid {

namespace {

struct TagVocab {
  std::map<std::string, int> ids;
  std::vector<std::string> names;

  int intern(const std::string& tag) {
    const auto [it, inserted] = ids.emplace(tag, static_cast<int>(names.size()));
    if (inserted) names.push_back(tag);
    return it->second;
  }
};

std::vector<int> intern_tags(const ManifestRecord& record, TagVocab& vocab) {
  std::vector<int> tags;
  tags.reserve(record.tags.size());
  for (const auto& t : record.tags) tags.push_back(vocab.intern(t));
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  return tags;
}

PcmSignal load_track(const std::string& base_dir, const ManifestRecord& record,
                     const FeatureConfig& features) {
  PcmSignal signal = load_wav(resolve_audio_path(base_dir, record.audio_path));
  if (signal.sample_rate != features.sample_rate) {
    signal = resample(signal, features.sample_rate);
  }
  return signal;
}

SampleSet build_sample_set(const Manifest& records, const std::string& base_dir,
                           const FeatureConfig& features, int threads,
                           TagVocab& vocab, std::vector<std::string>& artist_ids) {
  std::map<std::string, int> artist_ordinal;
  artist_ids.clear();
  std::vector<int> record_artist(records.size());
  std::vector<std::vector<int>> record_tags(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto [it, inserted] = artist_ordinal.emplace(
        records[i].artist_id, static_cast<int>(artist_ids.size()));
    if (inserted) artist_ids.push_back(records[i].artist_id);
    record_artist[i] = it->second;
    record_tags[i] = intern_tags(records[i], vocab);
  }

  std::vector<std::vector<MelSpectrogram>> per_record(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const PcmSignal signal = load_track(base_dir, records[i], features);
    auto segments = extract_segments(signal, features, 0, SegmentPolicy::contiguous);
    if (segments.empty()) {
      throw InsufficientInputError("track '" + records[i].track_id +
                                   "' is shorter than one segment");
    }
    per_record[i] = std::move(segments);
  });

  SampleSet set;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (auto& mel : per_record[i]) {
      set.features.push_back(std::move(mel));
      set.artist.push_back(record_artist[i]);
      set.tags.push_back(record_tags[i]);
    }
  }
  set.rebuild_index();
  return set;
}

}  // namespace

std::string resolve_audio_path(const std::string& base_dir,
                               const std::string& audio_path) {
  namespace fs = std::filesystem;
  if (audio_path.empty()) throw DataError("record has an empty audio_path");
  const fs::path p(audio_path);
  if (p.is_absolute() || base_dir.empty()) return audio_path;
  return (fs::path(base_dir) / p).string();
}

PipelineData load_training_data(const Manifest& manifest, const std::string& base_dir,
                                const FeatureConfig& features, int threads) {
  features.validate();
  const Manifest train_records = filter_split(manifest, "train");
  const Manifest val_records = filter_split(manifest, "val");
  if (train_records.empty()) {
    throw DataError("manifest has no records with split=train");
  }

  PipelineData data;
  TagVocab vocab;
  data.train = build_sample_set(train_records, base_dir, features, threads, vocab,
                                data.train_artist_ids);
  data.val = build_sample_set(val_records, base_dir, features, threads, vocab,
                              data.val_artist_ids);
  data.tag_names = vocab.names;
  return data;
}

std::vector<EmbeddingRecord> embed_tracks(const Manifest& records,
                                          const std::string& base_dir,
                                          const Checkpoint& checkpoint,
                                          int segments, int threads) {
  if (segments < 1) throw ConfigError("segment count must be >= 1");
  checkpoint.net.validate();
  checkpoint.features.validate();
  if (records.empty()) throw DataError("no records to embed");

  std::vector<EmbeddingRecord> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const PcmSignal signal = load_track(base_dir, records[i], checkpoint.features);
    const auto mels = extract_segments(signal, checkpoint.features, segments,
                                       SegmentPolicy::linear_spaced);
    std::vector<std::vector<float>> segment_embeddings;
    segment_embeddings.reserve(mels.size());
    for (const auto& mel : mels) {
      segment_embeddings.push_back(net_forward(checkpoint.params, checkpoint.net,
                                               mel, RunMode::infer, nullptr,
                                               nullptr));
    }
    EmbeddingRecord record;
    record.track_id = records[i].track_id;
    record.artist_id = records[i].artist_id;
    record.vector = track_embedding(segment_embeddings);
    out[i] = std::move(record);
  });
  return out;
}

}  // namespace artid
