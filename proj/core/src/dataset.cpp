#include "artid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "artid/rng.hpp"
#include "artid/textio.hpp"

namespace artid {

namespace {

using nlohmann::json;

ManifestRecord record_from_json(const json& j, int line_no) {
  if (!j.is_object()) {
    throw DataError("manifest line " + std::to_string(line_no) + ": not a JSON object");
  }
  ManifestRecord r;
  try {
    r.track_id = j.at("track_id").get<std::string>();
    r.artist_id = j.at("artist_id").get<std::string>();
    r.audio_path = j.value("audio_path", std::string{});
    r.album_id = j.value("album_id", std::string{});
    r.split = j.value("split", std::string{});
    if (j.contains("tags")) r.tags = j.at("tags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  if (r.track_id.empty()) {
    throw DataError("manifest line " + std::to_string(line_no) + ": empty track_id");
  }
  if (r.artist_id.empty()) {
    throw DataError("manifest line " + std::to_string(line_no) + ": empty artist_id");
  }
  return r;
}

json record_to_json(const ManifestRecord& r) {
  json j;
  j["track_id"] = r.track_id;
  j["artist_id"] = r.artist_id;
  if (!r.album_id.empty()) j["album_id"] = r.album_id;
  j["tags"] = r.tags;
  j["audio_path"] = r.audio_path;
  if (!r.split.empty()) j["split"] = r.split;
  return j;
}

// Unit ids in first-appearance order, so downstream shuffles are a pure
// function of (manifest, seed).
std::vector<std::string> collect_units(const Manifest& manifest,
                                       const std::string ManifestRecord::*field,
                                       const char* field_name) {
  std::vector<std::string> units;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const std::string& id = manifest[i].*field;
    if (id.empty()) {
      throw DataError("record '" + manifest[i].track_id + "' is missing " + field_name);
    }
    if (seen.insert(id).second) units.push_back(id);
  }
  return units;
}

// Largest-remainder apportionment of `total` across fractions.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("need at least one split fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    sum += f;
  }
  if (!(sum > 0.0)) throw ConfigError("split fractions must not all be zero");

  std::vector<std::size_t> counts(fractions.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double target = static_cast<double>(total) * fractions[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(target));
    assigned += counts[i];
    remainders.emplace_back(target - std::floor(target), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    counts[remainders[k % remainders.size()].second] += 1;
  }
  return counts;
}

std::vector<Manifest> split_by_unit(const Manifest& manifest,
                                    const std::vector<double>& fractions,
                                    std::uint64_t seed,
                                    const std::string ManifestRecord::*field,
                                    const char* field_name) {
  std::vector<std::string> units = collect_units(manifest, field, field_name);
  Rng rng(derive_seed(seed, 0x73706c69));
  rng.shuffle(units);
  const auto counts = apportion(units.size(), fractions);

  std::unordered_map<std::string, std::size_t> unit_split;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::size_t k = 0; k < counts[s]; ++k) unit_split[units[cursor++]] = s;
  }

  std::vector<Manifest> out(fractions.size());
  for (const auto& r : manifest) out[unit_split.at(r.*field)].push_back(r);
  return out;
}

std::vector<std::string> artist_order(const Manifest& manifest) {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const auto& r : manifest) {
    if (seen.insert(r.artist_id).second) order.push_back(r.artist_id);
  }
  return order;
}

std::unordered_map<std::string, std::vector<std::size_t>> tracks_by_artist(
    const Manifest& manifest) {
  std::unordered_map<std::string, std::vector<std::size_t>> by_artist;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    by_artist[manifest[i].artist_id].push_back(i);
  }
  return by_artist;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  Manifest manifest;
  std::unordered_set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = line;
    if (!stripped.empty() && stripped.back() == '\r') stripped.pop_back();
    if (stripped.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(stripped);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestRecord r = record_from_json(j, line_no);
    if (!ids.insert(r.track_id).second) {
      throw DataError("duplicate track_id '" + r.track_id + "' at manifest line " +
                      std::to_string(line_no));
    }
    manifest.push_back(std::move(r));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::string out;
  for (const auto& r : manifest) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  write_text_file(path, out);
}

Manifest filter_split(const Manifest& manifest, const std::string& split) {
  Manifest out;
  for (const auto& r : manifest) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<Manifest> split_album_level(const Manifest& manifest,
                                        const std::vector<double>& fractions,
                                        std::uint64_t seed) {
  return split_by_unit(manifest, fractions, seed, &ManifestRecord::album_id,
                       "album_id");
}

std::vector<Manifest> split_artist_level(const Manifest& manifest,
                                         const std::vector<double>& fractions,
                                         std::uint64_t seed) {
  return split_by_unit(manifest, fractions, seed, &ManifestRecord::artist_id,
                       "artist_id");
}

Manifest balance_cut(const Manifest& manifest, int target, std::uint64_t seed) {
  if (target < 1) throw ConfigError("balance target must be at least 1");
  const auto by_artist = tracks_by_artist(manifest);
  const auto order = artist_order(manifest);

  std::vector<char> keep(manifest.size(), 0);
  Rng rng(derive_seed(seed, 0x62636374));
  for (const auto& artist : order) {
    const auto& tracks = by_artist.at(artist);
    if (tracks.size() < static_cast<std::size_t>(target)) continue;
    auto chosen = rng.sample_indices(tracks.size(), static_cast<std::size_t>(target));
    for (std::size_t k : chosen) keep[tracks[k]] = 1;
  }
  Manifest out;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (keep[i]) out.push_back(manifest[i]);
  }
  return out;
}

Manifest balance_repeat(const Manifest& manifest, int target, std::uint64_t seed) {
  if (target < 1) throw ConfigError("balance target must be at least 1");
  const auto by_artist = tracks_by_artist(manifest);
  const auto order = artist_order(manifest);

  Manifest out;
  Rng rng(derive_seed(seed, 0x62727074));
  for (const auto& artist : order) {
    auto tracks = by_artist.at(artist);
    if (tracks.empty()) throw DataError("artist '" + artist + "' has no samples");
    rng.shuffle(tracks);
    for (int k = 0; k < target; ++k) {
      out.push_back(manifest[tracks[k % tracks.size()]]);
    }
  }
  return out;
}

GroupMap load_group_map(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("cannot parse group map " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("group map must be a JSON object: " + path);
  GroupMap groups;
  for (const auto& [key, value] : j.items()) {
    try {
      groups[key] = value.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError("group '" + key + "' in " + path + ": " + e.what());
    }
  }
  return groups;
}

void save_group_map(const GroupMap& groups, const std::string& path) {
  json j = json::object();
  for (const auto& [group_id, artists] : groups) j[group_id] = artists;
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<HomonymGroup> build_homonym_groups(const Manifest& manifest,
                                               const GroupMap& groups) {
  const auto by_artist = tracks_by_artist(manifest);
  std::vector<HomonymGroup> out;
  for (const auto& [group_id, artists] : groups) {
    if (artists.size() < 2 || artists.size() > 4) {
      throw DataError("group '" + group_id + "' has " +
                      std::to_string(artists.size()) +
                      " artists; homonym groups need 2 to 4");
    }
    HomonymGroup g;
    g.group_id = group_id;
    g.artist_ids = artists;
    for (const auto& artist : artists) {
      const auto it = by_artist.find(artist);
      if (it == by_artist.end() || it->second.empty()) {
        throw DataError("group '" + group_id + "' references artist '" + artist +
                        "' with no tracks in the manifest");
      }
      g.member_tracks.insert(g.member_tracks.end(), it->second.begin(),
                             it->second.end());
    }
    std::sort(g.member_tracks.begin(), g.member_tracks.end());
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace artid
