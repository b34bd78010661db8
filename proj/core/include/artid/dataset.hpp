#ifndef ARTID_DATASET_HPP_
#define ARTID_DATASET_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "artid/errors.hpp"

namespace artid {

struct ManifestRecord {
  std::string track_id;
  std::string artist_id;
  std::string album_id;  // may be empty
  std::vector<std::string> tags;
  std::string audio_path;
  std::string split;  // may be empty
};

using Manifest = std::vector<ManifestRecord>;

// JSON Lines, one record per line. track_id must be unique; artist_id
// nonempty. Parse failures report the line number.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

Manifest filter_split(const Manifest& manifest, const std::string& split);

// Partitions the atomic units (albums or artists) across fractions by a
// seeded shuffle with largest-remainder rounding, then carries each unit's
// tracks along. No unit ever straddles two splits.
std::vector<Manifest> split_album_level(const Manifest& manifest,
                                        const std::vector<double>& fractions,
                                        std::uint64_t seed);
std::vector<Manifest> split_artist_level(const Manifest& manifest,
                                         const std::vector<double>& fractions,
                                         std::uint64_t seed);

// Artists holding at least `target` tracks are subsampled down to exactly
// `target`; the rest are dropped.
Manifest balance_cut(const Manifest& manifest, int target, std::uint64_t seed);

// Every artist is brought to exactly `target` samples by cyclic repetition
// of a seeded shuffle of its tracks (truncated when over target). The result
// is a sample list: track_ids may repeat, so it is for in-memory consumption,
// not for re-saving as a manifest.
Manifest balance_repeat(const Manifest& manifest, int target, std::uint64_t seed);

struct HomonymGroup {
  std::string group_id;
  std::vector<std::string> artist_ids;       // 2 to 4 entries
  std::vector<std::size_t> member_tracks;    // indices into the source manifest
};

using GroupMap = std::map<std::string, std::vector<std::string>>;

// JSON object {group_id: [artist_ids]}.
GroupMap load_group_map(const std::string& path);
void save_group_map(const GroupMap& groups, const std::string& path);

std::vector<HomonymGroup> build_homonym_groups(const Manifest& manifest,
                                               const GroupMap& groups);

}  // namespace artid

#endif  // ARTID_DATASET_HPP_
