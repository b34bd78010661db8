#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "artid/config.hpp"
#include "artid/dataset.hpp"
#include "artid/synth.hpp"
#include "testutil.hpp"

using namespace artid;

namespace {

ManifestRecord record(const std::string& track, const std::string& artist,
                      const std::string& album = "", const std::string& split = "") {
  ManifestRecord r;
  r.track_id = track;
  r.artist_id = artist;
  r.album_id = album;
  r.audio_path = "audio/" + track + ".wav";
  r.split = split;
  return r;
}

Manifest artists_with_counts(const std::vector<int>& counts) {
  Manifest m;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    const std::string artist = "a" + std::to_string(a);
    for (int t = 0; t < counts[a]; ++t) {
      m.push_back(record(artist + "_t" + std::to_string(t), artist,
                         artist + "_alb" + std::to_string(t / 4)));
    }
  }
  return m;
}

std::map<std::string, int> artist_counts(const Manifest& m) {
  std::map<std::string, int> counts;
  for (const auto& r : m) counts[r.artist_id] += 1;
  return counts;
}

std::vector<std::string> track_ids(const Manifest& m) {
  std::vector<std::string> ids;
  for (const auto& r : m) ids.push_back(r.track_id);
  return ids;
}

}  // namespace

TEST_CASE("manifest round trips every field") {
  testutil::TempDir dir("man");
  Manifest m;
  ManifestRecord r1 = record("t1", "a", "alb1", "train");
  r1.tags = {"rock", "indie"};
  ManifestRecord r2 = record("t2", "b");
  m.push_back(r1);
  m.push_back(r2);

  const std::string path = dir.file("m.jsonl");
  save_manifest(m, path);
  const Manifest back = load_manifest(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].track_id == "t1");
  CHECK(back[0].artist_id == "a");
  CHECK(back[0].album_id == "alb1");
  CHECK(back[0].tags == std::vector<std::string>{"rock", "indie"});
  CHECK(back[0].audio_path == "audio/t1.wav");
  CHECK(back[0].split == "train");
  CHECK(back[1].album_id.empty());
  CHECK(back[1].split.empty());
  CHECK(back[1].tags.empty());
}

TEST_CASE("manifest loader reports precise failures") {
  testutil::TempDir dir("manbad");

  auto write_lines = [&](const std::string& name, const std::string& body) {
    const std::string path = dir.file(name);
    std::ofstream f(path);
    f << body;
    return path;
  };

  const std::string dup = write_lines(
      "dup.jsonl",
      R"({"track_id":"t1","artist_id":"a","audio_path":"x.wav"})" "\n"
      R"({"track_id":"t1","artist_id":"b","audio_path":"y.wav"})" "\n");
  try {
    load_manifest(dup);
    FAIL("expected duplicate failure");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("t1") != std::string::npos);
    CHECK(what.find("line 2") != std::string::npos);
  }

  const std::string broken = write_lines(
      "broken.jsonl",
      R"({"track_id":"t1","artist_id":"a","audio_path":"x.wav"})" "\n"
      "{oops\n");
  try {
    load_manifest(broken);
    FAIL("expected parse failure");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  const std::string arr = write_lines("arr.jsonl", "[1,2]\n");
  CHECK_THROWS_WITH_AS(load_manifest(arr),
                       doctest::Contains("not a JSON object"), DataError);

  const std::string blank_id = write_lines(
      "blank_id.jsonl",
      R"({"track_id":"","artist_id":"a","audio_path":"x.wav"})" "\n");
  CHECK_THROWS_WITH_AS(load_manifest(blank_id),
                       doctest::Contains("empty track_id"), DataError);

  const std::string blank_artist = write_lines(
      "blank_artist.jsonl",
      R"({"track_id":"t","artist_id":"","audio_path":"x.wav"})" "\n");
  CHECK_THROWS_WITH_AS(load_manifest(blank_artist),
                       doctest::Contains("empty artist_id"), DataError);

  CHECK_THROWS_AS(load_manifest(dir.file("absent.jsonl")), DataError);

  // blank lines are fine anywhere
  const std::string gaps = write_lines(
      "gaps.jsonl",
      "\n"
      R"({"track_id":"t1","artist_id":"a","audio_path":"x.wav"})" "\n"
      "\n\n"
      R"({"track_id":"t2","artist_id":"a","audio_path":"y.wav"})" "\n\n");
  CHECK(load_manifest(gaps).size() == 2);
}

TEST_CASE("filter split keeps matching records in order") {
  Manifest m;
  m.push_back(record("t1", "a", "", "train"));
  m.push_back(record("t2", "a", "", "val"));
  m.push_back(record("t3", "b", "", "train"));
  const Manifest train = filter_split(m, "train");
  CHECK(track_ids(train) == std::vector<std::string>{"t1", "t3"});
  CHECK(filter_split(m, "eval").empty());
}

TEST_CASE("album level split keeps albums whole with exact apportionment") {
  Manifest m;
  for (int alb = 0; alb < 100; ++alb) {
    const std::string artist = "a" + std::to_string(alb % 25);
    const std::string album = "alb" + std::to_string(alb);
    m.push_back(record(album + "_t0", artist, album));
    m.push_back(record(album + "_t1", artist, album));
  }

  const auto parts = split_album_level(m, {0.8, 0.1, 0.1}, 9);
  REQUIRE(parts.size() == 3);

  auto albums_of = [](const Manifest& part) {
    std::set<std::string> albums;
    for (const auto& r : part) albums.insert(r.album_id);
    return albums;
  };
  const auto a0 = albums_of(parts[0]);
  const auto a1 = albums_of(parts[1]);
  const auto a2 = albums_of(parts[2]);
  CHECK(a0.size() == 80);
  CHECK(a1.size() == 10);
  CHECK(a2.size() == 10);
  CHECK(parts[0].size() + parts[1].size() + parts[2].size() == m.size());

  std::set<std::string> overlap;
  std::set_intersection(a0.begin(), a0.end(), a1.begin(), a1.end(),
                        std::inserter(overlap, overlap.begin()));
  CHECK(overlap.empty());

  // deterministic for a seed, reshuffled for another
  const auto again = split_album_level(m, {0.8, 0.1, 0.1}, 9);
  CHECK(track_ids(again[0]) == track_ids(parts[0]));
  const auto other = split_album_level(m, {0.8, 0.1, 0.1}, 10);
  CHECK(track_ids(other[0]) != track_ids(parts[0]));
}

TEST_CASE("artist level split never separates an artist's albums") {
  Manifest m;
  for (int a = 0; a < 6; ++a) {
    const std::string artist = "a" + std::to_string(a);
    for (int t = 0; t < 3; ++t) {
      m.push_back(record(artist + "_t" + std::to_string(t), artist,
                         artist + "_alb" + std::to_string(t)));  // one album each
    }
  }
  const auto parts = split_artist_level(m, {0.5, 0.5}, 3);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 9);
  CHECK(parts[1].size() == 9);
  for (const auto& part : parts) {
    for (const auto& counts = artist_counts(part); const auto& [artist, n] : counts) {
      (void)artist;
      CHECK(n == 3);  // whole artist or nothing
    }
  }
}

TEST_CASE("splits validate their inputs") {
  Manifest m{record("t1", "a", "alb")};
  CHECK_THROWS_AS(split_album_level(m, {}, 0), ConfigError);
  CHECK_THROWS_AS(split_album_level(m, {0.5, -0.1}, 0), ConfigError);
  CHECK_THROWS_AS(split_album_level(m, {0.0, 0.0}, 0), ConfigError);

  Manifest missing{record("t1", "a")};  // no album id
  CHECK_THROWS_WITH_AS(split_album_level(missing, {0.5, 0.5}, 0),
                       doctest::Contains("album"), DataError);
  CHECK_NOTHROW(split_artist_level(missing, {0.5, 0.5}, 0));
}

TEST_CASE("balance cut trims rich artists and drops poor ones") {
  const Manifest m = artists_with_counts({30, 20, 3});
  const Manifest cut = balance_cut(m, 20, 5);

  const auto counts = artist_counts(cut);
  REQUIRE(counts.size() == 2);
  CHECK(counts.at("a0") == 20);
  CHECK(counts.at("a1") == 20);
  CHECK(counts.count("a2") == 0);

  // kept records appear in their original manifest order
  const auto all_ids = track_ids(m);
  const auto kept_ids = track_ids(cut);
  std::size_t cursor = 0;
  for (const auto& id : all_ids) {
    if (cursor < kept_ids.size() && kept_ids[cursor] == id) ++cursor;
  }
  CHECK(cursor == kept_ids.size());

  CHECK(track_ids(balance_cut(m, 20, 5)) == kept_ids);  // deterministic
  CHECK(balance_cut(m, 40, 5).empty());

  // exact-target artists come through untouched
  const Manifest exact = artists_with_counts({4, 4});
  CHECK(track_ids(balance_cut(exact, 4, 11)) == track_ids(exact));

  CHECK_THROWS_AS(balance_cut(m, 0, 5), ConfigError);
}

TEST_CASE("balance repeat cycles shuffled tracks up to the target") {
  const Manifest one = artists_with_counts({3});
  const Manifest rep = balance_repeat(one, 7, 2);
  REQUIRE(rep.size() == 7);

  std::map<std::string, int> multiplicity;
  for (const auto& r : rep) {
    CHECK(r.artist_id == "a0");
    multiplicity[r.track_id] += 1;
  }
  REQUIRE(multiplicity.size() == 3);
  std::vector<int> counts;
  for (const auto& [id, n] : multiplicity) {
    (void)id;
    counts.push_back(n);
  }
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<int>{2, 2, 3});

  const Manifest two = artists_with_counts({50, 3});
  const Manifest both = balance_repeat(two, 20, 2);
  CHECK(both.size() == 40);
  const auto by_artist = artist_counts(both);
  CHECK(by_artist.at("a0") == 20);
  CHECK(by_artist.at("a1") == 20);

  // the rich artist is subsampled without repetition
  std::set<std::string> distinct;
  for (const auto& r : both) {
    if (r.artist_id == "a0") distinct.insert(r.track_id);
  }
  CHECK(distinct.size() == 20);

  CHECK(track_ids(balance_repeat(two, 20, 2)) == track_ids(both));
  CHECK_THROWS_AS(balance_repeat(two, 0, 2), ConfigError);
}

TEST_CASE("group map round trips and rejects non-objects") {
  testutil::TempDir dir("groups");
  GroupMap groups;
  groups["g00"] = {"a", "b"};
  groups["g01"] = {"c", "d", "e"};
  const std::string path = dir.file("groups.json");
  save_group_map(groups, path);
  CHECK(load_group_map(path) == groups);

  const std::string bad = dir.file("bad.json");
  {
    std::ofstream f(bad);
    f << "[1,2]";
  }
  CHECK_THROWS_AS(load_group_map(bad), DataError);
  CHECK_THROWS_AS(load_group_map(dir.file("absent.json")), DataError);
}

TEST_CASE("homonym groups gather sorted member tracks") {
  Manifest m;
  for (const char* artist : {"a", "b", "c", "d", "e"}) {
    m.push_back(record(std::string(artist) + "_t1", artist));
    m.push_back(record(std::string(artist) + "_t0", artist));
  }
  GroupMap groups;
  groups["g00"] = {"a", "b"};
  groups["g01"] = {"c", "d", "e"};

  const auto built = build_homonym_groups(m, groups);
  REQUIRE(built.size() == 2);
  CHECK(built[0].group_id == "g00");
  CHECK(built[0].artist_ids == std::vector<std::string>{"a", "b"});
  CHECK(built[0].member_tracks == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(built[1].member_tracks == std::vector<std::size_t>{4, 5, 6, 7, 8, 9});

  GroupMap tiny;
  tiny["g"] = {"a"};
  CHECK_THROWS_AS(build_homonym_groups(m, tiny), DataError);

  GroupMap huge;
  huge["g"] = {"a", "b", "c", "d", "e"};
  CHECK_THROWS_WITH_AS(build_homonym_groups(m, huge), doctest::Contains("5"),
                       DataError);

  GroupMap ghost;
  ghost["g"] = {"a", "zz"};
  CHECK_THROWS_WITH_AS(build_homonym_groups(m, ghost), doctest::Contains("zz"),
                       DataError);
}

namespace {

SyntheticConfig small_synth() {
  SyntheticConfig c;
  c.train_artists = 3;
  c.tracks_per_artist = 3;
  c.duration_seconds = 1.0;
  c.partials = 3;
  c.jitter = 0.1;
  c.noise_level = 0.01;
  c.eval_groups = 1;
  c.tag_count = 2;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("synthetic generation is a pure function of the config") {
  testutil::TempDir d1("syn1"), d2("syn2");
  const SyntheticConfig cfg = small_synth();
  const SyntheticDataset s1 = generate_synthetic(cfg, d1.path());
  const SyntheticDataset s2 = generate_synthetic(cfg, d2.path());

  CHECK(testutil::slurp(d1.file("manifest.jsonl")) ==
        testutil::slurp(d2.file("manifest.jsonl")));
  CHECK(testutil::slurp(d1.file("groups.json")) ==
        testutil::slurp(d2.file("groups.json")));
  CHECK(s1.manifest.size() == s2.manifest.size());

  for (const auto& r : s1.manifest) {
    const std::string w1 = testutil::slurp(d1.file(r.audio_path));
    const std::string w2 = testutil::slurp(d2.file(r.audio_path));
    CHECK(w1 == w2);
    CHECK(!w1.empty());
  }

  SyntheticConfig other = cfg;
  other.seed = 43;
  testutil::TempDir d3("syn3");
  generate_synthetic(other, d3.path());
  CHECK(testutil::slurp(d1.file("audio/tr00_t00.wav")) !=
        testutil::slurp(d3.file("audio/tr00_t00.wav")));
}

TEST_CASE("synthetic tracks collapse to the signature when jitter and noise vanish") {
  testutil::TempDir dir("synflat");
  SyntheticConfig cfg = small_synth();
  cfg.jitter = 0.0;
  cfg.noise_level = 0.0;
  generate_synthetic(cfg, dir.path());

  const std::string t0 = testutil::slurp(dir.file("audio/tr00_t00.wav"));
  const std::string t1 = testutil::slurp(dir.file("audio/tr00_t01.wav"));
  const std::string other = testutil::slurp(dir.file("audio/tr01_t00.wav"));
  CHECK(t0 == t1);          // same artist, same bytes
  CHECK(t0 != other);       // disjoint partials differ
}

TEST_CASE("synthetic manifest carries the naming and split conventions") {
  testutil::TempDir dir("synman");
  SyntheticConfig cfg = small_synth();
  cfg.eval_groups = 2;
  const SyntheticDataset data = generate_synthetic(cfg, dir.path());

  REQUIRE(data.groups.size() == 2);
  int eval_artists = 0;
  for (const auto& [gid, members] : data.groups) {
    CHECK(gid.substr(0, 1) == "g");
    CHECK(members.size() >= 2);
    CHECK(members.size() <= 4);
    eval_artists += static_cast<int>(members.size());
    for (const auto& m : members) CHECK(m.substr(0, 2) == "ev");
  }
  CHECK(data.manifest.size() ==
        static_cast<std::size_t>((3 + eval_artists) * cfg.tracks_per_artist));

  for (const auto& r : data.manifest) {
    REQUIRE(r.tags.size() == 1);
    CHECK(r.tags[0].substr(0, 6) == "genre_");
    if (r.artist_id.substr(0, 2) == "ev") {
      CHECK(r.split == "eval");
    } else {
      // three tracks per artist: first stays train, last two validate
      const char t = r.track_id.back();
      CHECK(r.split == (t == '0' ? "train" : "val"));
    }
    const std::string expected_album =
        r.artist_id + "_alb" + std::to_string((r.track_id.back() - '0') / 2);
    CHECK(r.album_id == expected_album);
  }

  // tags cycle through the artist ordinals
  std::map<std::string, std::string> tag_of;
  for (const auto& r : data.manifest) tag_of[r.artist_id] = r.tags[0];
  CHECK(tag_of.at("tr00") == "genre_0");
  CHECK(tag_of.at("tr01") == "genre_1");
  CHECK(tag_of.at("tr02") == "genre_0");
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig c = small_synth();
  c.train_artists = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_synth();
  c.duration_seconds = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_synth();
  c.jitter = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_synth();
  c.tag_count = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config parsing strips comments and lets later keys win") {
  const Config c = Config::parse(
      "# leading comment\n"
      "\n"
      "train.alpha = 0.1  # trailing comment\n"
      "net.channels = 32, 64,64\n"
      "train.alpha=0.25\n"
      "flag = true\n"
      "seed=123456789012345\n",
      "inline");
  CHECK(c.get_double("train.alpha", 0.0) == doctest::Approx(0.25));
  CHECK(c.get_int_list("net.channels", {}) == std::vector<int>{32, 64, 64});
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_u64("seed", 0) == 123456789012345ULL);
  CHECK(c.get_string("missing", "fallback") == "fallback");
  CHECK(c.get_int("missing", 7) == 7);
  CHECK(c.has("flag"));
  CHECK_FALSE(c.has("missing"));
}

TEST_CASE("config parsing reports the offending line and key") {
  try {
    Config::parse("a=1\nnot an assignment\n", "conf");
    FAIL("expected parse failure");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conf:2") != std::string::npos);
  }

  const Config c = Config::parse("n=abc\nlist=1,,2\nbool=maybe\n", "conf");
  CHECK_THROWS_WITH_AS(c.get_int("n", 0), doctest::Contains("n"), ConfigError);
  CHECK_THROWS_AS(c.get_double("n", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_int_list("list", {}), ConfigError);
  CHECK_THROWS_AS(c.get_bool("bool", false), ConfigError);
  CHECK_THROWS_AS(c.get_u64("n", 0), ConfigError);

  CHECK_THROWS_WITH_AS(c.require_known_keys({"n", "list"}),
                       doctest::Contains("bool"), ConfigError);
  CHECK_NOTHROW(c.require_known_keys({"n", "list", "bool"}));

  CHECK_THROWS_AS(Config::load("/nonexistent/config.cfg"), DataError);
}
