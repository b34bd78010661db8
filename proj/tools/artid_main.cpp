// artid: train and evaluate artist embeddings from audio.
//
// Subcommands: synth, train, embed, eval-classify, eval-verify, cluster.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "artid/checkpoint.hpp"
#include "artid/cluster.hpp"
#include "artid/config.hpp"
#include "artid/dataset.hpp"
#include "artid/eval.hpp"
#include "artid/pipeline.hpp"
#include "artid/synth.hpp"
#include "artid/textio.hpp"
#include "artid/triplet.hpp"

namespace {

using namespace artid;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  std::vector<std::string> overrides;
};

const std::vector<std::string> kKnownKeys = {
    "features.sample_rate", "features.window_seconds", "features.overlap",
    "features.n_mels", "features.segment_seconds",
    "net.embedding_dim", "net.channels", "net.kernel", "net.pool_windows",
    "net.pool_strides", "net.pool_ceil", "net.dropout", "net.compression_gain",
    "train.alpha", "train.artists_per_batch", "train.samples_per_artist",
    "train.tag_bias_p", "train.epochs", "train.max_iterations", "train.patience",
    "train.eval_every", "train.val_triplets", "train.collapse_threshold",
    "train.collapse_patience",
    "synth.artists", "synth.tracks_per_artist", "synth.duration_seconds",
    "synth.partials", "synth.jitter", "synth.noise", "synth.eval_groups",
    "synth.tag_count", "synth.sample_rate",
    "eval.model_tracks", "eval.segments",
    "cluster.folds", "cluster.grid_size",
};

Config build_config(const CommonArgs& args) {
  Config config;
  if (!args.config_path.empty()) config = Config::load(args.config_path);
  for (const auto& override_kv : args.overrides) {
    const auto eq = override_kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects KEY=VALUE, got '" + override_kv + "'");
    }
    config.set(override_kv.substr(0, eq), override_kv.substr(eq + 1));
  }
  config.require_known_keys(kKnownKeys);
  return config;
}

FeatureConfig feature_config(const Config& c) {
  FeatureConfig f;
  f.sample_rate = c.get_double("features.sample_rate", f.sample_rate);
  f.window_seconds = c.get_double("features.window_seconds", f.window_seconds);
  f.overlap_fraction = c.get_double("features.overlap", f.overlap_fraction);
  f.n_mels = c.get_int("features.n_mels", f.n_mels);
  f.segment_seconds = c.get_double("features.segment_seconds", f.segment_seconds);
  f.validate();
  return f;
}

NetworkConfig network_config(const Config& c, const FeatureConfig& features) {
  NetworkConfig n;
  n.embedding_dim = c.get_int("net.embedding_dim", n.embedding_dim);
  n.input_mels = features.n_mels;
  const auto channels = c.get_int_list("net.channels", {16, 32, 64});
  const auto windows = c.get_int_list("net.pool_windows", {3, 3, 3});
  const auto strides = c.get_int_list("net.pool_strides", {2, 3, 3});
  const auto ceils = c.get_int_list("net.pool_ceil", {1, 0, 0});
  if (channels.size() != 3 || windows.size() != 3 || strides.size() != 3 ||
      ceils.size() != 3) {
    throw ConfigError("net.channels and net.pool_* need exactly three entries");
  }
  for (int i = 0; i < 3; ++i) {
    n.channels[i] = channels[i];
    n.pools[i] = PoolSpec{windows[i], strides[i], ceils[i] != 0};
  }
  n.kernel = c.get_int("net.kernel", n.kernel);
  n.dropout_rate = c.get_double("net.dropout", n.dropout_rate);
  n.compression_gain = c.get_double("net.compression_gain", n.compression_gain);
  n.validate();
  return n;
}

TrainConfig train_config(const Config& c, std::uint64_t seed) {
  TrainConfig t;
  t.alpha = c.get_double("train.alpha", t.alpha);
  t.artists_per_batch = c.get_int("train.artists_per_batch", t.artists_per_batch);
  t.samples_per_artist = c.get_int("train.samples_per_artist", t.samples_per_artist);
  t.tag_bias_p = c.get_double("train.tag_bias_p", t.tag_bias_p);
  t.epochs = c.get_int("train.epochs", t.epochs);
  t.max_iterations = c.get_int("train.max_iterations", t.max_iterations);
  t.patience = c.get_int("train.patience", t.patience);
  t.eval_every = c.get_int("train.eval_every", t.eval_every);
  t.val_triplets = c.get_int("train.val_triplets", t.val_triplets);
  t.collapse_threshold = c.get_double("train.collapse_threshold", t.collapse_threshold);
  t.collapse_patience = c.get_int("train.collapse_patience", t.collapse_patience);
  t.seed = seed;
  t.validate();
  return t;
}

struct ReportRow {
  std::string task;
  std::string fold;
  std::string metric;
  std::string value;
};

void write_report(const std::vector<ReportRow>& rows, const std::string& out_path) {
  std::ostringstream buffer;
  CsvWriter csv(buffer);
  csv.row({"task", "fold", "metric", "value"});
  for (const auto& r : rows) csv.row({r.task, r.fold, r.metric, r.value});
  if (out_path.empty()) {
    std::cout << buffer.str();
  } else {
    write_text_file(out_path, buffer.str());
  }
}

std::string manifest_dir(const std::string& manifest_path) {
  return std::filesystem::path(manifest_path).parent_path().string();
}

// --- subcommands ---------------------------------------------------------

int cmd_synth(const CommonArgs& args) {
  const Config config = build_config(args);
  if (args.out.empty()) throw ConfigError("synth needs --out DIR");
  SyntheticConfig s;
  s.train_artists = config.get_int("synth.artists", s.train_artists);
  s.tracks_per_artist = config.get_int("synth.tracks_per_artist", s.tracks_per_artist);
  s.duration_seconds = config.get_double("synth.duration_seconds", s.duration_seconds);
  s.partials = config.get_int("synth.partials", s.partials);
  s.jitter = config.get_double("synth.jitter", s.jitter);
  s.noise_level = config.get_double("synth.noise", s.noise_level);
  s.eval_groups = config.get_int("synth.eval_groups", s.eval_groups);
  s.tag_count = config.get_int("synth.tag_count", s.tag_count);
  s.sample_rate = config.get_double("synth.sample_rate", s.sample_rate);
  s.seed = args.seed;
  const SyntheticDataset dataset = generate_synthetic(s, args.out, args.threads);
  std::cerr << "wrote " << dataset.manifest.size() << " tracks and "
            << dataset.groups.size() << " held-out groups to " << args.out << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& manifest_path,
              const std::string& history_path) {
  const Config config = build_config(args);
  if (args.out.empty()) throw ConfigError("train needs --out CHECKPOINT");
  const FeatureConfig features = feature_config(config);
  const NetworkConfig net = network_config(config, features);
  const TrainConfig tc = train_config(config, args.seed);

  const Manifest manifest = load_manifest(manifest_path);
  const PipelineData data = load_training_data(manifest, manifest_dir(manifest_path),
                                               features, args.threads);
  const TrainResult result = train(data.train, data.val, net, tc, args.threads);

  Checkpoint ck;
  ck.net = net;
  ck.features = features;
  ck.seed = args.seed;
  ck.params = result.params;
  ck.has_optimizer = true;
  ck.optimizer = result.optimizer;
  save_checkpoint(ck, args.out);

  const std::string history_out =
      history_path.empty() ? args.out + ".history.csv" : history_path;
  save_history_csv(result.history, history_out);
  std::cerr << "trained " << result.iterations_run << " iterations (stop: "
            << result.stop_reason << ")\n";
  return 0;
}

int cmd_embed(const CommonArgs& args, const std::string& checkpoint_path,
              const std::string& manifest_path, const std::string& split) {
  const Config config = build_config(args);
  const int segments = config.get_int("eval.segments", 10);
  const Checkpoint ck = load_checkpoint(checkpoint_path);

  Manifest manifest = load_manifest(manifest_path);
  if (!split.empty()) manifest = filter_split(manifest, split);
  if (manifest.empty()) {
    throw DataError(split.empty() ? "manifest is empty"
                                  : "no records with split=" + split);
  }
  const auto records = embed_tracks(manifest, manifest_dir(manifest_path), ck,
                                    segments, args.threads);
  if (args.out.empty()) {
    std::cout << embeddings_jsonl(records);
  } else {
    save_embeddings(records, args.out);
  }
  std::cerr << "embedded " << records.size() << " tracks\n";
  return 0;
}

// Seeded per-artist split into model tracks and test tracks.
struct EvalSplit {
  std::vector<ArtistModel> models;  // sorted by artist_id
  std::vector<EmbeddingRecord> tests;
};

EvalSplit make_eval_split(const std::vector<EmbeddingRecord>& records,
                          int model_tracks, std::uint64_t seed) {
  if (model_tracks < 1) throw ConfigError("eval.model_tracks must be >= 1");
  std::map<std::string, std::vector<EmbeddingRecord>> by_artist;
  for (const auto& r : records) by_artist[r.artist_id].push_back(r);

  EvalSplit split;
  std::size_t artist_index = 0;
  for (auto& [artist_id, tracks] : by_artist) {
    if (tracks.size() <= static_cast<std::size_t>(model_tracks)) {
      throw DataError("artist '" + artist_id + "' has " +
                      std::to_string(tracks.size()) +
                      " tracks; needs more than eval.model_tracks=" +
                      std::to_string(model_tracks) + " to leave test tracks");
    }
    std::sort(tracks.begin(), tracks.end(),
              [](const EmbeddingRecord& a, const EmbeddingRecord& b) {
                return a.track_id < b.track_id;
              });
    Rng rng(derive_seed(seed, 0x6576616c, artist_index++));
    rng.shuffle(tracks);
    std::vector<std::vector<float>> members;
    for (int k = 0; k < model_tracks; ++k) members.push_back(tracks[k].vector);
    split.models.push_back(build_artist_model(artist_id, members));
    for (std::size_t k = model_tracks; k < tracks.size(); ++k) {
      split.tests.push_back(tracks[k]);
    }
  }
  return split;
}

int cmd_eval_classify(const CommonArgs& args, const std::string& embeddings_path) {
  const Config config = build_config(args);
  const int model_tracks = config.get_int("eval.model_tracks", 15);
  const auto records = load_embeddings(embeddings_path);
  if (records.empty()) throw DataError("embeddings file is empty");
  const EvalSplit split = make_eval_split(records, model_tracks, args.seed);
  if (split.tests.empty()) throw DataError("no test tracks after the model split");

  std::vector<ReportRow> rows;
  for (const auto mode : {ClassifyMode::centroid, ClassifyMode::per_track}) {
    std::vector<std::string> assigned, truth;
    for (const auto& t : split.tests) {
      assigned.push_back(split.models[classify_nn(t.vector, split.models, mode)].artist_id);
      truth.push_back(t.artist_id);
    }
    const double accuracy = classification_accuracy(assigned, truth);
    rows.push_back({mode == ClassifyMode::centroid ? "classify_centroid"
                                                   : "classify_per_track",
                    "overall", "accuracy", format_double(accuracy)});
  }
  write_report(rows, args.out);
  return 0;
}

int cmd_eval_verify(const CommonArgs& args, const std::string& embeddings_path,
                    const std::string& curve_out) {
  const Config config = build_config(args);
  const int model_tracks = config.get_int("eval.model_tracks", 15);
  const auto records = load_embeddings(embeddings_path);
  if (records.empty()) throw DataError("embeddings file is empty");
  const EvalSplit split = make_eval_split(records, model_tracks, args.seed);
  if (split.tests.empty()) throw DataError("no test tracks after the model split");

  const auto scores = verification_scores(split.tests, split.models);
  const EerResult eer = compute_eer(scores);
  std::vector<ReportRow> rows;
  rows.push_back({"verify", "overall", "eer", format_double(eer.eer)});
  rows.push_back({"verify", "overall", "threshold", format_double(eer.threshold)});
  write_report(rows, args.out);

  std::string curve_path = curve_out;
  if (curve_path.empty() && !args.out.empty()) {
    curve_path = args.out;
    const std::string suffix = ".csv";
    if (curve_path.size() > suffix.size() &&
        curve_path.compare(curve_path.size() - suffix.size(), suffix.size(),
                           suffix) == 0) {
      curve_path.resize(curve_path.size() - suffix.size());
    }
    curve_path += "_curve.csv";
  }
  if (!curve_path.empty()) {
    std::ostringstream buffer;
    CsvWriter csv(buffer);
    csv.row({"threshold", "fpr", "fnr"});
    for (const auto& p : error_curve(scores)) {
      csv.row({format_double(p.threshold), format_double(p.fpr),
               format_double(p.fnr)});
    }
    write_text_file(curve_path, buffer.str());
  }
  return 0;
}

int cmd_cluster(const CommonArgs& args, const std::string& embeddings_path,
                const std::string& groups_path) {
  const Config config = build_config(args);
  const int folds = config.get_int("cluster.folds", 5);
  const int grid_size = config.get_int("cluster.grid_size", 64);

  const auto records = load_embeddings(embeddings_path);
  const GroupMap group_map = load_group_map(groups_path);

  std::map<std::string, std::vector<const EmbeddingRecord*>> by_artist;
  for (const auto& r : records) by_artist[r.artist_id].push_back(&r);

  std::vector<ClusterGroup> groups;
  for (const auto& [group_id, artists] : group_map) {
    ClusterGroup g;
    g.group_id = group_id;
    for (std::size_t a = 0; a < artists.size(); ++a) {
      const auto it = by_artist.find(artists[a]);
      if (it == by_artist.end()) {
        throw DataError("group '" + group_id + "' references artist '" +
                        artists[a] + "' absent from the embeddings");
      }
      for (const auto* r : it->second) {
        g.points.push_back(r->vector);
        g.labels.push_back(static_cast<int>(a));
      }
    }
    groups.push_back(std::move(g));
  }

  const CrossValResult result = cross_validate(groups, folds, grid_size, args.seed);
  std::vector<ReportRow> rows;
  for (const auto& f : result.folds) {
    const std::string fold = std::to_string(f.fold);
    rows.push_back({"cluster", fold, "ari", format_double(f.ari)});
    rows.push_back({"cluster", fold, "ami", format_double(f.ami)});
    rows.push_back({"cluster", fold, "threshold", format_double(f.threshold)});
  }
  rows.push_back({"cluster", "overall", "ari", format_double(result.mean_ari)});
  rows.push_back({"cluster", "overall", "ami", format_double(result.mean_ami)});
  write_report(rows, args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"artist embeddings: synthesis, training, and evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string manifest_path, checkpoint_path, embeddings_path, groups_path;
  std::string history_path, split, curve_out;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "key=value configuration file");
    cmd->add_option("--seed", args.seed, "random seed")->required();
    cmd->add_option("--out", args.out, "output path");
    cmd->add_option("--threads", args.threads, "worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--set", args.overrides,
                    "override a config key (KEY=VALUE, repeatable)");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "train an embedding model");
  add_common(train);
  train->add_option("--manifest", manifest_path, "training manifest")->required();
  train->add_option("--history", history_path, "history CSV path");

  CLI::App* embed = app.add_subcommand("embed", "compute track embeddings");
  add_common(embed);
  embed->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  embed->add_option("--manifest", manifest_path, "manifest of tracks")->required();
  embed->add_option("--split", split, "restrict to records with this split");

  CLI::App* classify = app.add_subcommand("eval-classify", "artist classification");
  add_common(classify);
  classify->add_option("--embeddings", embeddings_path, "embeddings JSONL")->required();

  CLI::App* verify = app.add_subcommand("eval-verify", "artist verification EER");
  add_common(verify);
  verify->add_option("--embeddings", embeddings_path, "embeddings JSONL")->required();
  verify->add_option("--curve-out", curve_out, "FPR/FNR curve CSV path");

  CLI::App* cluster = app.add_subcommand("cluster", "homonym clustering ARI/AMI");
  add_common(cluster);
  cluster->add_option("--embeddings", embeddings_path, "embeddings JSONL")->required();
  cluster->add_option("--groups", groups_path, "homonym group map JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (train->parsed()) return cmd_train(args, manifest_path, history_path);
    if (embed->parsed()) return cmd_embed(args, checkpoint_path, manifest_path, split);
    if (classify->parsed()) return cmd_eval_classify(args, embeddings_path);
    if (verify->parsed()) return cmd_eval_verify(args, embeddings_path, curve_out);
    if (cluster->parsed()) return cmd_cluster(args, embeddings_path, groups_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
