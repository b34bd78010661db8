#include "artid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace artid {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in native byte order");

namespace {

constexpr char kMagic[8] = {'A', 'R', 'T', 'I', 'D', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

json pool_to_json(const PoolSpec& p) {
  return json{{"window", p.window}, {"stride", p.stride}, {"ceil_mode", p.ceil_mode}};
}

PoolSpec pool_from_json(const json& j) {
  PoolSpec p;
  p.window = j.at("window").get<int>();
  p.stride = j.at("stride").get<int>();
  p.ceil_mode = j.at("ceil_mode").get<bool>();
  return p;
}

json net_to_json(const NetworkConfig& c) {
  return json{{"embedding_dim", c.embedding_dim},
              {"input_mels", c.input_mels},
              {"channels", c.channels},
              {"kernel", c.kernel},
              {"pools", {pool_to_json(c.pools[0]), pool_to_json(c.pools[1]),
                         pool_to_json(c.pools[2])}},
              {"dropout_rate", c.dropout_rate},
              {"compression_gain", c.compression_gain}};
}

NetworkConfig net_from_json(const json& j) {
  NetworkConfig c;
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.input_mels = j.at("input_mels").get<int>();
  c.channels = j.at("channels").get<std::array<int, 3>>();
  c.kernel = j.at("kernel").get<int>();
  const auto& pools = j.at("pools");
  if (!pools.is_array() || pools.size() != 3) {
    throw PersistenceError("checkpoint metadata needs exactly three pool stages");
  }
  for (int i = 0; i < 3; ++i) c.pools[i] = pool_from_json(pools[i]);
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.compression_gain = j.at("compression_gain").get<double>();
  return c;
}

json features_to_json(const FeatureConfig& c) {
  return json{{"sample_rate", c.sample_rate},
              {"window_seconds", c.window_seconds},
              {"overlap_fraction", c.overlap_fraction},
              {"n_mels", c.n_mels},
              {"segment_seconds", c.segment_seconds}};
}

FeatureConfig features_from_json(const json& j) {
  FeatureConfig c;
  c.sample_rate = j.at("sample_rate").get<double>();
  c.window_seconds = j.at("window_seconds").get<double>();
  c.overlap_fraction = j.at("overlap_fraction").get<double>();
  c.n_mels = j.at("n_mels").get<int>();
  c.segment_seconds = j.at("segment_seconds").get<double>();
  return c;
}

void write_exact(std::ofstream& out, const void* data, std::size_t bytes,
                 const std::string& path) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw PersistenceError("failed writing checkpoint: " + path);
}

void read_exact(std::ifstream& in, void* data, std::size_t bytes,
                const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw PersistenceError("truncated checkpoint: " + path);
  }
}

std::vector<std::size_t> tensor_sizes(const Parameters<float>& p) {
  std::vector<std::size_t> sizes;
  p.for_each_tensor([&](const std::vector<float>& t) { sizes.push_back(t.size()); });
  return sizes;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  ck.net.validate();
  ck.features.validate();

  json meta;
  meta["net"] = net_to_json(ck.net);
  meta["features"] = features_to_json(ck.features);
  meta["seed"] = ck.seed;
  meta["shapes"] = tensor_sizes(ck.params);
  meta["optimizer"] = json{{"present", ck.has_optimizer},
                           {"learning_rate", ck.optimizer.learning_rate},
                           {"rho", ck.optimizer.rho},
                           {"epsilon", ck.optimizer.epsilon}};
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open checkpoint for writing: " + path);

  write_exact(out, kMagic, sizeof(kMagic), path);
  write_exact(out, &kVersion, sizeof(kVersion), path);
  const std::uint64_t meta_len = meta_str.size();
  write_exact(out, &meta_len, sizeof(meta_len), path);
  write_exact(out, meta_str.data(), meta_str.size(), path);

  ck.params.for_each_tensor([&](const std::vector<float>& t) {
    write_exact(out, t.data(), t.size() * sizeof(float), path);
  });
  if (ck.has_optimizer) {
    for (const auto& t : ck.optimizer.acc) {
      write_exact(out, t.data(), t.size() * sizeof(float), path);
    }
  }
  out.flush();
  if (!out) throw PersistenceError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open checkpoint: " + path);

  char magic[8];
  read_exact(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw PersistenceError("not a checkpoint file (bad magic): " + path);
  }
  std::uint32_t version = 0;
  read_exact(in, &version, sizeof(version), path);
  if (version != kVersion) {
    throw PersistenceError("unsupported checkpoint version " +
                           std::to_string(version) + ": " + path);
  }
  std::uint64_t meta_len = 0;
  read_exact(in, &meta_len, sizeof(meta_len), path);
  if (meta_len > (1u << 20)) {
    throw PersistenceError("implausible metadata size in checkpoint: " + path);
  }
  std::string meta_str(meta_len, '\0');
  read_exact(in, meta_str.data(), meta_len, path);

  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw PersistenceError("corrupt checkpoint metadata: " + std::string(e.what()));
  }

  Checkpoint ck;
  try {
    ck.net = net_from_json(meta.at("net"));
    ck.features = features_from_json(meta.at("features"));
    ck.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw PersistenceError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  try {
    ck.net.validate();
    ck.features.validate();
  } catch (const ConfigError& e) {
    throw PersistenceError("checkpoint metadata fails validation: " +
                           std::string(e.what()));
  }

  ck.params = Parameters<float>::zeros_like(ck.net);
  const auto expected = tensor_sizes(ck.params);
  std::vector<std::size_t> declared;
  try {
    declared = meta.at("shapes").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw PersistenceError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  if (declared != expected) {
    throw PersistenceError("checkpoint tensor shapes disagree with its config: " + path);
  }

  ck.params.for_each_tensor([&](std::vector<float>& t) {
    read_exact(in, t.data(), t.size() * sizeof(float), path);
  });

  const auto& opt = meta.at("optimizer");
  ck.has_optimizer = opt.at("present").get<bool>();
  ck.optimizer = OptimizerState<float>::zeros_like(
      ck.params, opt.at("learning_rate").get<double>(), opt.at("rho").get<double>(),
      opt.at("epsilon").get<double>());
  if (ck.has_optimizer) {
    for (auto& t : ck.optimizer.acc) {
      read_exact(in, t.data(), t.size() * sizeof(float), path);
    }
  }
  return ck;
}

void require_compatible(const Checkpoint& ck, const NetworkConfig& expected) {
  if (!(ck.net == expected)) {
    throw PersistenceError(
        "checkpoint network config does not match the requested config");
  }
}

}  // namespace artid
