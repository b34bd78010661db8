#ifndef ARTID_CONFIG_HPP_
#define ARTID_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace artid {

// Flat key=value run configuration. '#' starts a comment; blank lines are
// skipped. Later assignments (and command-line overrides) win.
class Config {
 public:
  static Config load(const std::string& path);
  static Config parse(const std::string& text, const std::string& origin);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  // Rejects keys outside `known` so typos fail fast instead of silently
  // running with defaults.
  void require_known_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace artid

#endif  // ARTID_CONFIG_HPP_
