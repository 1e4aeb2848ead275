#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "focus/layer.hpp"
#include "focus/train.hpp"

namespace focus::cli {

enum class KeyType { Int, Real, Bool, String };

struct KeyDef {
  std::string name;
  KeyType type;
  std::string default_value;
  std::string doc;
};

// Every accepted config key with its default.
const std::vector<KeyDef>& schema();

/// Resolved key=value settings. Every key in schema() is always present.
class Settings {
 public:
  Settings();

  // Throws ConfigError for an unknown key or a value that does not parse.
  void set(const std::string& key, const std::string& value, const std::string& origin);
  const std::string& raw(const std::string& key) const;
  // "default", "env", "file" or "flag".
  const std::string& origin(const std::string& key) const;
  bool is_default(const std::string& key) const { return origin(key) == "default"; }

  int64_t get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origins_;
};

// Lines of `key = value`; '#' starts a comment. ConfigError names the key or
// the path when the file cannot be read.
void apply_config_file(Settings& s, const std::filesystem::path& path);

// Precedence: flags > config file > FOCUS_SEED (seed only) > defaults.
Settings resolve(const std::string& config_path, const std::map<std::string, std::string>& flags,
                 const char* env_seed);

// Model shape from settings, with auto values (0) filled in.
FocusConfig focus_config(const Settings& s);
train::TrainConfig train_config(const Settings& s);

// Exit codes: 0 ok, 1 other failure, 2 config, 3 artifact/format, 4 divergence.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace focus::cli
