#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace typegan::cli {

inline constexpr char kVersion[] = "0.1.0";

enum class ValueType { String, Int, Float, Bool };

using Value = std::variant<std::string, std::int64_t, double, bool>;

/// One setting: TOML key `section.key` (top-level when section is empty) and
/// the command-line flag that overrides it.
struct OptionSpec {
  std::string section;
  std::string key;
  std::string flag;  // without leading dashes
  ValueType type;
  Value fallback;
  bool has_fallback;
  std::string help;

  std::string dotted() const { return section.empty() ? key : section + "." + key; }
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<std::string> sections;  // "" is the top level
};

const std::vector<OptionSpec>& option_registry();
const std::vector<CommandSpec>& command_registry();

/// Options available to a subcommand, in registry order.
std::vector<const OptionSpec*> options_for(const std::string& command);

/// Resolved settings: defaults, then the TOML file, then flags.
class Settings {
 public:
  void set(const std::string& dotted, Value v) { values_[dotted] = std::move(v); }
  bool has(const std::string& dotted) const { return values_.contains(dotted); }
  /// Whether the value came from the config file or a flag.
  bool given(const std::string& dotted) const { return given_.contains(dotted); }
  void mark_given(const std::string& dotted) { given_[dotted] = true; }

  std::string str(const std::string& dotted) const;
  std::int64_t integer(const std::string& dotted) const;
  double real(const std::string& dotted) const;
  bool flag(const std::string& dotted) const;

  /// Canonical JSON text of all values, used for the config hash.
  std::string canonical() const;
  std::string hash() const;

 private:
  const Value& get(const std::string& dotted) const;
  std::map<std::string, Value> values_;
  std::map<std::string, bool> given_;
};

/// Entry point shared by the executable and tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace typegan::cli
