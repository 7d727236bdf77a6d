#include <nlohmann/json.hpp>

#include "typegan/checkpoint.hpp"
#include "typegan/cli.hpp"
#include "typegan/errors.hpp"

namespace typegan::cli {

const Value& Settings::get(const std::string& dotted) const {
  auto it = values_.find(dotted);
  if (it == values_.end()) throw Error(ErrorKind::InvalidConfig, "missing required setting " + dotted);
  return it->second;
}

std::string Settings::str(const std::string& dotted) const {
  const Value& v = get(dotted);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorKind::InvalidConfig, dotted + " must be a string");
}

std::int64_t Settings::integer(const std::string& dotted) const {
  const Value& v = get(dotted);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw Error(ErrorKind::InvalidConfig, dotted + " must be an integer");
}

double Settings::real(const std::string& dotted) const {
  const Value& v = get(dotted);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw Error(ErrorKind::InvalidConfig, dotted + " must be a number");
}

bool Settings::flag(const std::string& dotted) const {
  const Value& v = get(dotted);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorKind::InvalidConfig, dotted + " must be a boolean");
}

std::string Settings::canonical() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : values_) {
    std::visit([&](const auto& x) { j[k] = x; }, v);
  }
  return j.dump();
}

std::string Settings::hash() const { return hash_hex(fnv1a64(canonical())); }

}  // namespace typegan::cli
