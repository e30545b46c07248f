#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mg/error.hpp"

// Configuration manager: a read-only snapshot of hierarchical keys
// `/<vo>/<site>/<host>/<key>` with host -> site -> vo fallback and a
// lookup cache (the LDAP-cache emulation).
namespace mg::gridcore {

class ConfigTree {
 public:
  // Snapshot loading; `path` is the full hierarchical key.
  void load(const std::string& path, const std::string& value);
  void load_text(const std::string& text);  // "path=value" lines

  // Fallback resolution with hit/miss counters: the first lookup of a
  // (vo,site,host,key) tuple misses and caches; repeats hit.
  const std::string& get(const std::string& vo, const std::string& site,
                         const std::string& host, const std::string& key);
  std::optional<std::string> try_get(const std::string& vo, const std::string& site,
                                     const std::string& host, const std::string& key);

  std::int64_t get_int(const std::string& vo, const std::string& site,
                       const std::string& host, const std::string& key,
                       std::int64_t fallback);

  std::uint64_t cache_hits() const { return hits_; }
  std::uint64_t cache_misses() const { return misses_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> cache_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace mg::gridcore
