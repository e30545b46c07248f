#include "mg/gridcore/config_tree.hpp"

#include "mg/util.hpp"

namespace mg::gridcore {

void ConfigTree::load(const std::string& path, const std::string& value) {
  values_[path] = value;
  cache_.clear();  // snapshot changed; cached resolutions are stale
}

void ConfigTree::load_text(const std::string& text) {
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("KeyMissing", "bad config line: " + line);
    values_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  cache_.clear();
}

std::optional<std::string> ConfigTree::try_get(const std::string& vo, const std::string& site,
                                               const std::string& host,
                                               const std::string& key) {
  const std::string cache_key = vo + "\x1f" + site + "\x1f" + host + "\x1f" + key;
  auto cached = cache_.find(cache_key);
  if (cached != cache_.end()) {
    ++hits_;
    return cached->second;
  }
  // host overrides site overrides vo
  for (const std::string& path : {"/" + vo + "/" + site + "/" + host + "/" + key,
                                  "/" + vo + "/" + site + "/" + key,
                                  "/" + vo + "/" + key}) {
    auto it = values_.find(path);
    if (it != values_.end()) {
      ++misses_;
      cache_[cache_key] = it->second;
      return it->second;
    }
  }
  return std::nullopt;
}

const std::string& ConfigTree::get(const std::string& vo, const std::string& site,
                                   const std::string& host, const std::string& key) {
  auto v = try_get(vo, site, host, key);
  if (!v) fail("KeyMissing", "/" + vo + "/" + site + "/" + host + "/" + key);
  const std::string cache_key = vo + "\x1f" + site + "\x1f" + host + "\x1f" + key;
  return cache_[cache_key];
}

std::int64_t ConfigTree::get_int(const std::string& vo, const std::string& site,
                                 const std::string& host, const std::string& key,
                                 std::int64_t fallback) {
  auto v = try_get(vo, site, host, key);
  if (!v) return fallback;
  return std::stoll(*v);
}

}  // namespace mg::gridcore
