#include "mg/gridcore/storage_element.hpp"

#include "mg/crypto.hpp"

namespace mg::gridcore {

StorageElement::StorageElement(std::string se_id, std::uint64_t cache_capacity)
    : se_id_(std::move(se_id)), cache_capacity_(cache_capacity) {}

void StorageElement::set_remote_fetcher(RemoteFetcher fetcher) {
  fetcher_ = std::move(fetcher);
}

void StorageElement::put(const std::string& guid, const Bytes& bytes) {
  if (local_.count(guid)) fail("AlreadyExists", "object " + guid + " at " + se_id_);
  local_[guid] = bytes;
  local_digest_[guid] = crypto::sha256_hex(bytes);
}

bool StorageElement::has_local(const std::string& guid) const {
  return local_.count(guid) > 0;
}

bool StorageElement::has(const std::string& guid) const {
  return local_.count(guid) > 0 || cache_.count(guid) > 0;
}

void StorageElement::remove(const std::string& guid) {
  local_.erase(guid);
  local_digest_.erase(guid);
  auto it = cache_.find(guid);
  if (it != cache_.end()) {
    cache_used_ -= it->second.first.size();
    cache_order_.erase(it->second.second);
    cache_.erase(it);
  }
}

std::optional<std::string> StorageElement::digest_of(const std::string& guid) const {
  auto it = local_digest_.find(guid);
  if (it != local_digest_.end()) return it->second;
  auto c = cache_.find(guid);
  if (c != cache_.end()) return crypto::sha256_hex(c->second.first);
  return std::nullopt;
}

void StorageElement::cache_insert(const std::string& guid, Bytes bytes) {
  if (bytes.size() > cache_capacity_) {
    fail("CapacityExceeded", "object of " + std::to_string(bytes.size()) +
                                 " bytes exceeds cache capacity");
  }
  while (cache_used_ + bytes.size() > cache_capacity_ && !cache_order_.empty()) {
    const std::string& victim = cache_order_.back();
    auto it = cache_.find(victim);
    cache_used_ -= it->second.first.size();
    cache_.erase(it);
    cache_order_.pop_back();
  }
  cache_order_.push_front(guid);
  cache_used_ += bytes.size();
  cache_[guid] = {std::move(bytes), cache_order_.begin()};
}

void StorageElement::put_cached(const std::string& guid, Bytes bytes) {
  if (local_.count(guid) || cache_.count(guid)) return;
  cache_insert(guid, std::move(bytes));
}

Bytes StorageElement::get(const std::string& guid) {
  auto local = local_.find(guid);
  if (local != local_.end()) return local->second;

  auto cached = cache_.find(guid);
  if (cached != cache_.end()) {
    // Refresh LRU position.
    cache_order_.erase(cached->second.second);
    cache_order_.push_front(guid);
    cached->second.second = cache_order_.begin();
    return cached->second.first;
  }

  if (!fetcher_) fail("NotFound", "object " + guid + " at " + se_id_);
  auto remote = fetcher_(guid);
  if (!remote) fail("NotFound", "object " + guid + " unavailable from any replica");
  Bytes bytes = std::move(*remote);
  cache_insert(guid, bytes);
  return bytes;
}

std::vector<SeObjectInfo> StorageElement::objects() const {
  std::vector<SeObjectInfo> out;
  for (const auto& [guid, bytes] : local_) {
    out.push_back({guid, bytes.size(), local_digest_.at(guid), false});
  }
  for (const auto& [guid, entry] : cache_) {
    out.push_back({guid, entry.first.size(), crypto::sha256_hex(entry.first), true});
  }
  return out;
}

}  // namespace mg::gridcore
