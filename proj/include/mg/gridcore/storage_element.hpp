#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mg/error.hpp"
#include "mg/util.hpp"

// Storage Element: persistent local objects keyed by guid plus a bounded
// LRU cache for remote temporaries fetched on demand.
namespace mg::gridcore {

using util::Bytes;

struct SeObjectInfo {
  std::string guid;
  std::uint64_t size = 0;
  std::string checksum;  // SHA-256 hex
  bool cached = false;   // true for remote temporaries
};

class StorageElement {
 public:
  StorageElement(std::string se_id, std::uint64_t cache_capacity = 64 * 1024 * 1024);

  const std::string& id() const { return se_id_; }

  // Fetches a remote replica's bytes; wired by the deployment to the FTD /
  // wire layer. Returns nullopt when no replica is reachable.
  using RemoteFetcher = std::function<std::optional<Bytes>(const std::string& guid)>;
  void set_remote_fetcher(RemoteFetcher fetcher);

  void put(const std::string& guid, const Bytes& bytes);     // errors: AlreadyExists
  Bytes get(const std::string& guid);                        // errors: NotFound,
                                                             // CapacityExceeded, ChecksumMismatch
  // Inserts a remote temporary into the LRU cache (evicting as needed).
  void put_cached(const std::string& guid, Bytes bytes);
  bool has_local(const std::string& guid) const;             // cache excluded
  bool has(const std::string& guid) const;                   // cache included
  void remove(const std::string& guid);

  std::optional<std::string> digest_of(const std::string& guid) const;
  std::vector<SeObjectInfo> objects() const;  // local + cached, guid order

  std::uint64_t cache_bytes_used() const { return cache_used_; }
  std::uint64_t cache_capacity() const { return cache_capacity_; }

 private:
  void cache_insert(const std::string& guid, Bytes bytes);

  std::string se_id_;
  std::uint64_t cache_capacity_;
  std::uint64_t cache_used_ = 0;
  std::map<std::string, Bytes> local_;
  std::map<std::string, std::string> local_digest_;
  // LRU bookkeeping for remote temporaries: most recent at list front.
  std::list<std::string> cache_order_;
  std::map<std::string, std::pair<Bytes, std::list<std::string>::iterator>> cache_;
  RemoteFetcher fetcher_;
};

}  // namespace mg::gridcore
