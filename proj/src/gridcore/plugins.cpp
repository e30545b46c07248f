#include "mg/gridcore/plugins.hpp"

#include <array>

#include "mg/crypto.hpp"
#include "mg/error.hpp"

namespace mg::gridcore {

AlgorithmRegistry::AlgorithmRegistry() {
  builtins_["checksum"] = [](const std::vector<Bytes>& inputs) {
    Bytes all;
    for (const auto& in : inputs) all.insert(all.end(), in.begin(), in.end());
    return util::to_bytes(crypto::sha256_hex(all) + "\n");
  };
  builtins_["histogram"] = [](const std::vector<Bytes>& inputs) {
    std::array<std::uint64_t, 16> buckets{};
    std::uint64_t total = 0;
    for (const auto& in : inputs) {
      for (std::uint8_t b : in) {
        buckets[b >> 4] += 1;
        ++total;
      }
    }
    std::string out = "bytes=" + std::to_string(total) + "\n";
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      out += "bucket" + std::to_string(i) + "=" + std::to_string(buckets[i]) + "\n";
    }
    return util::to_bytes(out);
  };
  // Stand-in for the out-of-scope CADe detector: reports zero findings.
  builtins_["noop-cade"] = [](const std::vector<Bytes>& inputs) {
    return util::to_bytes("CADE findings=0 inputs=" + std::to_string(inputs.size()) + "\n");
  };
}

bool AlgorithmRegistry::is_builtin(const std::string& name) const {
  return builtins_.count(name) > 0;
}

void AlgorithmRegistry::register_algorithm(const std::string& name, const Bytes& artifact,
                                           const std::string& declared_checksum) {
  if (!is_builtin(name)) fail("UnknownPlugin", name + " is not a built-in plugin");
  std::string actual = crypto::sha256_hex(artifact);
  if (actual != declared_checksum) {
    fail("ChecksumMismatch", "artifact digest " + actual + " != declared " + declared_checksum);
  }
  auto it = registered_.find(name);
  if (it == registered_.end()) {
    registered_[name] = RegisteredAlgorithm{name, declared_checksum, 1};
  } else if (it->second.checksum != declared_checksum) {
    it->second.checksum = declared_checksum;
    it->second.version += 1;
  }
}

bool AlgorithmRegistry::registered(const std::string& name) const {
  return registered_.count(name) > 0;
}

const RegisteredAlgorithm& AlgorithmRegistry::info(const std::string& name) const {
  auto it = registered_.find(name);
  if (it == registered_.end()) fail("UnknownAlgorithm", name);
  return it->second;
}

std::vector<RegisteredAlgorithm> AlgorithmRegistry::list() const {
  std::vector<RegisteredAlgorithm> out;
  for (const auto& [name, info] : registered_) out.push_back(info);
  return out;
}

Bytes AlgorithmRegistry::run(const std::string& name, const std::vector<Bytes>& inputs) const {
  if (!registered(name)) fail("UnknownAlgorithm", name);
  return builtins_.at(name)(inputs);
}

}  // namespace mg::gridcore
