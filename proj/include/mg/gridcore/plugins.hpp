#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mg/util.hpp"

// Algorithm plugins: executable code is restricted to named built-ins
// selected by registered name. Each plugin is a deterministic function
// from input byte strings to one output byte string.
namespace mg::gridcore {

using util::Bytes;

using AlgorithmFn = std::function<Bytes(const std::vector<Bytes>& inputs)>;

struct RegisteredAlgorithm {
  std::string name;
  std::string checksum;  // of the stored code artifact
  int version = 1;
};

class AlgorithmRegistry {
 public:
  AlgorithmRegistry();  // built-ins: checksum, histogram, noop-cade

  bool is_builtin(const std::string& name) const;

  // mi.addAlgorithm: stores the artifact checksum; re-registration with a
  // different checksum bumps the version. Errors: UnknownPlugin,
  // ChecksumMismatch (declared checksum does not match artifact bytes).
  void register_algorithm(const std::string& name, const Bytes& artifact,
                          const std::string& declared_checksum);

  bool registered(const std::string& name) const;
  const RegisteredAlgorithm& info(const std::string& name) const;  // UnknownAlgorithm
  std::vector<RegisteredAlgorithm> list() const;

  Bytes run(const std::string& name, const std::vector<Bytes>& inputs) const;

 private:
  std::map<std::string, AlgorithmFn> builtins_;
  std::map<std::string, RegisteredAlgorithm> registered_;
};

}  // namespace mg::gridcore
