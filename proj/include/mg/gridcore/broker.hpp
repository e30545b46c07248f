#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mg/gridcore/jdl.hpp"
#include "mg/gridcore/tasks.hpp"

// Matchmaking: the broker assigns WAITING tasks to computing elements
// whose advertisement satisfies the task requirements, preferring full
// input-data locality, then least queue_length, then lexicographic ce_id.
namespace mg::gridcore {

// Answers whether `se_id` holds a replica of `lfn`; wired to the
// catalogue by the deployment.
using ReplicaLocator = std::function<bool(const std::string& lfn, const std::string& se_id)>;

// Candidates: requirements true AND queue_length < max_running. Returns
// nullopt when no ad qualifies (the task stays WAITING).
std::optional<std::string> broker_match(const Task& task, const std::vector<ResourceAd>& ads,
                                        const ReplicaLocator& has_replica);

// One broker cycle over the queue: assigns matched tasks (bumping the
// matched ad's queue_length so one cycle does not overload a CE).
// Returns assigned task ids.
std::vector<std::string> broker_cycle(TaskQueue& queue, std::vector<ResourceAd> ads,
                                      const ReplicaLocator& has_replica, std::int64_t now);

// Transfer optimizer: for each WAITING task that has a requirements-
// satisfying CE but lacks local replicas there, enqueue staging transfers
// for the missing inputs (deduplicated against pending transfers).
// A second pass with unchanged state enqueues nothing.
struct StagingDecision {
  std::string task_id;
  std::string lfn;
  std::string guid;
  std::string source_se;
  std::string dest_se;
  std::string checksum;
};

// Resolves an lfn to (guid, checksum, replica SE list); nullopt if the
// catalogue does not know it.
struct InputInfo {
  std::string guid;
  std::string checksum;
  std::vector<std::string> replica_ses;
};
using InputResolver = std::function<std::optional<InputInfo>(const std::string& lfn)>;

std::vector<StagingDecision> optimizer_pass(TaskQueue& tasks, TransferQueue& transfers,
                                            const std::vector<ResourceAd>& ads,
                                            const ReplicaLocator& has_replica,
                                            const InputResolver& resolve);

}  // namespace mg::gridcore
