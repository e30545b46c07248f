#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mg/error.hpp"
#include "mg/gridcore/jdl.hpp"

// Task queue with the WAITING -> ASSIGNED -> RUNNING -> {DONE|ERROR}
// state machine (KILLED reachable from any non-terminal state) plus the
// transfer queue the optimizers and FTDs share.
namespace mg::gridcore {

enum class TaskStatus { kWaiting, kAssigned, kRunning, kDone, kError, kKilled };

const char* task_status_name(TaskStatus s);

struct TaskTransition {
  std::int64_t at = 0;
  TaskStatus from;
  TaskStatus to;
  std::string note;
};

struct Task {
  std::string task_id;
  JobDescriptor jdl;
  TaskStatus status = TaskStatus::kWaiting;
  std::string assigned_ce;
  std::string result_lfn;
  std::string owner_principal;
  std::string owner_vo;
  std::vector<TaskTransition> history;  // append-only
};

class TaskQueue {
 public:
  std::string submit(JobDescriptor jd, const std::string& principal,
                     const std::string& vo, std::int64_t now);

  Task& get(const std::string& task_id);          // errors: NoSuchTask
  const Task& get(const std::string& task_id) const;

  // Enforces the transition relation; errors: InvalidTransition.
  void transition(const std::string& task_id, TaskStatus to, std::int64_t now,
                  const std::string& note = "");

  std::vector<Task*> waiting();
  std::vector<Task*> assigned_to(const std::string& ce_id);
  std::vector<const Task*> all() const;

 private:
  std::map<std::string, Task> tasks_;
  std::uint64_t next_id_ = 1;
};

enum class TransferStatus { kWaiting, kTransferring, kDone, kFailed };

const char* transfer_status_name(TransferStatus s);

struct TransferRequest {
  std::string transfer_id;
  std::string guid;
  std::string lfn;
  std::string source_se;
  std::string dest_se;
  TransferStatus status = TransferStatus::kWaiting;
  std::string checksum;
  std::string note;
  bool credentialed = false;  // carried a mutual host-certificate handshake
};

class TransferQueue {
 public:
  std::string enqueue(const std::string& guid, const std::string& lfn,
                      const std::string& source_se, const std::string& dest_se,
                      const std::string& checksum);

  TransferRequest& get(const std::string& transfer_id);
  std::vector<TransferRequest*> waiting();
  const std::vector<TransferRequest>& all() const { return transfers_; }

  // True if an equivalent transfer is already waiting/active/done.
  bool pending_or_done(const std::string& guid, const std::string& dest_se) const;

 private:
  std::vector<TransferRequest> transfers_;
  std::uint64_t next_id_ = 1;
};

}  // namespace mg::gridcore
