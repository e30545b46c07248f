#include "mg/gridcore/tasks.hpp"

#include <algorithm>

namespace mg::gridcore {

const char* task_status_name(TaskStatus s) {
  switch (s) {
    case TaskStatus::kWaiting: return "WAITING";
    case TaskStatus::kAssigned: return "ASSIGNED";
    case TaskStatus::kRunning: return "RUNNING";
    case TaskStatus::kDone: return "DONE";
    case TaskStatus::kError: return "ERROR";
    case TaskStatus::kKilled: return "KILLED";
  }
  return "?";
}

namespace {

bool transition_allowed(TaskStatus from, TaskStatus to) {
  if (to == TaskStatus::kKilled) {
    return from == TaskStatus::kWaiting || from == TaskStatus::kAssigned ||
           from == TaskStatus::kRunning;
  }
  switch (from) {
    case TaskStatus::kWaiting: return to == TaskStatus::kAssigned;
    case TaskStatus::kAssigned: return to == TaskStatus::kRunning;
    case TaskStatus::kRunning: return to == TaskStatus::kDone || to == TaskStatus::kError;
    default: return false;
  }
}

}  // namespace

std::string TaskQueue::submit(JobDescriptor jd, const std::string& principal,
                              const std::string& vo, std::int64_t now) {
  Task task;
  task.task_id = "t" + std::to_string(next_id_++);
  task.jdl = std::move(jd);
  task.owner_principal = principal;
  task.owner_vo = vo;
  task.history.push_back({now, TaskStatus::kWaiting, TaskStatus::kWaiting, "submitted"});
  std::string id = task.task_id;
  tasks_[id] = std::move(task);
  return id;
}

Task& TaskQueue::get(const std::string& task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) fail("NoSuchTask", task_id);
  return it->second;
}

const Task& TaskQueue::get(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) fail("NoSuchTask", task_id);
  return it->second;
}

void TaskQueue::transition(const std::string& task_id, TaskStatus to, std::int64_t now,
                           const std::string& note) {
  Task& task = get(task_id);
  if (!transition_allowed(task.status, to)) {
    fail("InvalidTransition", std::string(task_status_name(task.status)) + " -> " +
                                  task_status_name(to) + " for " + task_id);
  }
  task.history.push_back({now, task.status, to, note});
  task.status = to;
}

std::vector<Task*> TaskQueue::waiting() {
  std::vector<Task*> out;
  for (auto& [id, task] : tasks_) {
    if (task.status == TaskStatus::kWaiting) out.push_back(&task);
  }
  return out;
}

std::vector<Task*> TaskQueue::assigned_to(const std::string& ce_id) {
  std::vector<Task*> out;
  for (auto& [id, task] : tasks_) {
    if (task.status == TaskStatus::kAssigned && task.assigned_ce == ce_id) {
      out.push_back(&task);
    }
  }
  return out;
}

std::vector<const Task*> TaskQueue::all() const {
  std::vector<const Task*> out;
  for (const auto& [id, task] : tasks_) out.push_back(&task);
  return out;
}

const char* transfer_status_name(TransferStatus s) {
  switch (s) {
    case TransferStatus::kWaiting: return "WAITING";
    case TransferStatus::kTransferring: return "TRANSFERRING";
    case TransferStatus::kDone: return "DONE";
    case TransferStatus::kFailed: return "FAILED";
  }
  return "?";
}

std::string TransferQueue::enqueue(const std::string& guid, const std::string& lfn,
                                   const std::string& source_se, const std::string& dest_se,
                                   const std::string& checksum) {
  TransferRequest req;
  req.transfer_id = "x" + std::to_string(next_id_++);
  req.guid = guid;
  req.lfn = lfn;
  req.source_se = source_se;
  req.dest_se = dest_se;
  req.checksum = checksum;
  transfers_.push_back(req);
  return req.transfer_id;
}

TransferRequest& TransferQueue::get(const std::string& transfer_id) {
  for (auto& t : transfers_) {
    if (t.transfer_id == transfer_id) return t;
  }
  fail("NotFound", "transfer " + transfer_id);
}

std::vector<TransferRequest*> TransferQueue::waiting() {
  std::vector<TransferRequest*> out;
  for (auto& t : transfers_) {
    if (t.status == TransferStatus::kWaiting) out.push_back(&t);
  }
  return out;
}

bool TransferQueue::pending_or_done(const std::string& guid,
                                    const std::string& dest_se) const {
  return std::any_of(transfers_.begin(), transfers_.end(), [&](const TransferRequest& t) {
    return t.guid == guid && t.dest_se == dest_se && t.status != TransferStatus::kFailed;
  });
}

}  // namespace mg::gridcore
