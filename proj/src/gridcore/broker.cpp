#include "mg/gridcore/broker.hpp"

#include <algorithm>

namespace mg::gridcore {

namespace {

bool full_locality(const Task& task, const ResourceAd& ad, const ReplicaLocator& has_replica) {
  return std::all_of(task.jdl.input_data.begin(), task.jdl.input_data.end(),
                     [&](const std::string& lfn) { return has_replica(lfn, ad.local_se); });
}

}  // namespace

std::optional<std::string> broker_match(const Task& task, const std::vector<ResourceAd>& ads,
                                        const ReplicaLocator& has_replica) {
  const ResourceAd* best = nullptr;
  bool best_local = false;
  for (const auto& ad : ads) {
    if (!eval_requirements(task.jdl.requirements, ad)) continue;
    if (ad.queue_length >= ad.max_running) continue;
    bool local = full_locality(task, ad, has_replica);
    if (!best) {
      best = &ad;
      best_local = local;
      continue;
    }
    // Preference order: locality, then least queue_length, then ce_id.
    if (local != best_local) {
      if (local) {
        best = &ad;
        best_local = true;
      }
      continue;
    }
    if (ad.queue_length != best->queue_length) {
      if (ad.queue_length < best->queue_length) best = &ad;
      continue;
    }
    if (ad.ce_id < best->ce_id) best = &ad;
  }
  if (!best) return std::nullopt;
  return best->ce_id;
}

std::vector<std::string> broker_cycle(TaskQueue& queue, std::vector<ResourceAd> ads,
                                      const ReplicaLocator& has_replica, std::int64_t now) {
  std::vector<std::string> assigned;
  for (Task* task : queue.waiting()) {
    auto ce = broker_match(*task, ads, has_replica);
    if (!ce) continue;
    task->assigned_ce = *ce;
    queue.transition(task->task_id, TaskStatus::kAssigned, now, "matched to " + *ce);
    assigned.push_back(task->task_id);
    for (auto& ad : ads) {
      if (ad.ce_id == *ce) ad.queue_length += 1;
    }
  }
  return assigned;
}

std::vector<StagingDecision> optimizer_pass(TaskQueue& tasks, TransferQueue& transfers,
                                            const std::vector<ResourceAd>& ads,
                                            const ReplicaLocator& has_replica,
                                            const InputResolver& resolve) {
  std::vector<StagingDecision> created;
  for (Task* task : tasks.waiting()) {
    // The optimizer stages data toward the CE the broker would pick if
    // locality were satisfied everywhere; requirements still gate it.
    std::vector<ResourceAd> satisfying;
    for (const auto& ad : ads) {
      if (eval_requirements(task->jdl.requirements, ad) && ad.queue_length < ad.max_running) {
        satisfying.push_back(ad);
      }
    }
    if (satisfying.empty()) continue;
    std::sort(satisfying.begin(), satisfying.end(),
              [](const ResourceAd& a, const ResourceAd& b) {
                if (a.queue_length != b.queue_length) return a.queue_length < b.queue_length;
                return a.ce_id < b.ce_id;
              });
    const ResourceAd& target = satisfying.front();
    for (const auto& lfn : task->jdl.input_data) {
      if (has_replica(lfn, target.local_se)) continue;
      auto info = resolve(lfn);
      if (!info || info->replica_ses.empty()) continue;  // nothing to stage from
      if (transfers.pending_or_done(info->guid, target.local_se)) continue;
      const std::string& source = info->replica_ses.front();
      transfers.enqueue(info->guid, lfn, source, target.local_se, info->checksum);
      created.push_back({task->task_id, lfn, info->guid, source, target.local_se,
                         info->checksum});
    }
  }
  return created;
}

}  // namespace mg::gridcore
