#pragma once

#include <map>
#include <string>
#include <vector>

#include "mg/util.hpp"

// Federated query results. Shared by the query planner and the Super-VO
// router so both merge rows with identical semantics.
namespace mg::resultset {

enum class LegStatus { kOk, kDenied, kUnreachable };

const char* leg_status_name(LegStatus s);

struct Row {
  std::string guid;
  std::string origin_vo;
  std::string lfn;
  std::map<std::string, std::string> attrs;  // projected, text form

  bool operator==(const Row&) const = default;
};

struct ResultSet {
  std::vector<Row> rows;  // sorted by (origin_vo, lfn), guids unique
  std::map<std::string, LegStatus> vo_status;
  std::map<std::string, std::size_t> vo_row_counts;

  // External form "MGRS/1": header line `MGRS/1 rows=<n>` then one row per
  // line `guid|origin_vo|lfn|attr=val;attr=val`, percent-encoded fields.
  std::string render() const;
  static ResultSet parse(const std::string& text);
};

// Dedupes by guid (a row whose origin_vo equals `owner_of(guid)` wins;
// the merge keeps the first row seen per guid otherwise), sorts by
// (origin_vo, lfn), and records per-VO row counts.
ResultSet merge_rows(std::vector<std::pair<std::string, std::vector<Row>>> per_vo_rows,
                     const std::map<std::string, LegStatus>& statuses,
                     const std::map<std::string, std::string>& guid_owner_vo = {});

}  // namespace mg::resultset
