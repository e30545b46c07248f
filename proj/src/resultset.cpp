#include "mg/resultset.hpp"

#include <algorithm>

#include "mg/error.hpp"

namespace mg::resultset {

const char* leg_status_name(LegStatus s) {
  switch (s) {
    case LegStatus::kOk: return "OK";
    case LegStatus::kDenied: return "DENIED";
    case LegStatus::kUnreachable: return "UNREACHABLE";
  }
  return "?";
}

std::string ResultSet::render() const {
  std::string out = "MGRS/1 rows=" + std::to_string(rows.size());
  for (const auto& [vo, status] : vo_status) {
    out += ' ';
    out += vo;
    out += '=';
    out += leg_status_name(status);
  }
  out += '\n';
  for (const auto& row : rows) {
    out += util::percent_encode(row.guid, ";|");
    out += '|';
    out += util::percent_encode(row.origin_vo, ";|");
    out += '|';
    out += util::percent_encode(row.lfn, ";|");
    out += '|';
    bool first = true;
    for (const auto& [k, v] : row.attrs) {
      if (!first) out += ';';
      first = false;
      out += util::percent_encode(k, ";|");
      out += '=';
      out += util::percent_encode(v, ";|");
    }
    out += '\n';
  }
  return out;
}

ResultSet ResultSet::parse(const std::string& text) {
  auto lines = util::split(text, '\n');
  if (lines.empty() || !util::starts_with(lines[0], "MGRS/1 ")) {
    fail("MalformedResultSet", "missing MGRS/1 header");
  }
  ResultSet rs;
  auto head = util::split(lines[0], ' ');
  for (std::size_t i = 1; i < head.size(); ++i) {
    auto eq = head[i].find('=');
    if (eq == std::string::npos) continue;
    std::string key = head[i].substr(0, eq);
    std::string val = head[i].substr(eq + 1);
    if (key == "rows") continue;
    if (val == "OK") rs.vo_status[key] = LegStatus::kOk;
    else if (val == "DENIED") rs.vo_status[key] = LegStatus::kDenied;
    else if (val == "UNREACHABLE") rs.vo_status[key] = LegStatus::kUnreachable;
  }
  auto decode = [](std::string_view s) {
    auto d = util::percent_decode(s);
    if (!d) fail("MalformedResultSet", "bad percent-encoding");
    return *d;
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = util::split(lines[i], '|');
    if (fields.size() != 4) fail("MalformedResultSet", "bad row: " + lines[i]);
    Row row;
    row.guid = decode(fields[0]);
    row.origin_vo = decode(fields[1]);
    row.lfn = decode(fields[2]);
    if (!fields[3].empty()) {
      for (const auto& pair : util::split(fields[3], ';')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) fail("MalformedResultSet", "bad attr: " + pair);
        row.attrs[decode(pair.substr(0, eq))] = decode(pair.substr(eq + 1));
      }
    }
    rs.rows.push_back(std::move(row));
  }
  for (const auto& row : rs.rows) {
    rs.vo_row_counts[row.origin_vo] += 1;
  }
  return rs;
}

ResultSet merge_rows(std::vector<std::pair<std::string, std::vector<Row>>> per_vo_rows,
                     const std::map<std::string, LegStatus>& statuses,
                     const std::map<std::string, std::string>& guid_owner_vo) {
  ResultSet rs;
  rs.vo_status = statuses;
  std::map<std::string, Row> by_guid;
  for (auto& [vo, rows] : per_vo_rows) {
    for (auto& row : rows) {
      auto it = by_guid.find(row.guid);
      if (it == by_guid.end()) {
        by_guid.emplace(row.guid, std::move(row));
        continue;
      }
      // Duplicate guid across VOs: governance keeps the owner VO's row.
      auto owner = guid_owner_vo.find(row.guid);
      if (owner != guid_owner_vo.end() && row.origin_vo == owner->second) {
        it->second = std::move(row);
      }
    }
  }
  rs.rows.reserve(by_guid.size());
  for (auto& [guid, row] : by_guid) rs.rows.push_back(std::move(row));
  std::sort(rs.rows.begin(), rs.rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.origin_vo, a.lfn) < std::tie(b.origin_vo, b.lfn);
  });
  for (const auto& row : rs.rows) rs.vo_row_counts[row.origin_vo] += 1;
  return rs;
}

}  // namespace mg::resultset
