#include "mg/gridcore/audit.hpp"

#include "mg/error.hpp"
#include "mg/util.hpp"

namespace mg::gridcore {

std::string AuditRecord::render() const {
  return "AUD " + util::iso8601_utc(at) + " step=" + std::to_string(step) +
         " session=" + session + " svc=" + service +
         " detail=" + util::percent_encode(detail, " ");
}

AuditRecord AuditRecord::parse(const std::string& line) {
  auto parts = util::split(line, ' ');
  if (parts.size() != 6 || parts[0] != "AUD") fail("MalformedAudit", line);
  AuditRecord rec;
  auto field = [&](const std::string& part, const char* key) {
    std::string prefix = std::string(key) + "=";
    if (!util::starts_with(part, prefix)) fail("MalformedAudit", line);
    return part.substr(prefix.size());
  };
  rec.step = std::stoi(field(parts[2], "step"));
  rec.session = field(parts[3], "session");
  rec.service = field(parts[4], "svc");
  auto detail = util::percent_decode(field(parts[5], "detail"));
  if (!detail) fail("MalformedAudit", line);
  rec.detail = *detail;
  return rec;
}

void AuditLog::record(std::int64_t at, int step, const std::string& session,
                      const std::string& service, const std::string& detail) {
  records_.push_back({at, step, session, service, detail});
}

std::vector<AuditRecord> AuditLog::for_session(const std::string& session) const {
  std::vector<AuditRecord> out;
  for (const auto& rec : records_) {
    if (rec.session == session) out.push_back(rec);
  }
  return out;
}

std::string AuditLog::render() const {
  std::string out;
  for (const auto& rec : records_) {
    out += rec.render();
    out += '\n';
  }
  return out;
}

std::string check_session_flow(const std::vector<AuditRecord>& records,
                               std::size_t expected_dispatches) {
  std::vector<int> steps;
  for (const auto& rec : records) steps.push_back(rec.step);

  std::size_t i = 0;
  for (int want = 1; want <= 6; ++want, ++i) {
    if (i >= steps.size() || steps[i] != want) {
      return "login flow broken: expected step " + std::to_string(want) + " at index " +
             std::to_string(i);
    }
  }
  for (std::size_t d = 0; d < expected_dispatches; ++d) {
    for (int want = 7; want <= 10; ++want, ++i) {
      if (i >= steps.size() || steps[i] != want) {
        return "dispatch " + std::to_string(d + 1) + " broken: expected step " +
               std::to_string(want) + " at index " + std::to_string(i);
      }
    }
  }
  if (i != steps.size()) {
    return "unexpected extra audit steps after index " + std::to_string(i);
  }
  return "";
}

}  // namespace mg::gridcore
