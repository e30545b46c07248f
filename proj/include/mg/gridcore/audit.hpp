#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Append-only audit log; one line per message-flow step:
//   AUD <iso8601> step=<n> session=<id> svc=<name> detail=<percent-encoded>
// The login/dispatch sequence emits steps 1..6 (authentication) and 7..10
// (request round trip).
namespace mg::gridcore {

struct AuditRecord {
  std::int64_t at = 0;  // epoch seconds
  int step = 0;
  std::string session;
  std::string service;
  std::string detail;

  std::string render() const;
  static AuditRecord parse(const std::string& line);
};

class AuditLog {
 public:
  void record(std::int64_t at, int step, const std::string& session,
              const std::string& service, const std::string& detail);

  const std::vector<AuditRecord>& records() const { return records_; }
  std::vector<AuditRecord> for_session(const std::string& session) const;
  std::string render() const;

 private:
  std::vector<AuditRecord> records_;
};

// Checks one session's records against the ten-step message sequence:
// every step 1..6 once for login, then 7..10 once per dispatched request,
// strictly ordered. Returns an empty string when conformant, otherwise a
// description of the first violation.
std::string check_session_flow(const std::vector<AuditRecord>& records,
                               std::size_t expected_dispatches);

}  // namespace mg::gridcore
