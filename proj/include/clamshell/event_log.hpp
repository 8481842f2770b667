#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace clamshell {

using Json = nlohmann::ordered_json;

/// One persisted simulation fact: `time,sequence,kind,payload-json`.
struct LogRecord {
  double time = 0.0;
  std::uint64_t sequence = 0;
  std::string kind;
  Json payload = Json::object();

  bool operator==(const LogRecord&) const = default;
};

class LogParseError : public std::runtime_error {
 public:
  LogParseError(std::size_t line, const std::string& what)
      : std::runtime_error("event log line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Times are written with 17 significant digits so they parse back exactly.
std::string format_log_line(const LogRecord& record);
LogRecord parse_log_line(const std::string& line, std::size_t line_number = 0);

void write_event_log(std::ostream& out, const std::vector<LogRecord>& records);
std::vector<LogRecord> read_event_log(std::istream& in);

}  // namespace clamshell
