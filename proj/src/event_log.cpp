#include "clamshell/event_log.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

namespace clamshell {

std::string format_log_line(const LogRecord& record) {
  char time[40];
  std::snprintf(time, sizeof time, "%.17g", record.time);
  return std::string(time) + "," + std::to_string(record.sequence) + "," + record.kind + "," +
         record.payload.dump();
}

LogRecord parse_log_line(const std::string& line, std::size_t line_number) {
  const auto c1 = line.find(',');
  const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
  const auto c3 = c2 == std::string::npos ? c2 : line.find(',', c2 + 1);
  if (c3 == std::string::npos) throw LogParseError(line_number, "expected 4 fields");

  LogRecord r;
  const std::string time = line.substr(0, c1);
  char* end = nullptr;
  r.time = std::strtod(time.c_str(), &end);
  if (time.empty() || *end != '\0') throw LogParseError(line_number, "bad time '" + time + "'");
  const std::string seq = line.substr(c1 + 1, c2 - c1 - 1);
  r.sequence = std::strtoull(seq.c_str(), &end, 10);
  if (seq.empty() || *end != '\0') throw LogParseError(line_number, "bad sequence '" + seq + "'");
  r.kind = line.substr(c2 + 1, c3 - c2 - 1);
  if (r.kind.empty()) throw LogParseError(line_number, "empty kind");
  try {
    r.payload = Json::parse(line.substr(c3 + 1));
  } catch (const nlohmann::json::exception& e) {
    throw LogParseError(line_number, std::string("bad payload: ") + e.what());
  }
  if (!r.payload.is_object()) throw LogParseError(line_number, "payload is not an object");
  return r;
}

void write_event_log(std::ostream& out, const std::vector<LogRecord>& records) {
  for (const auto& r : records) out << format_log_line(r) << '\n';
}

std::vector<LogRecord> read_event_log(std::istream& in) {
  std::vector<LogRecord> records;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    records.push_back(parse_log_line(line, n));
  }
  return records;
}

}  // namespace clamshell
