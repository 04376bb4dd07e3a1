#include "tpaoi/trace.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tpaoi/errors.hpp"

namespace tpaoi {

namespace {
constexpr std::array<std::pair<EventKind, std::string_view>, 4> kKindNames{{
    {EventKind::UpdateSent, "UPDATE_SENT"},
    {EventKind::UpdateArrived, "UPDATE_ARRIVED"},
    {EventKind::UserAccessed, "USER_ACCESSED"},
    {EventKind::RequestArrived, "REQUEST_ARRIVED"},
}};
}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "UNKNOWN";
}

EventKind parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  throw TraceError("unknown event kind '" + std::string(text) + "'");
}

void write_trace(std::ostream& out, const EventTrace& trace) {
  for (const auto& e : trace) {
    out << e.slot << ' ' << to_string(e.kind);
    for (auto v : e.payload) out << ' ' << v;
    out << '\n';
  }
}

EventTrace read_trace(std::istream& in) {
  EventTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Event e;
    std::string kind;
    if (!(ls >> e.slot >> kind)) throw TraceError("malformed trace line " + std::to_string(line_no));
    e.kind = parse_event_kind(kind);
    std::int64_t v = 0;
    while (ls >> v) e.payload.push_back(v);
    if (!ls.eof()) throw TraceError("non-integer payload on trace line " + std::to_string(line_no));
    trace.push_back(std::move(e));
  }
  return trace;
}

}  // namespace tpaoi
