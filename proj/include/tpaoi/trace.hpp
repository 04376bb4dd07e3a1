#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace tpaoi {

enum class EventKind { UpdateSent, UpdateArrived, UserAccessed, RequestArrived };

// Payload layout per kind:
//   UpdateSent      [link_index]
//   UpdateArrived   [send_slot, transit]
//   UserAccessed    [request_launched (0/1), aoi_at_access]
//   RequestArrived  [access_slot, tpaoi]
struct Event {
  std::int64_t slot = 0;
  EventKind kind = EventKind::UpdateSent;
  std::vector<std::int64_t> payload;

  bool operator==(const Event&) const = default;
};

using EventTrace = std::vector<Event>;

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

// Line-delimited text form: "<slot> <KIND> <payload ints...>".
void write_trace(std::ostream& out, const EventTrace& trace);
EventTrace read_trace(std::istream& in);

}  // namespace tpaoi
