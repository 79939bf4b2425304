#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace kbmod {

// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;

// Accepts RFC 3339 ("2020-03-01T10:00:00.123+01:00", 'Z' or numeric offset,
// optional fraction, 'T' or ' ' separator, offset optional meaning UTC) and
// plain epoch milliseconds. Returns nullopt on anything else.
std::optional<TimestampMs> parse_timestamp(std::string_view text);

// RFC 3339 in UTC with millisecond precision, e.g. "1970-01-01T00:01:00.000Z".
std::string format_timestamp(TimestampMs ms);

}  // namespace kbmod
