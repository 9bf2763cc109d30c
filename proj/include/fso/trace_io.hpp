#pragma once

#include <iosfwd>
#include <string>

#include "fso/channel_trace.hpp"

namespace fso {

/// 8-byte header of the binary trace format.
inline constexpr char kTraceMagic[9] = "FSOTRC01";

// Binary layout, little-endian: magic, u64 count, f64 sample_rate_hz,
// f64 duration_s, f64 coherence_time_s, u64 seed, count x f64 gain.
void write_trace_binary(std::ostream& out, const ChannelTrace& trace);
ChannelTrace read_trace_binary(std::istream& in);

// CSV: one '#' metadata line, a `time_s,gain` header, then one row per
// sample printed with 17 significant digits.
void write_trace_csv(std::ostream& out, const ChannelTrace& trace);
ChannelTrace read_trace_csv(std::istream& in);

void save_trace(const std::string& path, const ChannelTrace& trace);
ChannelTrace load_trace(const std::string& path);

}  // namespace fso
