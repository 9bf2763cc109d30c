#include "fso/trace_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "fso/errors.hpp"

namespace fso {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
  return r;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  const std::uint64_t le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t le = 0;
  if (!in.read(reinterpret_cast<char*>(&le), 8)) {
    throw IoError("<trace>", "truncated binary trace");
  }
  return to_little(le);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_binary(std::ostream& out, const ChannelTrace& trace) {
  out.write(kTraceMagic, 8);
  put_u64(out, static_cast<std::uint64_t>(trace.size()));
  put_f64(out, trace.sample_rate_hz);
  put_f64(out, trace.duration_s);
  put_f64(out, trace.coherence_time_s);
  put_u64(out, trace.seed);
  for (Eigen::Index i = 0; i < trace.size(); ++i) put_f64(out, trace.gains[i]);
}

ChannelTrace read_trace_binary(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kTraceMagic, 8) != 0) {
    throw IoError("<trace>", "missing FSOTRC01 header");
  }
  ChannelTrace trace;
  const std::uint64_t count = get_u64(in);
  trace.sample_rate_hz = get_f64(in);
  trace.duration_s = get_f64(in);
  trace.coherence_time_s = get_f64(in);
  trace.seed = get_u64(in);
  trace.gains.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) trace.gains[static_cast<Eigen::Index>(i)] = get_f64(in);
  return trace;
}

void write_trace_csv(std::ostream& out, const ChannelTrace& trace) {
  out << "# fso-trace sample_rate_hz=" << fmt17(trace.sample_rate_hz)
      << " duration_s=" << fmt17(trace.duration_s)
      << " coherence_time_s=" << fmt17(trace.coherence_time_s) << " seed=" << trace.seed
      << '\n';
  out << "time_s,gain\n";
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    out << fmt17(trace.time_of(i)) << ',' << fmt17(trace.gains[i]) << '\n';
  }
}

ChannelTrace read_trace_csv(std::istream& in) {
  ChannelTrace trace;
  std::vector<double> times;
  std::vector<double> gains;
  bool have_meta = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "sample_rate_hz") {
          trace.sample_rate_hz = std::strtod(value.c_str(), nullptr);
          have_meta = true;
        } else if (key == "duration_s") {
          trace.duration_s = std::strtod(value.c_str(), nullptr);
        } else if (key == "coherence_time_s") {
          trace.coherence_time_s = std::strtod(value.c_str(), nullptr);
        } else if (key == "seed") {
          trace.seed = std::strtoull(value.c_str(), nullptr, 10);
        }
      }
      continue;
    }
    if (line.rfind("time_s", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("<trace>", "malformed CSV row: " + line);
    times.push_back(std::strtod(line.c_str(), nullptr));
    gains.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  if (gains.empty()) throw IoError("<trace>", "CSV trace has no samples");
  if (!have_meta) {
    if (times.size() < 2 || !(times.back() > times.front())) {
      throw IoError("<trace>", "cannot infer sample rate without metadata");
    }
    trace.sample_rate_hz = static_cast<double>(times.size() - 1) / (times.back() - times.front());
    trace.duration_s = static_cast<double>(times.size()) / trace.sample_rate_hz;
  }
  trace.gains = Eigen::Map<const Eigen::ArrayXd>(gains.data(), static_cast<Eigen::Index>(gains.size()));
  return trace;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_trace(const std::string& path, const ChannelTrace& trace) {
  const bool csv = ends_with(path, ".csv");
  std::ofstream out(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  if (csv) {
    write_trace_csv(out, trace);
  } else {
    write_trace_binary(out, trace);
  }
  if (!out) throw IoError(path, "write failed");
}

ChannelTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  char head[8] = {};
  in.read(head, 8);
  in.clear();
  in.seekg(0);
  try {
    if (std::memcmp(head, kTraceMagic, 8) == 0) return read_trace_binary(in);
    return read_trace_csv(in);
  } catch (const IoError& e) {
    throw IoError(path, e.what());
  }
}

}  // namespace fso
