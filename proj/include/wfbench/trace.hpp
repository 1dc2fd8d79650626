#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wfbench {

inline constexpr int kMinPacketBytes = 1;
inline constexpr int kMaxPacketBytes = 65535;
inline constexpr int kMtuBytes = 1500;

/// -1 on the wire for outgoing ("up"), +1 for incoming ("down").
enum class Direction : int { Outgoing = -1, Incoming = 1 };

inline int direction_value(Direction d) { return static_cast<int>(d); }

/// One observed packet: direction, time since the previous packet of the
/// trace in milliseconds, payload size in bytes (1..65535).
struct Packet {
  Direction direction = Direction::Outgoing;
  double time_delta_ms = 0.0;
  int size_bytes = 0;

  bool operator==(const Packet&) const = default;
};

/// A site-labeled packet sequence; the object defenses transform and
/// classifiers consume. The first packet of a valid trace has
/// time_delta_ms == 0.
struct Trace {
  std::string site_id;
  std::vector<Packet> packets;

  bool operator==(const Trace&) const = default;
};

struct Website {
  std::string site_id;
  std::vector<Trace> traces;
};

enum class Provenance { Loaded, Synthetic };

struct Dataset {
  std::map<std::string, Website> websites;  // keyed by site_id; sorted iteration
  Provenance provenance = Provenance::Loaded;
  std::optional<std::uint64_t> seed;

  std::vector<std::string> site_ids() const {
    std::vector<std::string> ids;
    ids.reserve(websites.size());
    for (const auto& [id, ws] : websites) ids.push_back(id);
    return ids;
  }
};

struct TraceStats {
  std::uint64_t bytes_up = 0;  // outgoing
  std::uint64_t bytes_down = 0;
  std::size_t count_up = 0;
  std::size_t count_down = 0;
  double duration_ms = 0.0;
};

struct TraceParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rounds to microsecond resolution so the value survives the 6-fractional-
/// digit trace file format exactly.
inline double quantize_time_delta(double ms) {
  return std::round(ms * 1e6) / 1e6;
}

/// Serializes a time delta with up to 6 fractional digits, trailing zeros
/// trimmed ("12.5", "0.125", "0").
inline std::string format_time_delta(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", ms);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    auto last = s.find_last_not_of('0');
    if (last == dot) last -= 1;
    s.erase(last + 1);
  }
  return s;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, long& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Parses the trace CSV format: one "direction,time_delta_ms,size_bytes"
/// line per packet, '#' comment lines and blank lines ignored. The first
/// packet's time delta is normalized to 0.
inline Trace parse_trace_file(std::string_view text, std::string site_id = {}) {
  Trace trace;
  trace.site_id = std::move(site_id);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;

    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? std::string_view::npos : line.find(',', c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
        line.find(',', c2 + 1) != std::string_view::npos) {
      throw TraceParseError("line " + std::to_string(line_no) + ": expected 3 comma-separated fields");
    }
    long dir = 0;
    double delta = 0.0;
    long size = 0;
    if (!detail::parse_int(line.substr(0, c1), dir)) {
      throw TraceParseError("line " + std::to_string(line_no) + ": bad direction field");
    }
    if (dir != -1 && dir != 1) {
      throw TraceParseError("line " + std::to_string(line_no) + ": direction must be -1 or 1");
    }
    if (!detail::parse_double(line.substr(c1 + 1, c2 - c1 - 1), delta) || delta < 0.0) {
      throw TraceParseError("line " + std::to_string(line_no) + ": bad time delta");
    }
    if (!detail::parse_int(line.substr(c2 + 1), size)) {
      throw TraceParseError("line " + std::to_string(line_no) + ": bad size field");
    }
    if (size < kMinPacketBytes || size > kMaxPacketBytes) {
      throw TraceParseError("line " + std::to_string(line_no) + ": size out of range [1, 65535]");
    }
    trace.packets.push_back(Packet{dir == -1 ? Direction::Outgoing : Direction::Incoming,
                                   delta, static_cast<int>(size)});
  }
  if (trace.packets.empty()) throw TraceParseError("empty trace");
  trace.packets.front().time_delta_ms = 0.0;
  return trace;
}

inline std::string write_trace_file(const Trace& trace) {
  std::string out;
  for (const Packet& p : trace.packets) {
    out += std::to_string(direction_value(p.direction));
    out += ',';
    out += format_time_delta(p.time_delta_ms);
    out += ',';
    out += std::to_string(p.size_bytes);
    out += '\n';
  }
  return out;
}

inline TraceStats trace_stats(const Trace& trace) {
  TraceStats st;
  for (const Packet& p : trace.packets) {
    if (p.direction == Direction::Outgoing) {
      st.bytes_up += static_cast<std::uint64_t>(p.size_bytes);
      ++st.count_up;
    } else {
      st.bytes_down += static_cast<std::uint64_t>(p.size_bytes);
      ++st.count_down;
    }
    st.duration_ms += p.time_delta_ms;
  }
  return st;
}

inline std::uint64_t total_bytes(const Trace& trace) {
  std::uint64_t sum = 0;
  for (const Packet& p : trace.packets) sum += static_cast<std::uint64_t>(p.size_bytes);
  return sum;
}

/// Loads a dataset laid out as <root>/<site_id>/<n>.csv. Trace files are
/// read in filename order; malformed files are skipped and counted in
/// *skipped_files when provided.
inline Dataset load_dataset(const std::filesystem::path& root, std::size_t* skipped_files = nullptr) {
  namespace fs = std::filesystem;
  if (skipped_files) *skipped_files = 0;
  if (!fs::is_directory(root)) {
    throw DataError("dataset root is not a directory: " + root.string());
  }
  std::vector<fs::path> site_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) site_dirs.push_back(entry.path());
  }
  std::sort(site_dirs.begin(), site_dirs.end());

  Dataset ds;
  ds.provenance = Provenance::Loaded;
  for (const auto& dir : site_dirs) {
    const std::string site_id = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    Website ws;
    ws.site_id = site_id;
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      try {
        ws.traces.push_back(parse_trace_file(buf.str(), site_id));
      } catch (const TraceParseError&) {
        if (skipped_files) ++*skipped_files;
      }
    }
    if (!ws.traces.empty()) ds.websites.emplace(site_id, std::move(ws));
  }
  if (ds.websites.empty()) throw DataError("no valid websites under " + root.string());
  return ds;
}

/// Writes a dataset in the same layout load_dataset reads.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  for (const auto& [site_id, ws] : ds.websites) {
    const fs::path dir = root / site_id;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < ws.traces.size(); ++i) {
      std::ofstream out(dir / (std::to_string(i) + ".csv"), std::ios::binary);
      if (!out) throw DataError("cannot write trace file under " + dir.string());
      out << write_trace_file(ws.traces[i]);
    }
  }
}

}  // namespace wfbench
