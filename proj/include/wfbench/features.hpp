#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wfbench/trace.hpp"

namespace wfbench {

/// Behavioral summary of a trace: the packets are split into m contiguous
/// slices and each slice contributes <mean outgoing size, mean incoming
/// size>, giving 2m values ordered <up_1, down_1, ..., up_m, down_m>.
struct SliceVector {
  int m = 0;
  std::vector<double> values;  // 2m entries, 0 where a slice has no packet of that direction
};

enum class FeatureKind { LL, HA, PA };

/// Compact feature identifier: high 32 bits tag the key family, low 32 bits
/// carry the size / bucket / marker id.
using FeatureKey = std::int64_t;

namespace fkey {

inline constexpr std::int64_t kTagMarker = 0;
inline constexpr std::int64_t kTagSizeIn = 1;
inline constexpr std::int64_t kTagSizeOut = 2;
inline constexpr std::int64_t kTagBucketIn = 3;
inline constexpr std::int64_t kTagBucketOut = 4;

inline constexpr FeatureKey make(std::int64_t tag, std::int64_t value) {
  return (tag << 32) | value;
}

inline constexpr std::int64_t tag_of(FeatureKey k) { return k >> 32; }
inline constexpr std::int64_t value_of(FeatureKey k) { return k & 0xffffffff; }

inline constexpr FeatureKey kBytesIn = make(kTagMarker, 1);
inline constexpr FeatureKey kBytesOut = make(kTagMarker, 2);
inline constexpr FeatureKey kCountIn = make(kTagMarker, 3);
inline constexpr FeatureKey kCountOut = make(kTagMarker, 4);
inline constexpr FeatureKey kFracIn = make(kTagMarker, 5);
inline constexpr FeatureKey kDistinctSizes = make(kTagMarker, 6);

inline FeatureKey size_key(Direction d, int size) {
  return make(d == Direction::Incoming ? kTagSizeIn : kTagSizeOut, size);
}

inline FeatureKey bucket_key(Direction d, int bucket_base) {
  return make(d == Direction::Incoming ? kTagBucketIn : kTagBucketOut, bucket_base);
}

inline std::string name(FeatureKey k) {
  const std::int64_t v = value_of(k);
  switch (tag_of(k)) {
    case kTagSizeIn: return "in:" + std::to_string(v);
    case kTagSizeOut: return "out:" + std::to_string(v);
    case kTagBucketIn: return "inb:" + std::to_string(v);
    case kTagBucketOut: return "outb:" + std::to_string(v);
    default:
      switch (k) {
        case kBytesIn: return "bytes_in";
        case kBytesOut: return "bytes_out";
        case kCountIn: return "count_in";
        case kCountOut: return "count_out";
        case kFracIn: return "frac_in";
        case kDistinctSizes: return "distinct_sizes";
      }
  }
  return "key:" + std::to_string(k);
}

inline FeatureKey parse(std::string_view s) {
  auto tagged = [&](std::string_view prefix, std::int64_t tag, FeatureKey& out) {
    if (s.substr(0, prefix.size()) != prefix) return false;
    out = make(tag, std::stoll(std::string(s.substr(prefix.size()))));
    return true;
  };
  FeatureKey k = 0;
  if (tagged("in:", kTagSizeIn, k) || tagged("out:", kTagSizeOut, k) ||
      tagged("inb:", kTagBucketIn, k) || tagged("outb:", kTagBucketOut, k)) {
    return k;
  }
  if (s == "bytes_in") return kBytesIn;
  if (s == "bytes_out") return kBytesOut;
  if (s == "count_in") return kCountIn;
  if (s == "count_out") return kCountOut;
  if (s == "frac_in") return kFracIn;
  if (s == "distinct_sizes") return kDistinctSizes;
  throw DataError("unknown feature key: " + std::string(s));
}

}  // namespace fkey

struct FeatureVector {
  FeatureKind kind = FeatureKind::LL;
  std::map<FeatureKey, double> entries;
};

/// Contiguous [begin, end) index ranges that split n items into m groups of
/// as-equal-as-possible sizes; the first n % m groups take the extra item.
inline std::vector<std::pair<std::size_t, std::size_t>> slice_bounds(std::size_t n, int m) {
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  bounds.reserve(static_cast<std::size_t>(m));
  const std::size_t base = n / static_cast<std::size_t>(m);
  const std::size_t rem = n % static_cast<std::size_t>(m);
  std::size_t start = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    const std::size_t len = base + (i < rem ? 1 : 0);
    bounds.emplace_back(start, start + len);
    start += len;
  }
  return bounds;
}

inline SliceVector slice_features(const Trace& trace, int m) {
  if (m < 1) throw DataError("slice_features: m must be >= 1");
  if (trace.packets.empty()) throw DataError("slice_features: empty trace");
  SliceVector sv;
  sv.m = m;
  sv.values.assign(static_cast<std::size_t>(2 * m), 0.0);
  const auto bounds = slice_bounds(trace.packets.size(), m);
  for (std::size_t s = 0; s < bounds.size(); ++s) {
    double sum_up = 0.0, sum_down = 0.0;
    std::size_t n_up = 0, n_down = 0;
    for (std::size_t i = bounds[s].first; i < bounds[s].second; ++i) {
      const Packet& p = trace.packets[i];
      if (p.direction == Direction::Outgoing) {
        sum_up += p.size_bytes;
        ++n_up;
      } else {
        sum_down += p.size_bytes;
        ++n_down;
      }
    }
    sv.values[2 * s] = n_up ? sum_up / static_cast<double>(n_up) : 0.0;
    sv.values[2 * s + 1] = n_down ? sum_down / static_cast<double>(n_down) : 0.0;
  }
  return sv;
}

/// Histogram over distinct (direction, size) pairs.
inline FeatureVector ll_features(const Trace& trace) {
  if (trace.packets.empty()) throw DataError("ll_features: empty trace");
  FeatureVector fv;
  fv.kind = FeatureKind::LL;
  for (const Packet& p : trace.packets) {
    fv.entries[fkey::size_key(p.direction, p.size_bytes)] += 1.0;
  }
  return fv;
}

/// ll_features normalized to sum 1.
inline FeatureVector ha_features(const Trace& trace) {
  FeatureVector fv = ll_features(trace);
  fv.kind = FeatureKind::HA;
  const double total = static_cast<double>(trace.packets.size());
  for (auto& [key, value] : fv.entries) value /= total;
  return fv;
}

/// Sequence markers: per-direction byte and packet totals, incoming packet
/// fraction, distinct size count, and a per-direction histogram of sizes
/// floored to 100-byte buckets.
inline FeatureVector pa_features(const Trace& trace) {
  if (trace.packets.empty()) throw DataError("pa_features: empty trace");
  FeatureVector fv;
  fv.kind = FeatureKind::PA;
  double bytes_in = 0.0, bytes_out = 0.0;
  double count_in = 0.0, count_out = 0.0;
  std::set<int> sizes;
  for (const Packet& p : trace.packets) {
    if (p.direction == Direction::Incoming) {
      bytes_in += p.size_bytes;
      count_in += 1.0;
    } else {
      bytes_out += p.size_bytes;
      count_out += 1.0;
    }
    sizes.insert(p.size_bytes);
    fv.entries[fkey::bucket_key(p.direction, (p.size_bytes / 100) * 100)] += 1.0;
  }
  fv.entries[fkey::kBytesIn] = bytes_in;
  fv.entries[fkey::kBytesOut] = bytes_out;
  fv.entries[fkey::kCountIn] = count_in;
  fv.entries[fkey::kCountOut] = count_out;
  fv.entries[fkey::kFracIn] = count_in / (count_in + count_out);
  fv.entries[fkey::kDistinctSizes] = static_cast<double>(sizes.size());
  return fv;
}

}  // namespace wfbench
