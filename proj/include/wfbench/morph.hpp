#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "wfbench/features.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

/// Tuning knobs of the stream morpher. d scales both the overhead budget
/// (d * bw_d_factor percent) and the weight of the overhead penalty in the
/// goal function (alpha / d).
struct MorphParams {
  int d = 1;
  double sim_thresh = 0.7;
  int m = 10;
  double alpha = 0.01;
  double bw_d_factor = 25.0;

  double overhead_budget_percent() const { return static_cast<double>(d) * bw_d_factor; }

  void validate() const {
    if (d < 1) throw DataError("morph params: d must be >= 1");
    if (sim_thresh < 0.0 || sim_thresh > 1.0) throw DataError("morph params: sim_thresh in [0,1]");
    if (m < 1) throw DataError("morph params: m must be >= 1");
    if (!(alpha > 0.0)) throw DataError("morph params: alpha must be > 0");
    if (!(bw_d_factor > 0.0)) throw DataError("morph params: bw_d_factor must be > 0");
  }
};

enum class MorphDecision { Passed, Morphed, SliceAborted };

struct MorphedTrace {
  Trace output;
  double overhead_percent = 0.0;
  double added_delay_ms = 0.0;
  std::vector<MorphDecision> decisions;  // one per source packet
};

/// Jaccard coefficient over the distinct packet sizes of the two inputs;
/// two empty inputs count as identical (1).
inline double jaccard(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const int v : a) inter += b.count(v);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double jaccard(const std::vector<Packet>& a, const std::vector<Packet>& b) {
  std::set<int> sa, sb;
  for (const Packet& p : a) sa.insert(p.size_bytes);
  for (const Packet& p : b) sb.insert(p.size_bytes);
  return jaccard(sa, sb);
}

inline std::size_t fragment_count(const Packet& p, const Packet& target) {
  if (target.size_bytes >= p.size_bytes) return 1;
  return (static_cast<std::size_t>(p.size_bytes) + static_cast<std::size_t>(target.size_bytes) - 1) /
         static_cast<std::size_t>(target.size_bytes);
}

/// Reshapes one packet to the target's size: padding when the target is at
/// least as large, fragmentation into target-sized pieces otherwise (the
/// last fragment padded up). The first emitted packet is delayed to
/// max(p, target) time deltas; later fragments follow at the target's
/// spacing. Packets are never shrunk or emitted early.
inline std::vector<Packet> packet_morph(const Packet& p, const Packet& target) {
  if (p.direction != target.direction) throw DataError("packet_morph: direction mismatch");
  const std::size_t frags = fragment_count(p, target);
  std::vector<Packet> out;
  out.reserve(frags);
  for (std::size_t i = 0; i < frags; ++i) {
    out.push_back(Packet{p.direction,
                         i == 0 ? std::max(p.time_delta_ms, target.time_delta_ms) : target.time_delta_ms,
                         target.size_bytes});
  }
  return out;
}

/// Streaming morph state for one flow: destination slices, per-slice output
/// bookkeeping and cumulative byte counters. Single-threaded by contract.
struct MorphState {
  std::vector<std::vector<Packet>> dst_slices;
  std::vector<double> dst_slice_bytes;

  std::size_t slice = 0;
  std::size_t emitted_count = 0;             // packets emitted into the current slice
  std::set<int> out_sizes;                   // distinct sizes emitted into the current slice
  std::array<std::size_t, 2> cursor{0, 0};   // per-direction scan position in the current slice
  std::size_t src_count_in_slice = 0;
  std::size_t slice_quota = 0;               // source packets assigned to the current slice
  bool slice_aborted = false;

  std::uint64_t src_bytes = 0;
  std::uint64_t out_bytes = 0;
  double dst_bytes_behind = 0.0;  // bytes of destination slices already completed

  static std::size_t dir_index(Direction d) { return d == Direction::Outgoing ? 0 : 1; }

  bool last_slice() const { return slice + 1 >= dst_slices.size(); }

  /// Next unconsumed destination packet of the given direction in the
  /// current slice, or nullptr when that direction is exhausted.
  const Packet* next_target(Direction dir) {
    const auto& sl = dst_slices[slice];
    std::size_t& cur = cursor[dir_index(dir)];
    while (cur < sl.size() && sl[cur].direction != dir) ++cur;
    return cur < sl.size() ? &sl[cur] : nullptr;
  }

  void consume_target(Direction dir) { ++cursor[dir_index(dir)]; }

  double cumulative_overhead_percent() const {
    if (src_bytes == 0) return 0.0;
    return 100.0 * (static_cast<double>(out_bytes) - static_cast<double>(src_bytes)) /
           static_cast<double>(src_bytes);
  }

  std::set<int> dst_prefix_sizes(std::size_t count) const {
    const auto& sl = dst_slices[slice];
    std::set<int> sizes;
    const std::size_t end = std::min(count, sl.size());
    for (std::size_t i = 0; i < end; ++i) sizes.insert(sl[i].size_bytes);
    return sizes;
  }

  std::set<int> dst_slice_sizes() const { return dst_prefix_sizes(dst_slices[slice].size()); }

  /// Source-packet quota for the slice about to start. The source length is
  /// unknown in streaming, so the destination slice's packet count is scaled
  /// by the running source/destination byte ratio (1 until any destination
  /// slice has completed), never dropping below the destination slice's own
  /// packet count so a byte-poor source still visits every target slice.
  /// The final slice absorbs all remaining packets.
  std::size_t quota_for(std::size_t s) const {
    if (s + 1 >= dst_slices.size()) return std::numeric_limits<std::size_t>::max();
    const double ratio =
        dst_bytes_behind > 0.0 ? static_cast<double>(src_bytes) / dst_bytes_behind : 1.0;
    const double scaled = std::ceil(static_cast<double>(dst_slices[s].size()) * ratio);
    return std::max<std::size_t>(dst_slices[s].size(),
                                 static_cast<std::size_t>(std::max(1.0, scaled)));
  }

  void advance_slice() {
    dst_bytes_behind += dst_slice_bytes[slice];
    ++slice;
    emitted_count = 0;
    out_sizes.clear();
    cursor = {0, 0};
    src_count_in_slice = 0;
    slice_quota = quota_for(slice);
    slice_aborted = false;
  }
};

struct GoalScores {
  double pass_score = 0.0;
  double morph_score = 0.0;
};

/// Goal function evaluated for both actions on one source packet: the
/// Jaccard similarity of the would-be slice output against the destination
/// slice prefix of equal length, minus (alpha / d) times the cumulative
/// overhead percent after the action.
inline GoalScores gf_morph(const MorphState& st, const Packet& p, const Packet& target,
                           const MorphParams& params) {
  auto score = [&](int emitted_size, std::size_t emitted_packets, std::uint64_t emitted_bytes) {
    std::set<int> out = st.out_sizes;
    out.insert(emitted_size);
    const std::set<int> prefix = st.dst_prefix_sizes(st.emitted_count + emitted_packets);
    const double src_total = static_cast<double>(st.src_bytes) + p.size_bytes;
    const double overhead =
        100.0 * (static_cast<double>(st.out_bytes + emitted_bytes) - src_total) / src_total;
    return jaccard(out, prefix) - (params.alpha / static_cast<double>(params.d)) * overhead;
  };
  const std::size_t frags = fragment_count(p, target);
  GoalScores g;
  g.pass_score = score(p.size_bytes, 1, static_cast<std::uint64_t>(p.size_bytes));
  g.morph_score = score(target.size_bytes, frags,
                        frags * static_cast<std::uint64_t>(target.size_bytes));
  return g;
}

namespace detail {

inline MorphState make_morph_state(const Trace& dst, int m) {
  MorphState st;
  const int m_eff = std::min<int>(m, static_cast<int>(dst.packets.size()));
  const auto bounds = slice_bounds(dst.packets.size(), m_eff);
  for (const auto& [begin, end] : bounds) {
    std::vector<Packet> sl(dst.packets.begin() + static_cast<std::ptrdiff_t>(begin),
                           dst.packets.begin() + static_cast<std::ptrdiff_t>(end));
    double bytes = 0.0;
    for (const Packet& p : sl) bytes += p.size_bytes;
    st.dst_slices.push_back(std::move(sl));
    st.dst_slice_bytes.push_back(bytes);
  }
  st.slice_quota = st.quota_for(0);
  return st;
}

}  // namespace detail

/// Greedy stream morphing of src toward dst. Each source packet is passed or
/// reshaped to the next same-direction destination packet of the current
/// slice, whichever the goal function prefers (ties morph). Once the
/// cumulative overhead exceeds d * bw_d_factor percent while the current
/// slice is still below sim_thresh similarity to its destination slice, the
/// rest of that slice passes unmodified. Deterministic for fixed inputs.
inline MorphedTrace morph_trace(const Trace& src, const Trace& dst, const MorphParams& params,
                                std::uint64_t seed) {
  params.validate();
  if (dst.packets.empty()) throw DataError("morph_trace: destination trace is empty");
  (void)seed;  // the greedy schedule is fully determined by its inputs

  MorphedTrace result;
  result.output.site_id = src.site_id;
  if (src.packets.empty()) return result;

  MorphState st = detail::make_morph_state(dst, params.m);
  const double budget = params.overhead_budget_percent();

  for (const Packet& p : src.packets) {
    std::vector<Packet> emitted;
    if (st.slice_aborted) {
      emitted.push_back(p);
      result.decisions.push_back(MorphDecision::SliceAborted);
    } else {
      const Packet* target = st.next_target(p.direction);
      if (target == nullptr) {
        emitted.push_back(p);
        result.decisions.push_back(MorphDecision::Passed);
      } else {
        const GoalScores g = gf_morph(st, p, *target, params);
        if (g.pass_score > g.morph_score) {
          emitted.push_back(p);
          result.decisions.push_back(MorphDecision::Passed);
        } else {
          emitted = packet_morph(p, *target);
          st.consume_target(p.direction);
          result.decisions.push_back(MorphDecision::Morphed);
        }
      }
    }

    st.src_bytes += static_cast<std::uint64_t>(p.size_bytes);
    ++st.src_count_in_slice;
    for (const Packet& e : emitted) {
      st.out_bytes += static_cast<std::uint64_t>(e.size_bytes);
      st.out_sizes.insert(e.size_bytes);
      ++st.emitted_count;
      result.output.packets.push_back(e);
    }

    if (!st.last_slice() && st.src_count_in_slice >= st.slice_quota) {
      st.advance_slice();
    }
    if (!st.slice_aborted && st.cumulative_overhead_percent() > budget &&
        jaccard(st.out_sizes, st.dst_slice_sizes()) < params.sim_thresh) {
      st.slice_aborted = true;
    }
  }

  result.output.packets.front().time_delta_ms = 0.0;
  result.overhead_percent = st.cumulative_overhead_percent();
  result.added_delay_ms =
      trace_stats(result.output).duration_ms - trace_stats(src).duration_ms;
  return result;
}

}  // namespace wfbench
