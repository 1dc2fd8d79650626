#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wfbench/designate.hpp"
#include "wfbench/morph.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

enum class DefenseKind { None, PadRandom, PadMtu, TrafficMorph, BuFLO, Tamaraw, TGPSM };

inline const char* defense_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::None: return "none";
    case DefenseKind::PadRandom: return "pad-random";
    case DefenseKind::PadMtu: return "pad-mtu";
    case DefenseKind::TrafficMorph: return "traffic-morph";
    case DefenseKind::BuFLO: return "buflo";
    case DefenseKind::Tamaraw: return "tamaraw";
    case DefenseKind::TGPSM: return "tgpsm";
  }
  return "?";
}

inline DefenseKind defense_from_name(std::string_view s) {
  if (s == "none") return DefenseKind::None;
  if (s == "pad-random") return DefenseKind::PadRandom;
  if (s == "pad-mtu") return DefenseKind::PadMtu;
  if (s == "traffic-morph") return DefenseKind::TrafficMorph;
  if (s == "buflo") return DefenseKind::BuFLO;
  if (s == "tamaraw") return DefenseKind::Tamaraw;
  if (s == "tgpsm") return DefenseKind::TGPSM;
  throw DataError("unknown defense: " + std::string(s));
}

/// Defense selection plus its numeric parameters. TGPSM carries its knobs in
/// `morph`; the other kinds read from `parameters`.
struct DefenseConfig {
  DefenseKind kind = DefenseKind::None;
  std::map<std::string, double> parameters;
  MorphParams morph;

  double get(const std::string& name, double fallback) const {
    const auto it = parameters.find(name);
    return it == parameters.end() ? fallback : it->second;
  }

  double require(const std::string& name) const {
    const auto it = parameters.find(name);
    if (it == parameters.end()) {
      throw DataError(std::string(defense_name(kind)) + ": missing parameter '" + name + "'");
    }
    return it->second;
  }

  void validate() const {
    switch (kind) {
      case DefenseKind::None:
      case DefenseKind::PadRandom:
      case DefenseKind::PadMtu:
        break;
      case DefenseKind::TrafficMorph: {
        const double s = get("sim_thresh", 0.7);
        if (s < 0.0 || s > 1.0) throw DataError("traffic-morph: sim_thresh in [0,1]");
        break;
      }
      case DefenseKind::BuFLO: {
        if (!(require("rho") > 0.0)) throw DataError("buflo: rho must be > 0");
        if (require("tau") < 0.0) throw DataError("buflo: tau must be >= 0");
        const double d = require("d");
        if (d < kMinPacketBytes || d > kMaxPacketBytes) throw DataError("buflo: d out of range");
        break;
      }
      case DefenseKind::Tamaraw: {
        if (!(require("rho_out") > 0.0) || !(require("rho_in") > 0.0)) {
          throw DataError("tamaraw: intervals must be > 0");
        }
        const double d = require("d");
        if (d < kMinPacketBytes || d > kMaxPacketBytes) throw DataError("tamaraw: d out of range");
        if (require("l") < 1.0) throw DataError("tamaraw: pad multiple must be >= 1");
        break;
      }
      case DefenseKind::TGPSM:
        morph.validate();
        break;
    }
  }

  std::string label() const { return defense_name(kind); }

  std::string parameter_string() const {
    auto fmt = [](double v) {
      char buf[32];
      if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
      } else {
        std::snprintf(buf, sizeof(buf), "%g", v);
      }
      return std::string(buf);
    };
    switch (kind) {
      case DefenseKind::None:
      case DefenseKind::PadRandom:
      case DefenseKind::PadMtu:
        return "-";
      case DefenseKind::TrafficMorph:
        return "sim_thresh=" + fmt(get("sim_thresh", 0.7));
      case DefenseKind::BuFLO:
        return "tau=" + fmt(require("tau")) + " rho=" + fmt(require("rho")) +
               " d=" + fmt(require("d"));
      case DefenseKind::Tamaraw:
        return "rho_out=" + fmt(require("rho_out")) + " rho_in=" + fmt(require("rho_in")) +
               " d=" + fmt(require("d")) + " l=" + fmt(require("l"));
      case DefenseKind::TGPSM:
        return "d=" + std::to_string(morph.d);
    }
    return "-";
  }
};

/// Pads every packet by a uniform seeded amount up to the MTU; packets at or
/// above the MTU pass through. Timing is untouched.
inline Trace pad_random(const Trace& trace, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xbadf));
  Trace out = trace;
  for (Packet& p : out.packets) {
    if (p.size_bytes < kMtuBytes) {
      p.size_bytes += static_cast<int>(
          rng.below(static_cast<std::uint64_t>(kMtuBytes - p.size_bytes) + 1));
    }
  }
  return out;
}

/// Pads every packet up to the MTU (1500 bytes); larger packets keep their
/// size so payload is never dropped. Counts and timing are unchanged.
inline Trace pad_mtu(const Trace& trace) {
  Trace out = trace;
  for (Packet& p : out.packets) p.size_bytes = std::max(p.size_bytes, kMtuBytes);
  return out;
}

/// Per-direction empirical packet-size pool of a target trace.
struct SizeDistribution {
  std::vector<int> out_sizes;
  std::vector<int> in_sizes;
  std::set<int> all_sizes;
};

inline SizeDistribution empirical_distribution(const Trace& trace) {
  SizeDistribution dist;
  for (const Packet& p : trace.packets) {
    (p.direction == Direction::Outgoing ? dist.out_sizes : dist.in_sizes).push_back(p.size_bytes);
    dist.all_sizes.insert(p.size_bytes);
  }
  return dist;
}

/// Distribution-sampling traffic morphing: every packet is reshaped to a
/// size sampled from the target's same-direction pool (pad-or-fragment
/// semantics) until the emitted size set reaches sim_thresh Jaccard
/// similarity to the target's size set; after that packets pass unmodified.
inline Trace traffic_morph(const Trace& trace, const SizeDistribution& target, double sim_thresh,
                           std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7aff));
  Trace out;
  out.site_id = trace.site_id;
  std::set<int> emitted;
  bool done = false;
  for (const Packet& p : trace.packets) {
    if (!done && jaccard(emitted, target.all_sizes) >= sim_thresh) done = true;
    const auto& pool = p.direction == Direction::Outgoing ? target.out_sizes : target.in_sizes;
    if (done || pool.empty()) {
      out.packets.push_back(p);
      emitted.insert(p.size_bytes);
      continue;
    }
    const int size = pool[rng.below(pool.size())];
    for (const Packet& e : packet_morph(p, Packet{p.direction, 0.0, size})) {
      out.packets.push_back(e);
      emitted.insert(e.size_bytes);
    }
  }
  if (!out.packets.empty()) out.packets.front().time_delta_ms = 0.0;
  return out;
}

namespace detail {

/// Fixed-size fixed-interval emission for one direction: n packets of
/// d_bytes at multiples of rho_ms starting at time 0.
inline void emit_uniform(std::vector<std::pair<double, Packet>>& sink, Direction dir,
                         std::size_t n, int d_bytes, double rho_ms) {
  for (std::size_t i = 0; i < n; ++i) {
    sink.emplace_back(static_cast<double>(i) * rho_ms, Packet{dir, 0.0, d_bytes});
  }
}

/// Stable time-merge of per-direction schedules into a single trace with
/// relative deltas; outgoing wins ties so the order is deterministic.
inline Trace merge_schedule(std::vector<std::pair<double, Packet>> schedule,
                            const std::string& site_id) {
  std::stable_sort(schedule.begin(), schedule.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second.direction == Direction::Outgoing && b.second.direction == Direction::Incoming;
  });
  Trace out;
  out.site_id = site_id;
  double prev = 0.0;
  for (auto& [t, p] : schedule) {
    p.time_delta_ms = out.packets.empty() ? 0.0 : t - prev;
    prev = t;
    out.packets.push_back(p);
  }
  return out;
}

}  // namespace detail

/// Uniformizing defense: each direction that appears in the input emits
/// d_bytes-sized packets every rho_ms, carrying the queued payload, until
/// the payload is exhausted and the elapsed time has reached tau_ms.
inline Trace buflo(const Trace& trace, double tau_ms, double rho_ms, int d_bytes) {
  if (!(rho_ms > 0.0) || tau_ms < 0.0 || d_bytes < kMinPacketBytes || d_bytes > kMaxPacketBytes) {
    throw DataError("buflo: bad parameters");
  }
  const TraceStats st = trace_stats(trace);
  const std::size_t n_time =
      tau_ms > 0.0 ? static_cast<std::size_t>(std::ceil(tau_ms / rho_ms)) + 1 : 1;
  std::vector<std::pair<double, Packet>> schedule;
  if (st.count_up > 0) {
    const auto n_payload = static_cast<std::size_t>(
        (st.bytes_up + static_cast<std::uint64_t>(d_bytes) - 1) / static_cast<std::uint64_t>(d_bytes));
    detail::emit_uniform(schedule, Direction::Outgoing, std::max(n_payload, n_time), d_bytes, rho_ms);
  }
  if (st.count_down > 0) {
    const auto n_payload = static_cast<std::size_t>(
        (st.bytes_down + static_cast<std::uint64_t>(d_bytes) - 1) / static_cast<std::uint64_t>(d_bytes));
    detail::emit_uniform(schedule, Direction::Incoming, std::max(n_payload, n_time), d_bytes, rho_ms);
  }
  return detail::merge_schedule(std::move(schedule), trace.site_id);
}

/// Two-speed uniformization: per-direction intervals (incoming typically
/// faster) and per-direction packet counts padded up to a multiple of
/// pad_multiple after the payload is exhausted.
inline Trace tamaraw(const Trace& trace, double rho_out_ms, double rho_in_ms, int d_bytes,
                     int pad_multiple) {
  if (!(rho_out_ms > 0.0) || !(rho_in_ms > 0.0) || pad_multiple < 1 ||
      d_bytes < kMinPacketBytes || d_bytes > kMaxPacketBytes) {
    throw DataError("tamaraw: bad parameters");
  }
  const TraceStats st = trace_stats(trace);
  const auto l = static_cast<std::size_t>(pad_multiple);
  auto padded_count = [&](std::uint64_t bytes) {
    const auto n = static_cast<std::size_t>(
        (bytes + static_cast<std::uint64_t>(d_bytes) - 1) / static_cast<std::uint64_t>(d_bytes));
    return ((n + l - 1) / l) * l;
  };
  std::vector<std::pair<double, Packet>> schedule;
  if (st.count_up > 0) {
    detail::emit_uniform(schedule, Direction::Outgoing, padded_count(st.bytes_up), d_bytes, rho_out_ms);
  }
  if (st.count_down > 0) {
    detail::emit_uniform(schedule, Direction::Incoming, padded_count(st.bytes_down), d_bytes, rho_in_ms);
  }
  return detail::merge_schedule(std::move(schedule), trace.site_id);
}

/// Trial-level inputs the relational defenses need (chosen once per site).
struct DefenseContext {
  const Designation* designation = nullptr;       // tgpsm
  const SizeDistribution* morph_target = nullptr; // traffic-morph
};

inline Trace apply_defense(const DefenseConfig& cfg, const Trace& trace, std::uint64_t seed,
                           const DefenseContext& ctx = {}) {
  switch (cfg.kind) {
    case DefenseKind::None:
      return trace;
    case DefenseKind::PadRandom:
      return pad_random(trace, seed);
    case DefenseKind::PadMtu:
      return pad_mtu(trace);
    case DefenseKind::TrafficMorph:
      if (ctx.morph_target == nullptr) throw DataError("traffic-morph: no target distribution");
      return traffic_morph(trace, *ctx.morph_target, cfg.get("sim_thresh", 0.7), seed);
    case DefenseKind::BuFLO:
      return buflo(trace, cfg.require("tau"), cfg.require("rho"), static_cast<int>(cfg.require("d")));
    case DefenseKind::Tamaraw:
      return tamaraw(trace, cfg.require("rho_out"), cfg.require("rho_in"),
                     static_cast<int>(cfg.require("d")), static_cast<int>(cfg.require("l")));
    case DefenseKind::TGPSM:
      if (ctx.designation == nullptr) throw DataError("tgpsm: no designation");
      return morph_trace(trace, ctx.designation->destination_trace, cfg.morph, seed).output;
  }
  throw DataError("unknown defense kind");
}

}  // namespace wfbench
