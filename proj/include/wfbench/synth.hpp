#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "wfbench/rng.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

/// Latent page model used by synth_generate. Each site draws a size scale
/// (its log-normal location parameter) and a fixed set of objects, one
/// request packet out and one response packet in per object; traces of the
/// site resample timing and the sizes of its "dynamic" objects with
/// multiplicative noise. The per-site scale spread is what gives the
/// candidate clustering a real distance structure: sites with similar
/// typical packet sizes land in the same cluster, and morphing toward a
/// farther cluster costs proportionally more padding.
struct SynthProfile {
  int min_objects = 5;
  int max_objects = 50;
  double site_scale_log_mu_min = 7.8;  // per-site log-normal location, drawn once
  double site_scale_log_mu_max = 9.9;
  double object_size_log_sigma = 0.45;
  int object_size_min = 100;
  int object_size_max = 65535;
  int request_size_min = 300;
  int request_size_max = 700;
  double gap_ms_min = 5.0;        // between objects
  double gap_ms_max = 60.0;
  double response_ms_min = 1.0;   // request -> response latency
  double response_ms_max = 10.0;
  double dynamic_object_prob = 0.35;
  double size_noise_sigma = 0.12;  // log-space, dynamic objects only
  double gap_noise_sigma = 0.3;    // log-space, all gaps
};

namespace detail {

struct SynthObject {
  int request_bytes = 0;
  int response_bytes = 0;
  double gap_ms = 0.0;
  bool dynamic_size = false;
};

inline int clamp_size(double v, int lo, int hi) {
  const double r = std::round(v);
  if (r < lo) return lo;
  if (r > hi) return hi;
  return static_cast<int>(r);
}

}  // namespace detail

/// Deterministically generates a synthetic closed-world dataset: n_sites
/// websites with traces_per_site traces each. Identical arguments always
/// produce byte-identical datasets.
inline Dataset synth_generate(const SynthProfile& profile, int n_sites, int traces_per_site,
                              std::uint64_t seed) {
  if (n_sites < 2) throw DataError("synth_generate: need at least 2 sites");
  if (traces_per_site < 1) throw DataError("synth_generate: need at least 1 trace per site");

  Dataset ds;
  ds.provenance = Provenance::Synthetic;
  ds.seed = seed;

  for (int site = 0; site < n_sites; ++site) {
    char name[32];
    std::snprintf(name, sizeof(name), "s%04d", site);
    const std::string site_id(name);

    Rng site_rng(mix_seed(seed, 0x517e, static_cast<std::uint64_t>(site)));
    const double site_mu =
        site_rng.uniform_real(profile.site_scale_log_mu_min, profile.site_scale_log_mu_max);
    const int n_objects =
        static_cast<int>(site_rng.uniform_int(profile.min_objects, profile.max_objects));
    std::vector<detail::SynthObject> objects(static_cast<std::size_t>(n_objects));
    for (auto& obj : objects) {
      obj.request_bytes =
          static_cast<int>(site_rng.uniform_int(profile.request_size_min, profile.request_size_max));
      obj.response_bytes =
          detail::clamp_size(site_rng.lognormal(site_mu, profile.object_size_log_sigma),
                             profile.object_size_min, profile.object_size_max);
      obj.gap_ms = site_rng.uniform_real(profile.gap_ms_min, profile.gap_ms_max);
      obj.dynamic_size = site_rng.bernoulli(profile.dynamic_object_prob);
    }

    Website ws;
    ws.site_id = site_id;
    for (int t = 0; t < traces_per_site; ++t) {
      Rng rng(mix_seed(seed, 0x7ace, static_cast<std::uint64_t>(site), static_cast<std::uint64_t>(t)));
      Trace trace;
      trace.site_id = site_id;
      trace.packets.reserve(objects.size() * 2);
      bool first = true;
      for (const auto& obj : objects) {
        const double gap = first ? 0.0
                                 : quantize_time_delta(obj.gap_ms *
                                                       std::exp(profile.gap_noise_sigma * rng.normal()));
        trace.packets.push_back(Packet{Direction::Outgoing, gap, obj.request_bytes});
        int response = obj.response_bytes;
        if (obj.dynamic_size) {
          response = detail::clamp_size(response * std::exp(profile.size_noise_sigma * rng.normal()),
                                        profile.object_size_min, profile.object_size_max);
        }
        const double latency = quantize_time_delta(
            rng.uniform_real(profile.response_ms_min, profile.response_ms_max) *
            std::exp(profile.gap_noise_sigma * rng.normal()));
        trace.packets.push_back(Packet{Direction::Incoming, latency, response});
        first = false;
      }
      ws.traces.push_back(std::move(trace));
    }
    ds.websites.emplace(site_id, std::move(ws));
  }
  return ds;
}

}  // namespace wfbench
