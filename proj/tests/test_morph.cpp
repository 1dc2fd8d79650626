#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "wfbench/morph.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/synth.hpp"

using namespace wfbench;

namespace {

Trace sized_trace(std::initializer_list<std::pair<int, int>> dir_size, double gap = 1.0) {
  Trace t;
  bool first = true;
  for (const auto& [dir, size] : dir_size) {
    t.packets.push_back(Packet{dir == 1 ? Direction::Incoming : Direction::Outgoing,
                               first ? 0.0 : gap, size});
    first = false;
  }
  return t;
}

Trace random_trace(Rng& rng, std::size_t min_packets = 4, std::size_t max_packets = 80) {
  Trace t;
  const std::size_t n = min_packets + rng.below(max_packets - min_packets + 1);
  for (std::size_t i = 0; i < n; ++i) {
    t.packets.push_back(Packet{rng.bernoulli(0.4) ? Direction::Outgoing : Direction::Incoming,
                               i == 0 ? 0.0 : quantize_time_delta(rng.uniform_real(0.0, 30.0)),
                               static_cast<int>(rng.uniform_int(60, 20000))});
  }
  return t;
}

std::set<int> sizes_of(std::initializer_list<int> xs) { return std::set<int>(xs); }

}  // namespace

TEST_CASE("jaccard over distinct sizes") {
  CHECK(jaccard(sizes_of({100, 200}), sizes_of({100, 200})) == 1.0);
  CHECK(jaccard(sizes_of({100}), sizes_of({200})) == 0.0);
  // brute force: |{200,300}| / |{100,200,300,400}| = 2/4
  CHECK(jaccard(sizes_of({100, 200, 300}), sizes_of({200, 300, 400})) == 0.5);
  CHECK(jaccard(std::set<int>{}, std::set<int>{}) == 1.0);
  CHECK(jaccard(std::set<int>{}, sizes_of({5})) == 0.0);

  // packet overload: multiset collapses to distinct sizes
  const Trace a = sized_trace({{1, 100}, {1, 100}, {1, 200}});
  const Trace b = sized_trace({{1, 200}, {-1, 300}});
  CHECK(jaccard(a.packets, b.packets) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("packet_morph pads up to a larger target") {
  const Packet p{Direction::Incoming, 2.0, 500};
  const Packet target{Direction::Incoming, 1.0, 1500};
  const auto out = packet_morph(p, target);
  REQUIRE(out.size() == 1);
  CHECK(out[0].size_bytes == 1500);
  CHECK(out[0].time_delta_ms == 2.0);  // max(p, target)
}

TEST_CASE("packet_morph fragments exactly when sizes divide") {
  const Packet p{Direction::Outgoing, 1.0, 3000};
  const Packet target{Direction::Outgoing, 4.0, 1000};
  const auto out = packet_morph(p, target);
  REQUIRE(out.size() == 3);
  for (const Packet& f : out) CHECK(f.size_bytes == 1000);
  CHECK(out[0].time_delta_ms == 4.0);  // max(1, 4)
  CHECK(out[1].time_delta_ms == 4.0);  // target spacing
  CHECK(out[2].time_delta_ms == 4.0);
  // zero padding
  std::uint64_t total = 0;
  for (const Packet& f : out) total += static_cast<std::uint64_t>(f.size_bytes);
  CHECK(total == 3000);
}

TEST_CASE("packet_morph pads the final fragment") {
  const Packet p{Direction::Outgoing, 0.0, 2500};
  const Packet target{Direction::Outgoing, 0.5, 1000};
  const auto out = packet_morph(p, target);
  REQUIRE(out.size() == 3);  // ceil(2500/1000)
  std::uint64_t total = 0;
  for (const Packet& f : out) total += static_cast<std::uint64_t>(f.size_bytes);
  CHECK(total - 2500 == 500);  // padding
}

TEST_CASE("packet_morph rejects direction mismatch") {
  CHECK_THROWS_AS(packet_morph(Packet{Direction::Incoming, 0.0, 100},
                               Packet{Direction::Outgoing, 0.0, 100}),
                  DataError);
}

TEST_CASE("goal function by hand: pad from 500 to 1000") {
  // fresh state, one destination slice [in:1000, in:2000]
  const Trace dst = sized_trace({{1, 1000}, {1, 2000}});
  MorphParams params;
  params.m = 1;
  MorphState st = detail::make_morph_state(dst, params.m);
  const Packet p{Direction::Incoming, 0.0, 500};
  const Packet target = dst.packets[0];

  // pass: emits {500} vs prefix {1000} -> sim 0, overhead 0 -> score 0
  // morph: emits {1000} vs prefix {1000} -> sim 1, overhead 100% -> 1 - (a/d)*100
  params.alpha = 0.01;
  params.d = 1;
  GoalScores g = gf_morph(st, p, target, params);
  CHECK(g.pass_score == Catch::Approx(0.0).margin(1e-12));
  CHECK(g.morph_score == Catch::Approx(0.0).margin(1e-12));
  CHECK_FALSE(g.pass_score > g.morph_score);  // tie -> morph

  params.alpha = 0.02;  // heavier overhead penalty: pass wins
  g = gf_morph(st, p, target, params);
  CHECK(g.morph_score == Catch::Approx(-1.0).margin(1e-12));
  CHECK(g.pass_score > g.morph_score);

  params.alpha = 0.02;
  params.d = 4;  // same alpha, higher d: penalty shrinks, morph wins again
  g = gf_morph(st, p, target, params);
  CHECK(g.morph_score == Catch::Approx(0.5).margin(1e-12));
  CHECK_FALSE(g.pass_score > g.morph_score);
}

TEST_CASE("goal function with a vanishing alpha follows similarity only") {
  const Trace dst = sized_trace({{1, 900}});
  MorphParams params;
  params.m = 1;
  params.alpha = 1e-12;
  params.d = 1;
  MorphState st = detail::make_morph_state(dst, params.m);
  const Packet p{Direction::Incoming, 0.0, 100};
  const GoalScores g = gf_morph(st, p, dst.packets[0], params);
  // morph similarity 1 vs pass similarity 0; the tiny penalty cannot flip it
  CHECK(g.morph_score > g.pass_score);
}

TEST_CASE("large alpha with a much bigger target makes pass win") {
  const Trace dst = sized_trace({{1, 60000}});
  MorphParams params;
  params.m = 1;
  params.alpha = 1.0;
  params.d = 1;
  MorphState st = detail::make_morph_state(dst, params.m);
  const Packet p{Direction::Incoming, 0.0, 100};
  const GoalScores g = gf_morph(st, p, dst.packets[0], params);
  // overhead of morphing: (60000-100)/100 = 59900% -> dwarfs the +1 similarity
  CHECK(g.pass_score > g.morph_score);
}

TEST_CASE("equal-size packets tie and the tie morphs, consuming the target") {
  const Trace src = sized_trace({{1, 1200}, {1, 1200}});
  const Trace dst = sized_trace({{1, 1200}, {1, 777}});
  MorphParams params;
  params.m = 1;
  const MorphedTrace out = morph_trace(src, dst, params, 0);
  REQUIRE(out.decisions.size() == 2);
  CHECK(out.decisions[0] == MorphDecision::Morphed);
  // the first morph consumed dst[0]; the second packet faces target 777
  CHECK(out.output.packets[0].size_bytes == 1200);
}

TEST_CASE("self-morph is the identity with zero overhead") {
  Rng rng(404);
  for (int iter = 0; iter < 30; ++iter) {
    const Trace t = random_trace(rng);
    MorphParams params;
    const MorphedTrace out = morph_trace(t, t, params, 9);
    CHECK(out.output.packets == t.packets);
    CHECK(out.overhead_percent == 0.0);
    CHECK(out.added_delay_ms == 0.0);
    for (const MorphDecision d : out.decisions) CHECK(d != MorphDecision::SliceAborted);
  }
}

TEST_CASE("payload conservation, ordering, and determinism on random pairs") {
  Rng rng(505);
  for (int iter = 0; iter < 150; ++iter) {
    const Trace src = random_trace(rng);
    const Trace dst = random_trace(rng);
    MorphParams params;
    params.d = 1 + static_cast<int>(rng.below(9));
    params.sim_thresh = rng.uniform_real(0.0, 1.0);
    const MorphedTrace a = morph_trace(src, dst, params, 1);
    const MorphedTrace b = morph_trace(src, dst, params, 1);
    CHECK(a.output.packets == b.output.packets);  // deterministic

    CHECK(total_bytes(a.output) >= total_bytes(src));  // payload conservation
    CHECK(a.decisions.size() == src.packets.size());
    for (const Packet& p : a.output.packets) {
      CHECK(p.time_delta_ms >= 0.0);
      CHECK(p.size_bytes >= kMinPacketBytes);
      CHECK(p.size_bytes <= kMaxPacketBytes);
    }
    CHECK(a.output.packets.front().time_delta_ms == 0.0);
    CHECK(a.added_delay_ms >= 0.0);

    const double expect_overhead =
        100.0 *
        (static_cast<double>(total_bytes(a.output)) - static_cast<double>(total_bytes(src))) /
        static_cast<double>(total_bytes(src));
    CHECK(a.overhead_percent == Catch::Approx(expect_overhead).margin(1e-9));
  }
}

TEST_CASE("source payload order within a direction is preserved") {
  Rng rng(606);
  for (int iter = 0; iter < 40; ++iter) {
    const Trace src = random_trace(rng);
    const Trace dst = random_trace(rng);
    MorphParams params;
    params.d = 3;
    const MorphedTrace out = morph_trace(src, dst, params, 0);
    // per direction, the i-th source packet maps to a contiguous emitted group;
    // groups appear in source order, so per-direction output counts match the
    // sum of fragment counts in order. Verify by replaying the decisions.
    std::size_t emitted = 0;
    for (std::size_t i = 0; i < src.packets.size(); ++i) {
      REQUIRE(emitted < out.output.packets.size());
      CHECK(out.output.packets[emitted].direction == src.packets[i].direction);
      // advance past this packet's group (same direction, same size run)
      if (out.decisions[i] == MorphDecision::Morphed) {
        const int emitted_size = out.output.packets[emitted].size_bytes;
        std::uint64_t covered = 0;
        while (covered < static_cast<std::uint64_t>(src.packets[i].size_bytes)) {
          REQUIRE(out.output.packets[emitted].size_bytes == emitted_size);
          covered += static_cast<std::uint64_t>(emitted_size);
          ++emitted;
        }
      } else {
        CHECK(out.output.packets[emitted].size_bytes == src.packets[i].size_bytes);
        ++emitted;
      }
    }
    CHECK(emitted == out.output.packets.size());
  }
}

TEST_CASE("raising d never lowers the overhead on the same pair") {
  const Dataset ds = synth_generate(SynthProfile{}, 24, 6, 77);
  std::vector<const Trace*> traces;
  for (const auto& [site_id, ws] : ds.websites) {
    for (const Trace& t : ws.traces) traces.push_back(&t);
  }
  Rng rng(808);
  int checked = 0;
  while (checked < 100) {
    const Trace& src = *traces[rng.below(traces.size())];
    const Trace& dst = *traces[rng.below(traces.size())];
    if (src.site_id == dst.site_id) continue;
    MorphParams lo;
    lo.d = 1;
    MorphParams hi;
    hi.d = 9;
    const double ov_lo = morph_trace(src, dst, lo, 4).overhead_percent;
    const double ov_hi = morph_trace(src, dst, hi, 4).overhead_percent;
    REQUIRE(ov_hi >= ov_lo - 1e-9);
    ++checked;
  }
}

TEST_CASE("zero threshold with an unbounded budget morphs every matchable packet") {
  Rng rng(909);
  for (int iter = 0; iter < 25; ++iter) {
    const Trace src = random_trace(rng);
    const Trace dst = random_trace(rng);
    MorphParams params;
    params.sim_thresh = 0.0;
    params.bw_d_factor = 1e12;  // budget never binds
    params.alpha = 1e-9;        // overhead penalty never flips a decision
    const MorphedTrace out = morph_trace(src, dst, params, 0);
    for (const MorphDecision d : out.decisions) CHECK(d != MorphDecision::SliceAborted);
    // every pass must be explained by an exhausted same-direction cursor,
    // which morphing afterwards could not refill; verify per-direction pass
    // counts against available targets per slice via a replay
    std::size_t morphs = 0;
    for (const MorphDecision d : out.decisions) morphs += d == MorphDecision::Morphed ? 1 : 0;
    CHECK(morphs > 0);
  }
}

TEST_CASE("the overhead abort keeps cumulative overhead near the budget") {
  // every destination packet is ~80% larger than its source counterpart, so
  // unconstrained morphing costs ~80%
  Trace src, dst;
  for (int i = 0; i < 400; ++i) {
    src.packets.push_back(Packet{Direction::Incoming, i == 0 ? 0.0 : 1.0, 1000 + i});
    dst.packets.push_back(Packet{Direction::Incoming, i == 0 ? 0.0 : 1.0, 1800 + 7 * (i % 40)});
  }
  MorphParams params;
  params.d = 1;  // 25% budget
  const MorphedTrace out = morph_trace(src, dst, params, 0);
  bool aborted = false;
  for (const MorphDecision d : out.decisions) aborted |= d == MorphDecision::SliceAborted;
  CHECK(aborted);
  CHECK(out.overhead_percent < 60.0);  // near the budget, not near the demand
  const MorphedTrace free_run = morph_trace(src, dst, MorphParams{9, 0.7, 10, 0.01, 1e9}, 0);
  CHECK(free_run.overhead_percent > 60.0);
  CHECK(out.overhead_percent < free_run.overhead_percent);
}

TEST_CASE("destination shorter than m shrinks the slice count") {
  const Trace src = sized_trace({{1, 100}, {1, 200}, {1, 300}, {1, 400}});
  const Trace dst = sized_trace({{1, 500}, {1, 600}});
  MorphParams params;
  params.m = 10;
  const MorphedTrace out = morph_trace(src, dst, params, 0);  // must not throw
  CHECK(out.decisions.size() == 4);
}

TEST_CASE("empty source gives an empty defended trace") {
  Trace src;
  src.site_id = "empty";
  const Trace dst = sized_trace({{1, 100}});
  const MorphedTrace out = morph_trace(src, dst, MorphParams{}, 0);
  CHECK(out.output.packets.empty());
  CHECK(out.overhead_percent == 0.0);
  CHECK(out.decisions.empty());
}

TEST_CASE("empty destination is rejected") {
  const Trace src = sized_trace({{1, 100}});
  CHECK_THROWS_AS(morph_trace(src, Trace{}, MorphParams{}, 0), DataError);
}

TEST_CASE("morph params are validated") {
  const Trace t = sized_trace({{1, 100}});
  MorphParams bad;
  bad.d = 0;
  CHECK_THROWS_AS(morph_trace(t, t, bad, 0), DataError);
  bad = MorphParams{};
  bad.sim_thresh = 1.5;
  CHECK_THROWS_AS(morph_trace(t, t, bad, 0), DataError);
  bad = MorphParams{};
  bad.alpha = 0.0;
  CHECK_THROWS_AS(morph_trace(t, t, bad, 0), DataError);
}
