#include <cmath>
#include <stdexcept>
#include <vector>

#include "aoirelay/env.hpp"
#include "aoirelay/policies.hpp"
#include "doctest.h"

using namespace aoirelay;

namespace {

SimParams defaults() { return SimParams{}; }

// A hand-built start-of-slot state with strong channels and no arrival.
NetworkState blank(const SimParams& p, std::int64_t slot) {
  NetworkState s;
  s.slot = slot;
  s.relays.assign(p.num_relays, RelayState{});
  s.aoi.current = p.aoi_max;
  s.aoi.last_delivered_gen = 1 - p.aoi_max;
  s.channels.h_mag.assign(p.num_relays, 1.0);
  s.channels.g_mag.assign(p.num_relays, 1.0);
  return s;
}

std::vector<double> zeros(std::size_t k) { return std::vector<double>(k, 0.0); }

}  // namespace

TEST_CASE("default parameters") {
  const SimParams p = defaults();
  CHECK(p.source_power / p.noise_power == doctest::Approx(1e7));
  CHECK(p.source_power / p.relay_power == doctest::Approx(1000.0));
  CHECK(p.snr_threshold() == doctest::Approx(2.0));
  CHECK(p.infeasible_penalty() == -100.0);
  CHECK(p.action_count() == 6);
  CHECK(p.observation_dim() == 16);
  CHECK(p.mean_gain_h(0) == doctest::Approx(1.0 / 1296.0));
}

TEST_CASE("validation names the offending field") {
  SimParams p;
  p.arrival_prob = 1.5;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("lambda"), std::invalid_argument);
  p = SimParams{};
  p.conversion_efficiency = 1.0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("eta"), std::invalid_argument);
  p = SimParams{};
  p.energy_buffer_max = 0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("energy_max"), std::invalid_argument);
  p = SimParams{};
  p.link_distance = 0.0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("distance"), std::invalid_argument);
  p = SimParams{};
  p.snr_threshold_override = -1.0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("snr_threshold"), std::invalid_argument);
}

TEST_CASE("sample_channels: exponential power gains") {
  SUBCASE("unit distance has unit mean") {
    SimParams p;
    p.link_distance = 1.0;
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::pow(sample_channels(rng, p).h_mag[0], 2);
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("36 m: mean |h|^2 within 1% of 36^-2 over 1e6 draws") {
    SimParams p;
    p.num_relays = 1;
    Rng rng(12);
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::pow(sample_channels(rng, p).h_mag[0], 2);
    CHECK(std::abs(sum / n - 1.0 / 1296.0) < 0.01 / 1296.0);
  }
  SUBCASE("cloned stream reproduces the draw") {
    SimParams p;
    Rng a(99);
    a.next_u64();
    Rng b = a;
    const auto x = sample_channels(a, p);
    const auto y = sample_channels(b, p);
    CHECK(x.h_mag == y.h_mag);
    CHECK(x.g_mag == y.g_mag);
  }
}

TEST_CASE("harvested_energy") {
  SimParams p;
  p.source_power = 2.0;
  CHECK(harvested_energy(1.0, p) == doctest::Approx(1.0));
  CHECK(harvested_energy(0.0, p) == 0.0);
  p.source_power = 1e5;
  CHECK(harvested_energy(std::sqrt(1e-3), p) == doctest::Approx(50.0));
}

TEST_CASE("credit_energy") {
  const SimParams p = defaults();
  const double I = p.energy_interval();
  RelayState r;
  credit_energy(r, I, p);
  CHECK(r.energy_intervals(p) == 1);

  r.energy = p.energy_capacity();
  CHECK(credit_energy(r, 12345.0, p) == 0.0);
  CHECK(r.energy == p.energy_capacity());

  r.energy = 0.6 * I;
  const double credited = credit_energy(r, 0.5 * I, p);
  CHECK(credited == doctest::Approx(0.5 * I));
  CHECK(r.energy == doctest::Approx(1.1 * I));
  CHECK(r.energy_intervals(p) == 1);

  r.energy = 2.5 * I;
  CHECK(credit_energy(r, 2.0 * I, p) == doctest::Approx(0.5 * I));
  CHECK(r.energy_intervals(p) == 3);
}

TEST_CASE("update_aoi") {
  AoiTracker t;
  t.current = 5;
  t.last_delivered_gen = 0;
  CHECK_FALSE(update_aoi(t, std::nullopt, 7, 100));
  CHECK(t.current == 6);

  t.current = 8;
  t.last_delivered_gen = 4;
  CHECK(update_aoi(t, 7, 10, 100));
  CHECK(t.current == 3);
  CHECK(t.last_delivered_gen == 7);

  t.current = 100;
  update_aoi(t, std::nullopt, 11, 100);
  CHECK(t.current == 100);

  SUBCASE("older packet is rejected") {
    CHECK_THROWS_AS(update_aoi(t, 7, 12, 100), std::logic_error);
  }
  SUBCASE("packet older than A_max is discarded without moving the tracker") {
    AoiTracker u;
    u.current = 10;
    u.last_delivered_gen = 2;
    CHECK_FALSE(update_aoi(u, 5, 20, 10));
    CHECK(u.current == 10);
    CHECK(u.last_delivered_gen == 2);
  }
}

TEST_CASE("relative_age") {
  AoiTracker t;
  t.last_delivered_gen = 9;
  RelayState r;
  r.has_packet = true;
  r.packet_gen_slot = 12;
  CHECK(relative_age(r, t) == 3);
  r.packet_gen_slot = 5;
  CHECK(relative_age(r, t) == -4);
  r.has_packet = false;
  CHECK(relative_age(r, t) == 0);

  SUBCASE("before the first delivery every packet is fresh") {
    Rng rng(1);
    const SimParams p = defaults();
    NetworkState s = initial_state(p, rng);
    RelayState q;
    q.has_packet = true;
    q.packet_gen_slot = s.slot;
    CHECK(relative_age(q, s.aoi) > 0);
  }
}

TEST_CASE("check_feasible: constraints and violation order") {
  SimParams p;
  p.num_relays = 2;
  NetworkState s = blank(p, 10);
  const double I = p.energy_interval();
  s.relays[0] = RelayState{true, 8, I};
  s.aoi.last_delivered_gen = 4;

  CHECK(check_feasible(s, Action::rd(0), p) == Violation::kNone);

  SUBCASE("energy") {
    s.relays[0].energy = 0.99 * I;
    CHECK(check_feasible(s, Action::rd(0), p) == Violation::kEnergyEmpty);
  }
  SUBCASE("outdated") {
    s.aoi.last_delivered_gen = 10;
    s.relays[0].packet_gen_slot = 8;
    CHECK(relative_age(s.relays[0], s.aoi) == -2);
    CHECK(check_feasible(s, Action::rd(0), p) == Violation::kOutdated);
  }
  SUBCASE("no arrival") {
    CHECK(check_feasible(s, Action::sr(1), p) == Violation::kNoArrival);
  }
  SUBCASE("empty buffer is reported before energy") {
    CHECK(check_feasible(s, Action::rd(1), p) == Violation::kBufferEmpty);
  }
  SUBCASE("R-D snr") {
    s.channels.g_mag[0] = 0.0;
    CHECK(check_feasible(s, Action::rd(0), p) == Violation::kSnrBelowThreshold);
  }
  SUBCASE("arrival blocks R-D (half duplex)") {
    s.arrival = true;
    CHECK(check_feasible(s, Action::rd(0), p) == Violation::kArrivalPending);
    CHECK(check_feasible(s, Action::sr(1), p) == Violation::kNone);
    s.channels.h_mag[1] = 0.0;
    CHECK(check_feasible(s, Action::sr(1), p) == Violation::kSnrBelowThreshold);
  }
  SUBCASE("SNR exactly at the threshold passes") {
    s.channels.g_mag[0] = std::sqrt(p.snr_threshold() * p.noise_power / p.relay_power);
    CHECK(snr_g(s.channels, 0, p) == doctest::Approx(p.snr_threshold()));
    // Exact equality depends on rounding; nudge up by one ulp's worth.
    s.channels.g_mag[0] *= 1.0 + 1e-15;
    CHECK(check_feasible(s, Action::rd(0), p) == Violation::kNone);
  }
}

TEST_CASE("action index layout") {
  CHECK(action_index(Action::sr(2), 3) == 2);
  CHECK(action_index(Action::rd(0), 3) == 3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(action_index(action_from_index(i, 3), 3) == i);
  CHECK_THROWS_AS(action_from_index(6, 3), std::out_of_range);

  SimParams p;
  Rng rng(1);
  NetworkState s = initial_state(p, rng);
  CHECK_THROWS_AS(step(s, std::size_t{6}, p, rng), std::out_of_range);
}

TEST_CASE("step: feasible R-D delivery (K=1)") {
  SimParams p;
  p.num_relays = 1;
  NetworkState s = blank(p, 10);
  s.relays[0] = RelayState{true, 8, 1.0 * p.energy_interval()};
  s.aoi.current = 9;
  s.aoi.last_delivered_gen = 4;
  const auto out = resolve_slot(s, Action::rd(0), p, zeros(1));
  CHECK(out.reward == 4.0);
  CHECK(out.info.aoi == 2);
  CHECK(s.aoi.current == 2);
  CHECK(s.aoi.last_delivered_gen == 8);
  CHECK(s.relays[0].energy_intervals(p) == 0);
  CHECK_FALSE(s.relays[0].has_packet);
  CHECK(out.info.delivered_gen == 8);
  CHECK(s.slot == 11);
}

TEST_CASE("step: feasible S-R reception reward sums relative ages at end of slot") {
  SimParams p;
  p.num_relays = 2;
  NetworkState s = blank(p, 20);
  s.arrival = true;
  s.aoi.last_delivered_gen = 12;
  s.relays[1] = RelayState{true, 15, 0.0};
  std::vector<double> harvest{0.0, 7.0};
  const auto out = resolve_slot(s, Action::sr(0), p, harvest);
  CHECK(out.reward == 3.0 + (20 - 12));
  CHECK(s.relays[0].has_packet);
  CHECK(s.relays[0].packet_gen_slot == 20);
  CHECK(out.info.harvested[1] == 7.0);
  CHECK(out.info.harvested[0] == 0.0);
  CHECK(out.info.source_drops == 0);
  CHECK(out.info.relay_discards == 0);
}

TEST_CASE("step: reception into an occupied buffer discards the resident packet") {
  SimParams p;
  p.num_relays = 2;
  NetworkState s = blank(p, 20);
  s.arrival = true;
  s.relays[0] = RelayState{true, 15, 0.0};
  const auto out = resolve_slot(s, Action::sr(0), p, zeros(2));
  CHECK(out.info.relay_discards == 1);
  CHECK(s.relays[0].packet_gen_slot == 20);
}

TEST_CASE("step: infeasible actions") {
  SimParams p;
  p.num_relays = 2;
  NetworkState s = blank(p, 20);
  s.aoi.current = 7;
  const NetworkState before = s;
  std::vector<double> harvest{50.0, 60.0};

  SUBCASE("no-op apart from AoI") {
    const auto out = resolve_slot(s, Action::rd(0), p, harvest);
    CHECK(out.reward == p.infeasible_penalty());
    CHECK(out.info.violation == Violation::kBufferEmpty);
    CHECK(s.aoi.current == 8);
    CHECK(s.relays[0].energy == before.relays[0].energy);
    CHECK(s.relays[1].energy == before.relays[1].energy);
  }
  SUBCASE("S-R with arrival and weak link: others harvest, packet dropped") {
    s.arrival = true;
    s.channels.h_mag[0] = 0.0;
    const auto out = resolve_slot(s, Action::sr(0), p, harvest);
    CHECK(out.reward == p.infeasible_penalty());
    CHECK(out.info.violation == Violation::kSnrBelowThreshold);
    CHECK(out.info.source_drops == 1);
    CHECK(out.info.harvested[0] == 0.0);
    CHECK(out.info.harvested[1] == 60.0);
    CHECK_FALSE(s.relays[0].has_packet);
  }
  SUBCASE("R-D while a packet arrives: nobody harvests, packet dropped") {
    s.arrival = true;
    s.relays[0] = RelayState{true, 19, p.energy_interval()};
    const auto out = resolve_slot(s, Action::rd(0), p, harvest);
    CHECK(out.info.violation == Violation::kArrivalPending);
    CHECK(out.info.source_drops == 1);
    CHECK(out.info.harvested == std::vector<double>{0.0, 0.0});
    CHECK(s.relays[0].has_packet);
  }
  SUBCASE("AoI stays capped") {
    s.aoi.current = p.aoi_max;
    resolve_slot(s, Action::rd(1), p, harvest);
    CHECK(s.aoi.current == p.aoi_max);
  }
  SUBCASE("idle") {
    const auto out = resolve_slot(s, std::nullopt, p, harvest);
    CHECK(out.reward == 0.0);
    CHECK(out.info.violation == Violation::kIdle);
    CHECK(s.aoi.current == 8);
  }
}

TEST_CASE("step: a delivered packet older than A_max is dropped at D") {
  SimParams p;
  p.num_relays = 1;
  p.aoi_max = 10;
  NetworkState s = blank(p, 50);
  s.aoi.current = 10;
  s.aoi.last_delivered_gen = 20;
  s.relays[0] = RelayState{true, 30, p.energy_interval()};
  const auto out = resolve_slot(s, Action::rd(0), p, zeros(1));
  CHECK(out.info.feasible());
  CHECK(out.info.stale_drops == 1);
  CHECK_FALSE(out.info.delivered_gen);
  CHECK(s.aoi.current == 10);
  CHECK(s.aoi.last_delivered_gen == 20);
}

TEST_CASE("observe") {
  SUBCASE("K=1 self-normalizes") {
    SimParams p;
    p.num_relays = 1;
    NetworkState s = blank(p, 5);
    s.channels.h_mag = {0.013};
    s.channels.g_mag = {4.2};
    const auto o = observe(s, p);
    REQUIRE(o.size() == 6);
    CHECK(o[0] == 1.0);
    CHECK(o[1] == 1.0);
  }
  SUBCASE("energy and relative-age blocks") {
    SimParams p;
    p.num_relays = 2;
    NetworkState s = blank(p, 300);
    const double I = p.energy_interval();
    s.relays[0] = RelayState{true, 50, 1.0 * I};
    s.relays[1] = RelayState{true, 220, 3.0 * I};
    s.aoi.last_delivered_gen = 200;
    s.arrival = true;
    s.channels.h_mag = {0.5, 0.25};
    s.channels.g_mag = {0.0, 0.0};
    const auto o = observe(s, p);
    REQUIRE(o.size() == 11);
    CHECK(o[0] == 1.0);
    CHECK(o[1] == 0.5);
    CHECK(o[2] == 0.0);  // all-zero hop
    CHECK(o[3] == 0.0);
    CHECK(o[4] == 1.0);
    CHECK(o[5] == 1.0);
    CHECK(o[6] == doctest::Approx(1.0 / 3.0));
    CHECK(o[7] == 1.0);
    CHECK(o[8] == -1.0);  // -150 / 100 clamped
    CHECK(o[9] == doctest::Approx(0.2));
    CHECK(o[10] == 1.0);
  }
}

// Trajectory-level properties under a mix of policies.
TEST_CASE("trajectory invariants") {
  for (std::size_t K : {1u, 2u, 3u, 5u}) {
    for (auto kind : {PolicyKind::kRandom, PolicyKind::kGreedy, PolicyKind::kMaxLink, PolicyKind::kDbrsVariant}) {
      SimParams p;
      p.num_relays = K;
      p.aoi_max = 30;
      Rng env_rng(100 + K);
      Rng pol_rng(200 + K);
      NetworkState s = initial_state(p, env_rng);
      std::int64_t generated = 0, accounted = 0;
      for (int n = 0; n < 50000; ++n) {
        const NetworkState before = s;
        const Decision d = select(kind, s, p, pol_rng);
        const auto harvest = offered_harvest(s, p, env_rng);
        const auto out = resolve_slot(s, d, p, harvest);

        // AoI recurrence bounds.
        REQUIRE(s.aoi.current >= 1);
        REQUIRE(s.aoi.current <= p.aoi_max);
        REQUIRE(s.aoi.current <= std::min(before.aoi.current + 1, p.aoi_max));
        if (s.aoi.current < std::min(before.aoi.current + 1, p.aoi_max)) {
          REQUIRE(out.info.delivered_gen);
          REQUIRE(*out.info.delivered_gen > before.aoi.last_delivered_gen);
        }
        REQUIRE(s.aoi.last_delivered_gen >= before.aoi.last_delivered_gen);

        // Deliveries honour every transmission constraint.
        if (out.info.delivered_gen || out.info.stale_drops) {
          const Action a = *d;
          const RelayState& r = before.relays[a.relay];
          REQUIRE(r.has_packet);
          REQUIRE(r.energy_intervals(p) >= 1);
          REQUIRE(snr_g(before.channels, a.relay, p) >= p.snr_threshold());
          REQUIRE(relative_age(r, before.aoi) > 0);
          REQUIRE_FALSE(before.arrival);
        }

        // Energy conservation and buffer bounds.
        for (std::size_t k = 0; k < K; ++k) {
          const bool transmitted = d && d->direction == Direction::kRelayToDest && d->relay == k && out.info.feasible();
          const double expected = before.relays[k].energy + out.info.harvested[k] - (transmitted ? p.energy_interval() : 0.0);
          REQUIRE(s.relays[k].energy == doctest::Approx(expected).epsilon(1e-12));
          REQUIRE(out.info.harvested[k] <= harvest[k] + 1e-12);
          REQUIRE(s.relays[k].energy_intervals(p) >= 0);
          REQUIRE(s.relays[k].energy_intervals(p) <= p.energy_buffer_max);
          if (s.relays[k].has_packet) REQUIRE(s.relays[k].packet_gen_slot < s.slot);
        }

        generated += out.info.packets_generated;
        accounted += (out.info.delivered_gen ? 1 : 0) + out.info.relay_discards + out.info.source_drops + out.info.stale_drops;
        begin_slot(s, sample_channels(env_rng, p), env_rng.bernoulli(p.arrival_prob));
      }
      for (const auto& r : s.relays) accounted += r.has_packet ? 1 : 0;
      CHECK(generated == accounted);
    }
  }
}

TEST_CASE("per-link decode probability matches the closed form") {
  SimParams p;
  p.num_relays = 2;
  p.snr_threshold_override = 10.0;  // makes the R-D failure rate sizeable
  Rng rng(5);
  const int n = 300000;
  int ok_h = 0, ok_g = 0;
  for (int i = 0; i < n; ++i) {
    const auto ch = sample_channels(rng, p);
    ok_h += snr_h(ch, 1, p) >= p.snr_threshold();
    ok_g += snr_g(ch, 1, p) >= p.snr_threshold();
  }
  auto check = [n](int hits, double prob) {
    const double sd = std::sqrt(prob * (1 - prob) / n);
    CHECK(std::abs(static_cast<double>(hits) / n - prob) <= 3 * sd + 1e-12);
  };
  const double d2 = 36.0 * 36.0;
  check(ok_h, std::exp(-10.0 * p.noise_power * d2 / p.source_power));
  check(ok_g, std::exp(-10.0 * p.noise_power * d2 / p.relay_power));
}

TEST_CASE("quantized variant: binary links and whole-interval harvests") {
  SimParams p;
  p.num_relays = 1;
  p.channel_model = ChannelModel::kBinary;
  p.energy_model = EnergyModel::kBernoulliInterval;
  Rng rng(8);
  const int n = 200000;
  int ok_g = 0, full = 0;
  NetworkState s = initial_state(p, rng);
  for (int i = 0; i < n; ++i) {
    const auto ch = sample_channels(rng, p);
    for (double m : ch.g_mag) {
      const double snr = m * m * p.relay_power / p.noise_power;
      CHECK((snr == 0.0 || snr >= p.snr_threshold()));
    }
    ok_g += snr_g(ch, 0, p) >= p.snr_threshold();
    const auto h = offered_harvest(s, p, rng);
    CHECK((h[0] == 0.0 || h[0] == p.energy_interval()));
    full += h[0] > 0.0;
  }
  const double pg = std::exp(-2.0 * p.noise_power * 1296.0 / p.relay_power);
  CHECK(std::abs(static_cast<double>(ok_g) / n - pg) < 4 * std::sqrt(pg * (1 - pg) / n));
  // q = eta * P_S * E|h|^2 * t / (P_R * t) = 0.5 * 1e5 / 1296 / 100
  const double q = 0.5 * 1e5 / 1296.0 / 100.0;
  CHECK(interval_completion_prob(0, p) == doctest::Approx(q));
  CHECK(std::abs(static_cast<double>(full) / n - q) < 4 * std::sqrt(q * (1 - q) / n));
}

TEST_CASE("environment determinism") {
  SimParams p;
  Environment a(p, 77), b(p, 77);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t act = static_cast<std::size_t>(i) % p.action_count();
    const auto x = a.step(act);
    const auto y = b.step(act);
    REQUIRE(x.reward == y.reward);
    REQUIRE(a.observe() == b.observe());
  }
}
