#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ddepulse/model.hpp"
#include "ddepulse/periodic.hpp"
#include "ddepulse/rng.hpp"
#include "ddepulse/solver.hpp"

using namespace ddepulse;

TEST_CASE("a1 threshold anchors", "[periodic]") {
    CHECK(a1_threshold(0.4, 0.6, 0.45) == Catch::Approx(0.90384).margin(1e-4));
    CHECK(a1_threshold(0.6288, 2.4, 2.4) == Catch::Approx(7.5602).margin(1e-4));
    // alpha -> 0+: numerator tends to 1 - e^-sigma, so a1 -> beta_U
    CHECK(a1_threshold(0.7, 0.5, 1e-9) == Catch::Approx(0.7).margin(1e-6));
}

TEST_CASE("forced cycle extrema", "[periodic]") {
    SECTION("at threshold the minimum grazes zero") {
        const ModelParams p{1.0, 0.4, 0.4};
        const double sigma = 0.6, alpha = 0.45;
        const double a1 = a1_threshold(p.beta_up, sigma, alpha);
        const ForcedCycle fc = forced_cycle(p, sigma, alpha, a1);
        CHECK(fc.x_min_p == Catch::Approx(0.0).margin(1e-12));
        CHECK(fc.x_max_p ==
              Catch::Approx(p.beta_up * (std::exp(alpha) - 1.0)).margin(1e-12));
    }
    SECTION("the dosing working point holds the target band") {
        const ModelParams p{1.0, 0.4, 1.4};
        const ForcedCycle fc = forced_cycle(p, 0.6, 0.510826, 1.48655);
        CHECK(fc.x_min_p == Catch::Approx(0.2).margin(1e-4));
        CHECK(fc.x_max_p == Catch::Approx(0.6).margin(1e-4));
    }
    SECTION("below threshold the closed form refuses") {
        const ModelParams p{1.0, 0.4, 1.4};
        const double a1 = a1_threshold(0.4, 0.6, 0.45);
        CHECK_THROWS_AS(forced_cycle(p, 0.6, 0.45, 0.99 * a1), BelowThreshold);
    }
    SECTION("extrema equal the pulse-map limits") {
        Rng rng(1234);
        for (int i = 0; i < 20; ++i) {
            const ModelParams p{rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.5),
                                rng.uniform(0.2, 1.5)};
            const double sigma = rng.uniform(0.1, 1.0) * p.tau;
            const double alpha = rng.uniform(0.1, 1.5);
            const double a =
                a1_threshold(p.beta_up, sigma, alpha) * rng.uniform(1.0, 2.5);
            const ForcedCycle fc = forced_cycle(p, sigma, alpha, a);
            const int n = static_cast<int>(40.0 / fc.period) + 5;
            const PulseMapSequences seq = pulse_map_closed(p, sigma, alpha, a, n);
            CHECK(seq.at_onset.back() == Catch::Approx(fc.x_min_p).margin(1e-10));
            CHECK(seq.at_offset.back() == Catch::Approx(fc.x_max_p).margin(1e-10));
            CHECK(forced_cycle_amplitude(fc) ==
                  Catch::Approx(a * (1.0 - std::exp(-sigma)) *
                                (std::exp(alpha) - 1.0) /
                                (std::exp(alpha) - std::exp(-sigma)))
                      .margin(1e-12));
            CHECK(forced_cycle_amplitude(fc) > 0.0);
        }
    }
}

TEST_CASE("pulse map sequences from z2", "[periodic]") {
    const ModelParams p{1.0, 0.4, 0.4};
    const double sigma = 0.6, alpha = 0.45;
    const double a1 = a1_threshold(p.beta_up, sigma, alpha);
    const LimitCycle lc = limit_cycle(p);

    SECTION("first offset sample is (a - beta_U)(1 - e^-sigma)") {
        const PulseMapSequences seq = pulse_map_closed(p, sigma, alpha, a1, 0);
        CHECK(seq.at_offset[0] ==
              Catch::Approx((a1 - p.beta_up) * (1.0 - std::exp(-sigma)))
                  .margin(1e-13));
        CHECK(seq.at_onset[0] == Catch::Approx(0.0).margin(1e-13));
    }

    SECTION("sequences are monotone toward the forced cycle") {
        // at a = a1 exactly the onsets sit at zero and the offsets at the
        // forced maximum from the first pulse on (weakly monotone)
        const PulseMapSequences at_th = pulse_map_closed(p, sigma, alpha, a1, 20);
        for (int k = 1; k <= 20; ++k) {
            CHECK(at_th.at_onset[k] >= at_th.at_onset[k - 1] - 1e-15);
            CHECK(at_th.at_offset[k] >= at_th.at_offset[k - 1] - 1e-15);
            CHECK(at_th.at_onset[k] == Catch::Approx(0.0).margin(1e-14));
        }
        // strictly above threshold the chain is strict until rounding
        const PulseMapSequences above =
            pulse_map_closed(p, sigma, alpha, 1.2 * a1, 8);
        for (int k = 1; k <= 8; ++k) {
            CHECK(above.at_onset[k] > above.at_onset[k - 1]);
            CHECK(above.at_offset[k] > above.at_offset[k - 1]);
        }
    }

    SECTION("closed form matches the engine at every onset and offset") {
        const ForcingSchedule f = ForcingSchedule::periodic(lc.z2, sigma, alpha, a1);
        const PulseMapSequences closed = pulse_map_closed(p, sigma, alpha, a1, 20);
        const PulseMapSequences sim = pulse_map_simulated(p, f, 20);
        for (int k = 0; k <= 20; ++k) {
            CHECK(sim.at_onset[k] == Catch::Approx(closed.at_onset[k]).margin(1e-10));
            CHECK(sim.at_offset[k] ==
                  Catch::Approx(closed.at_offset[k]).margin(1e-10));
        }
    }

    SECTION("iterate_pulse_map picks the closed route at z2") {
        const ForcingSchedule f = ForcingSchedule::periodic(lc.z2, sigma, alpha, a1);
        const PulseMapSequences a = iterate_pulse_map(p, f, 8);
        const PulseMapSequences b = pulse_map_closed(p, sigma, alpha, a1, 8);
        for (int k = 0; k <= 8; ++k) CHECK(a.at_onset[k] == b.at_onset[k]);
        CHECK_THROWS_AS(
            iterate_pulse_map(
                p, ForcingSchedule::periodic(lc.z2, sigma, alpha, 0.9 * a1), 8),
            BelowThreshold);
    }
}

TEST_CASE("onset deviations contract by exactly e^-Tp per pulse", "[periodic]") {
    Rng rng(777);
    for (int i = 0; i < 10; ++i) {
        const ModelParams p{rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.5),
                            rng.uniform(0.2, 1.5)};
        const double sigma = rng.uniform(0.1, 1.0) * p.tau;
        const double alpha = rng.uniform(0.1, 1.5);
        const double a =
            a1_threshold(p.beta_up, sigma, alpha) * rng.uniform(1.0, 2.0);
        const ForcedCycle fc = forced_cycle(p, sigma, alpha, a);
        const PulseMapSequences seq = pulse_map_closed(p, sigma, alpha, a, 12);
        const double rate = std::exp(-fc.period);
        const double scale = std::max({1.0, std::abs(fc.x_min_p), p.beta_up});
        for (int k = 0; k + 1 <= 12; ++k) {
            const double d0 = seq.at_onset[k] - fc.x_min_p;
            const double d1 = seq.at_onset[k + 1] - fc.x_min_p;
            CHECK(std::abs(d1 - rate * d0) < 1e-13 * scale);
        }
    }
}

TEST_CASE("any onset phase converges to the same forced cycle", "[periodic]") {
    const ModelParams p{1.0, 0.4, 1.4};
    const double sigma = 0.6, alpha = 0.510826, a = 1.48655;
    const ForcedCycle fc = forced_cycle(p, sigma, alpha, a);
    const LimitCycle lc = limit_cycle(p);
    Rng rng(20202);
    for (int i = 0; i < 20; ++i) {
        const double delta0 = rng.uniform(0.0, lc.period * (1.0 - 1e-9));
        const ForcingSchedule f = ForcingSchedule::periodic(delta0, sigma, alpha, a);
        const double t_end = delta0 + 40.0 * fc.period;
        const Trajectory traj = solve(p, limit_cycle_history(p), f, t_end);
        // extrema over the last forcing period
        double lo = traj.eval(t_end - fc.period), hi = lo;
        for (const Segment& s : traj.path.segments()) {
            if (s.hi <= t_end - fc.period) continue;
            const double v0 = s.eval(std::max(s.lo, t_end - fc.period));
            const double v1 = s.eval(s.hi);
            lo = std::min(lo, std::min(v0, v1));
            hi = std::max(hi, std::max(v0, v1));
        }
        CHECK(lo == Catch::Approx(fc.x_min_p).margin(1e-8));
        CHECK(hi == Catch::Approx(fc.x_max_p).margin(1e-8));
    }
}

TEST_CASE("nonnegative history at the forced minimum starts on the cycle",
          "[periodic]") {
    const ModelParams p{1.0, 0.4, 0.4};
    const double sigma = 0.6, alpha = 0.45;
    const double a = 1.2 * a1_threshold(p.beta_up, sigma, alpha);
    const ForcedCycle fc = forced_cycle(p, sigma, alpha, a);
    const ForcingSchedule f = ForcingSchedule::periodic(0.0, sigma, alpha, a);
    const Trajectory traj =
        solve(p, constant_history(fc.x_min_p, p.tau), f, 12.0 * fc.period);

    for (int n = 0; n < 10; ++n) {
        const double on = n * fc.period;
        CHECK(traj.eval(on) == Catch::Approx(fc.x_min_p).margin(1e-12));
        CHECK(traj.eval(on + sigma) == Catch::Approx(fc.x_max_p).margin(1e-12));
        // mid-piece values follow the two-branch closed form
        const double t1 = on + 0.5 * sigma;
        const double expect1 =
            -p.beta_up + a + (fc.x_min_p + p.beta_up - a) * std::exp(-(t1 - on));
        CHECK(traj.eval(t1) == Catch::Approx(expect1).margin(1e-12));
        const double t2 = on + sigma + 0.5 * alpha;
        const double expect2 =
            -p.beta_up + (fc.x_max_p + p.beta_up) * std::exp(-(t2 - on - sigma));
        CHECK(traj.eval(t2) == Catch::Approx(expect2).margin(1e-12));
    }
}

TEST_CASE("frequency locking detection", "[periodic]") {
    const ModelParams fig10{1.0, 0.7, 1.4};
    const double sigma = 0.6, alpha = 0.3;

    SECTION("period-5 window locks 5:1 with response period 4.5") {
        ModelParams p = fig10;
        const LimitCycle lc = limit_cycle(p);
        const ForcingSchedule f = ForcingSchedule::periodic(lc.z2, sigma, alpha, 1.1);
        const LockReport rep = find_locking(p, f, 500.0, 300.0);
        REQUIRE(rep.ratio.has_value());
        CHECK(*rep.ratio == 5);
        CHECK(rep.response_period == Catch::Approx(4.5).margin(1e-12));
    }

    SECTION("raising beta_U to 1.3 locks 29:1 with response period 26.1") {
        ModelParams p = fig10;
        p.beta_up = 1.3;
        const LimitCycle lc = limit_cycle(p);
        const ForcingSchedule f = ForcingSchedule::periodic(lc.z2, sigma, alpha, 0.9);
        const LockReport rep = find_locking(p, f, 700.0, 400.0);
        REQUIRE(rep.ratio.has_value());
        CHECK(*rep.ratio == 29);
        CHECK(rep.response_period == Catch::Approx(26.1).margin(1e-12));
    }

    SECTION("above threshold every configuration locks 1:1") {
        Rng rng(4811);
        for (int i = 0; i < 5; ++i) {
            const ModelParams p{rng.uniform(0.6, 1.5), rng.uniform(0.3, 1.2),
                                rng.uniform(0.3, 1.2)};
            const double s = rng.uniform(0.2, 1.0) * p.tau;
            const double al = rng.uniform(0.2, 1.0);
            const double a = a1_threshold(p.beta_up, s, al) * rng.uniform(1.0, 1.8);
            const LimitCycle lc = limit_cycle(p);
            const ForcingSchedule f =
                ForcingSchedule::periodic(rng.uniform(0.0, lc.period), s, al, a);
            const LockReport rep =
                find_locking(p, f, 200.0 * (s + al), 120.0 * (s + al));
            REQUIRE(rep.ratio.has_value());
            CHECK(*rep.ratio == 1);
        }
    }

    SECTION("the chaotic window reports no locking") {
        ModelParams p = fig10;
        p.tau = 0.6;
        const LimitCycle lc = limit_cycle(p);
        const ForcingSchedule f = ForcingSchedule::periodic(lc.z2, sigma, alpha, 0.9);
        const LockReport rep = find_locking(p, f, 1400.0, 1100.0);
        CHECK_FALSE(rep.ratio.has_value());
    }
}
