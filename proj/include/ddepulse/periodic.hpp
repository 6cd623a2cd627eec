#pragma once

// Closed-form theory of the periodically forced system above the locking
// threshold a1: the pulse-to-pulse recursion, its geometric-series limits
// (the forced limit cycle), and q:1 frequency-locking detection for the
// regime below threshold where only simulation is available.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/solver.hpp"
#include "ddepulse/trajectory.hpp"

namespace ddepulse {

// Minimum amplitude for which every pulse-onset sample of the forced
// solution stays nonnegative, so the closed-form 1:1 cycle exists.
inline double a1_threshold(double beta_up, double sigma, double alpha) {
    if (!(beta_up > 0.0 && sigma > 0.0 && alpha > 0.0))
        throw Error("a1_threshold: need beta_up, sigma, alpha > 0");
    return beta_up * (std::exp(alpha) - std::exp(-sigma)) / (1.0 - std::exp(-sigma));
}

struct ForcedCycle {
    double x_min_p = 0.0;  // forced-cycle minimum, attained at pulse onsets
    double x_max_p = 0.0;  // forced-cycle maximum, attained at pulse offsets
    double period = 0.0;   // T_p = sigma + alpha
    double a1 = 0.0;       // threshold for these (sigma, alpha)
};

// Closed-form forced limit cycle for a >= a1; below threshold nothing is
// guaranteed and the caller must simulate.
inline ForcedCycle forced_cycle(const ModelParams& p, double sigma, double alpha,
                                double a) {
    p.validate();
    ForcedCycle fc;
    fc.a1 = a1_threshold(p.beta_up, sigma, alpha);
    fc.period = sigma + alpha;
    if (a < fc.a1)
        throw BelowThreshold("forced_cycle: a < a1, closed form not guaranteed");
    const double w = (1.0 - std::exp(-sigma)) / (std::exp(alpha) - std::exp(-sigma));
    fc.x_min_p = -p.beta_up + a * w;
    fc.x_max_p = -p.beta_up + a * w * std::exp(alpha);
    return fc;
}

// Oscillation amplitude of the forced cycle.
inline double forced_cycle_amplitude(const ForcedCycle& fc) {
    return fc.x_max_p - fc.x_min_p;
}

struct PulseMapSequences {
    std::vector<double> at_onset;   // x at Delta_k, k = 0..n
    std::vector<double> at_offset;  // x at Delta_k + sigma
};

// Literal closed-form sequences for Delta0 = z2:
//   x(Delta_n)        = beta_U (e^{-n T_p} - 1) + a (1 - e^{-s}) e^{-alpha} sum_{k<n} e^{-k T_p}
//   x(Delta_n +sigma) = beta_U (e^{-n T_p - s} - 1) + a (1 - e^{-s}) sum_{k<=n} e^{-k T_p}
inline PulseMapSequences pulse_map_closed(const ModelParams& p, double sigma,
                                          double alpha, double a, int n) {
    p.validate();
    if (n < 0) throw Error("pulse_map_closed: n must be >= 0");
    const double tp = sigma + alpha;
    const double ems = std::exp(-sigma);
    PulseMapSequences seq;
    seq.at_onset.reserve(n + 1);
    seq.at_offset.reserve(n + 1);
    double partial = 0.0;  // sum_{k=0}^{m-1} e^{-k T_p}
    for (int m = 0; m <= n; ++m) {
        const double entp = std::exp(-m * tp);
        seq.at_onset.push_back(p.beta_up * (entp - 1.0) +
                               a * (1.0 - ems) * std::exp(-alpha) * partial);
        partial += entp;  // now sum_{k=0}^{m}
        seq.at_offset.push_back(p.beta_up * (entp * ems - 1.0) +
                                a * (1.0 - ems) * partial);
    }
    return seq;
}

// Engine route: sample a solved trajectory at the pulse onsets/offsets.
inline PulseMapSequences pulse_map_simulated(const ModelParams& p,
                                             const ForcingSchedule& f, int n) {
    if (n < 0) throw Error("pulse_map_simulated: n must be >= 0");
    const double tp = f.period();
    const double t_end = f.delta0 + n * tp + f.sigma + 0.5 * std::min(f.alpha, tp);
    Trajectory traj = solve(p, limit_cycle_history(p), f, t_end);
    PulseMapSequences seq;
    for (int k = 0; k <= n; ++k) {
        const double on = f.delta0 + k * tp;
        seq.at_onset.push_back(traj.eval(on));
        seq.at_offset.push_back(traj.eval(on + f.sigma));
    }
    return seq;
}

// Pulse-onset/offset sequences for a >= a1. Uses the literal closed form
// when the train starts at z2, otherwise the engine (any onset phase
// converges to the same cycle).
inline PulseMapSequences iterate_pulse_map(const ModelParams& p,
                                           const ForcingSchedule& f, int n) {
    p.validate();
    f.validate();
    if (!f.active() || std::isinf(f.alpha))
        throw Error("iterate_pulse_map: needs an active periodic train");
    const double a1 = a1_threshold(p.beta_up, f.sigma, f.alpha);
    if (f.amplitude < a1)
        throw BelowThreshold("iterate_pulse_map: a < a1");
    const LimitCycle lc = limit_cycle(p);
    if (std::abs(f.delta0 - lc.z2) <= 1e-12 * lc.period)
        return pulse_map_closed(p, f.sigma, f.alpha, f.amplitude, n);
    return pulse_map_simulated(p, f, n);
}

// q such that the post-transient response repeats with period q * T_p
// (|x(t) - x(t + q T_p)| < tol uniformly over one window), or nullopt.
// The search is capped at max_ratio and each candidate q needs at least
// three response periods after the transient.
inline std::optional<int> detect_locking(const Trajectory& traj, double t_p,
                                         double transient, int max_ratio = 64,
                                         double tol = 1e-8) {
    if (!(t_p > 0.0)) throw Error("detect_locking: T_p must be > 0");
    const auto& segs = traj.path.segments();
    if (segs.empty()) return std::nullopt;
    const double t_end = traj.t_end;

    for (int q = 1; q <= max_ratio; ++q) {
        const double span = q * t_p;
        const double w_lo = t_end - 2.0 * span;
        const double w_hi = t_end - span;
        if (w_lo < transient || t_end - transient < 3.0 * span) break;

        // |x(t) - x(t + span)| is monotone between merged breakpoints of
        // the two windows, so the sup is attained on that merged set.
        std::vector<double> pts;
        pts.push_back(w_lo);
        pts.push_back(w_hi);
        for (const Segment& s : segs) {
            if (s.lo > w_lo && s.lo < w_hi) pts.push_back(s.lo);
            const double back = s.lo - span;
            if (back > w_lo && back < w_hi) pts.push_back(back);
        }
        double worst = 0.0;
        for (double t : pts)
            worst = std::max(worst, std::abs(traj.eval(t) - traj.eval(t + span)));
        if (worst < tol) return q;
    }
    return std::nullopt;
}

struct LockReport {
    std::optional<int> ratio;     // q in "q : 1"
    double t_p = 0.0;
    double response_period = 0.0; // q * T_p when locked
};

// Convenience wrapper: simulate a pulse train and look for locking.
inline LockReport find_locking(const ModelParams& p, const ForcingSchedule& f,
                               double t_end, double transient, int max_ratio = 64,
                               double tol = 1e-8) {
    Trajectory traj = solve(p, limit_cycle_history(p), f, t_end);
    LockReport rep;
    rep.t_p = f.period();
    rep.ratio = detect_locking(traj, rep.t_p, transient, max_ratio, tol);
    if (rep.ratio) rep.response_period = *rep.ratio * rep.t_p;
    return rep;
}

}  // namespace ddepulse
