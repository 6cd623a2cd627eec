#pragma once

// Response of the limit cycle to one rectangular pulse of amplitude a and
// width sigma starting at phase Delta:
//   - the eleven-case taxonomy (by where the pulse starts and ends on the
//     cycle) plus the FNFP1..FNFP4 refinements,
//   - the delta constants separating the cases,
//   - the resetting time F(Delta) and the cycle length map T(Delta),
//   - the rapidly oscillating unstable cycle reachable at Delta = delta_inf.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/solver.hpp"
#include "ddepulse/trajectory.hpp"

namespace ddepulse {

enum class CaseLabel {
    RNRN, RNRP, RPRP, RPFP, RPFN, FPFP, FPFN,
    FNFP1, FNFP2, FNFP3, FNFP4, FNFN, FNRN, FNRP
};

inline const char* to_string(CaseLabel c) {
    switch (c) {
        case CaseLabel::RNRN: return "RNRN";
        case CaseLabel::RNRP: return "RNRP";
        case CaseLabel::RPRP: return "RPRP";
        case CaseLabel::RPFP: return "RPFP";
        case CaseLabel::RPFN: return "RPFN";
        case CaseLabel::FPFP: return "FPFP";
        case CaseLabel::FPFN: return "FPFN";
        case CaseLabel::FNFP1: return "FNFP1";
        case CaseLabel::FNFP2: return "FNFP2";
        case CaseLabel::FNFP3: return "FNFP3";
        case CaseLabel::FNFP4: return "FNFP4";
        case CaseLabel::FNFN: return "FNFN";
        case CaseLabel::FNRN: return "FNRN";
        case CaseLabel::FNRP: return "FNRP";
    }
    return "?";
}

// A constant that may be undefined; the reason names the violated condition.
struct MaybeConstant {
    std::optional<double> value{};
    std::string reason{};

    bool defined() const { return value.has_value(); }
    double get() const {
        if (!value) throw Undefined("constant undefined: " + reason);
        return *value;
    }
    // Treat "undefined" as +infinity when the constant only ever appears as
    // an upper bound whose defining condition cannot bind.
    double or_inf() const {
        return value ? *value : std::numeric_limits<double>::infinity();
    }
};

struct DeltaConstants {
    MaybeConstant delta1;      // end of the RNRN window
    MaybeConstant delta2;      // pulse-end positivity boundary
    MaybeConstant delta4;      // x(T~) sign boundary (FNFP1 vs FNFP2)
    MaybeConstant delta4_hat;  // x(z3 + tau) sign boundary (FNFP3)
    MaybeConstant delta5;      // x(z4 + tau) sign boundary (FNFP4)
    MaybeConstant delta_inf;   // onset phase of the rapid unstable cycle
};

struct PulseSpec {
    double delta = 0.0;
    double sigma = 0.0;
    double amplitude = 0.0;
};

inline DeltaConstants delta_constants(const ModelParams& p, double sigma, double a) {
    p.validate();
    if (!(sigma > 0.0 && sigma <= p.tau))
        throw Error("delta_constants: sigma must be in (0, tau]");
    if (!(a > 0.0)) throw Error("delta_constants: amplitude must be > 0");

    const LimitCycle lc = limit_cycle(p);
    const double bu = p.beta_up;
    const double bl = p.beta_low;
    const double es = std::exp(sigma);
    const double ems = std::exp(-sigma);
    const double emt = std::exp(-p.tau);

    DeltaConstants out;
    out.delta1.value = lc.z1 - sigma - std::log((bl + a * (1.0 - ems)) / bl);

    if (bu > a * (1.0 - ems)) {
        out.delta2.value = lc.z2 - sigma + std::log(bu / (bu - a * (1.0 - ems)));
    } else {
        out.delta2.reason = "beta_U <= a(1 - e^-sigma): x stays positive at the pulse end";
    }

    out.delta4.value = lc.z2 + std::log(bu * (std::exp(p.tau) - 1.0) / (a * (es - 1.0)));

    {
        const double num = a * bl + bu * (a - bu) * (1.0 - emt);
        const double den =
            a * (bl * std::exp(-lc.z2) + (a - bu) * (es - 1.0) * std::exp(-lc.period));
        if (num > 0.0 && den > 0.0) {
            out.delta4_hat.value = std::log(num / den);
        } else {
            out.delta4_hat.reason = "requires a > beta_U (FNFP assumption)";
        }
    }

    {
        const double num = bu * (bu + bl) + (bl + bu * (2.0 - emt)) * (a - bu);
        const double den = a * (bu + bl) - a * (es - 1.0) * (1.0 - emt) * (a - bu);
        if (num > 0.0 && den > 0.0) {
            out.delta5.value = lc.z2 + std::log(num / den);
        } else {
            out.delta5.reason = "bounding condition cannot bind for these parameters";
        }
    }

    if (a > bu * (1.0 - ems)) {
        out.delta_inf.value = lc.z2 + sigma + std::log((a - bu * (1.0 - ems)) / a);
    } else {
        out.delta_inf.reason = "requires a > beta_U(1 - e^-sigma)";
    }

    return out;
}

struct Classification {
    CaseLabel label = CaseLabel::RNRN;
    // For FNFP2 cases beyond FNFP4: zero crossings beyond the two that
    // every FNFP pulse creates, counted until the trajectory rejoined the
    // cycle. 0 for every other label.
    int fnfp2_depth = 0;
    bool locked = true;  // false if the depth scan hit its budget
};

namespace detail {

// Closed-form part of the classification (everything except the depth of
// FNFP2 cases deeper than FNFP4). Delta must already be reduced to [0, T~).
inline CaseLabel classify_closed(const LimitCycle& lc, const DeltaConstants& dc,
                                 double delta, double sigma) {
    const double d1 = dc.delta1.get();  // always defined
    const double d2 = dc.delta2.or_inf();
    const double d4 = dc.delta4.get();
    const double tmax = lc.t_max;

    if (delta <= d1) return CaseLabel::RNRN;
    if (delta < lc.z1) return CaseLabel::RNRP;
    if (delta <= tmax - sigma) return CaseLabel::RPRP;
    if (delta <= tmax) return delta <= d2 ? CaseLabel::RPFP : CaseLabel::RPFN;
    if (delta <= lc.z2) return delta <= d2 ? CaseLabel::FPFP : CaseLabel::FPFN;
    if (delta < lc.period - sigma) {
        if (delta < d2) {
            if (delta >= d4) return CaseLabel::FNFP1;
            if (delta < dc.delta4_hat.or_inf()) return CaseLabel::FNFP3;
            if (delta < dc.delta5.or_inf()) return CaseLabel::FNFP4;
            return CaseLabel::FNFP2;
        }
        return CaseLabel::FNFN;
    }
    return delta < lc.period + d1 ? CaseLabel::FNRN : CaseLabel::FNRP;
}

// Sup of |x(t) - x~(t + phi)| over [t_lo, t_hi]. The difference between a
// trajectory piece and a cycle branch is monotone, so the sup is attained
// on the merged set of trajectory breakpoints and cycle kink images.
inline double sup_diff_to_cycle(const Trajectory& traj, const ModelParams& p,
                                const LimitCycle& lc, double phi, double t_lo,
                                double t_hi) {
    std::vector<double> pts;
    pts.push_back(t_lo);
    pts.push_back(t_hi);
    for (const Segment& s : traj.path.segments()) {
        if (s.hi > t_lo && s.hi < t_hi) pts.push_back(s.hi);
        if (s.lo > t_lo && s.lo < t_hi) pts.push_back(s.lo);
    }
    // Cycle kinks sit where (t + phi) mod period hits 0 or t_max.
    for (double kink : {0.0, lc.t_max}) {
        double t = kink - phi;
        t += lc.period * std::ceil((t_lo - t) / lc.period);
        for (; t < t_hi; t += lc.period)
            if (t > t_lo) pts.push_back(t);
    }
    double worst = 0.0;
    for (double t : pts)
        worst = std::max(worst,
                         std::abs(traj.eval(t) - eval_cycle_wrapped(lc, p, t + phi)));
    return worst;
}

// Earliest time from which the trajectory stays within tol of the
// phase-shifted cycle through t_hi. Returns +inf if it never locks. The
// lock can start inside a segment (e.g. when a strong pulse overshoots the
// cycle's range and the match begins where the decay re-enters it), so the
// breakpoint scan is refined by bisection inside the first locked gap.
inline double lock_time(const Trajectory& traj, const ModelParams& p,
                        const LimitCycle& lc, double phi, double t_lo, double t_hi,
                        double tol) {
    std::vector<double> marks;
    marks.push_back(t_lo);
    for (const BreakPoint& b : traj.breaking_points)
        if (b.t > t_lo && b.t < t_hi) marks.push_back(b.t);
    double locked_from = std::numeric_limits<double>::infinity();
    std::size_t locked_idx = marks.size();
    for (std::size_t i = marks.size(); i-- > 0;) {
        const double upper = i + 1 < marks.size() ? marks[i + 1] : t_hi;
        if (sup_diff_to_cycle(traj, p, lc, phi, marks[i], upper) <= tol) {
            locked_from = marks[i];
            locked_idx = i;
        } else {
            break;
        }
    }
    if (locked_idx > 0 && locked_idx < marks.size()) {
        // sup over [t, locked_from] shrinks as t grows: bisect for the
        // earliest admissible start inside the preceding gap.
        double lo = marks[locked_idx - 1], hi = locked_from;
        for (int i = 0; i < 80 && hi - lo > 1e-14 * (1.0 + std::abs(hi)); ++i) {
            const double mid = 0.5 * (lo + hi);
            if (sup_diff_to_cycle(traj, p, lc, phi, mid, locked_from) <= tol)
                hi = mid;
            else
                lo = mid;
        }
        locked_from = hi;
    }
    return locked_from;
}

}  // namespace detail

// Pulse phase classification. Delta may exceed the period; it is reduced
// modulo T~ first (the pulse then acts on a later cycle).
inline Classification classify(const ModelParams& p, const PulseSpec& pulse) {
    p.validate();
    const LimitCycle lc = limit_cycle(p);
    const DeltaConstants dc = delta_constants(p, pulse.sigma, pulse.amplitude);
    double delta = pulse.delta - lc.period * std::floor(pulse.delta / lc.period);

    Classification cls;
    cls.label = detail::classify_closed(lc, dc, delta, pulse.sigma);
    if (cls.label != CaseLabel::FNFP2) return cls;

    // Deeper than FNFP4: measure how many extra oscillations the solution
    // makes before it rejoins the cycle (budget: 1000 delay intervals).
    const double scale = std::max(1.0, lc.x_max - lc.x_min);
    const double tol = 1e-10 * scale;
    const ForcingSchedule f = ForcingSchedule::single_pulse(pulse.delta, pulse.sigma,
                                                            pulse.amplitude);
    const double budget = pulse.delta + pulse.sigma + 1000.0 * p.tau;
    double horizon = pulse.delta + pulse.sigma + 20.0 * lc.period;
    while (true) {
        Trajectory traj = solve(p, limit_cycle_history(p), f, horizon);
        if (traj.zeros.empty()) { cls.locked = false; break; }
        const Zero& last = traj.zeros.back();
        const double ref = last.rising ? lc.z1 : lc.z2;
        const double phi = ref - last.t;
        const double from = detail::lock_time(traj, p, lc, phi, pulse.delta,
                                              traj.t_end, tol);
        if (std::isfinite(from) && traj.t_end - from >= lc.period) {
            int count = 0;
            for (const Zero& z : traj.zeros)
                if (z.t > pulse.delta && z.t <= from + 1e-12 * p.tau) ++count;
            cls.fnfp2_depth = std::max(0, count - 2);
            break;
        }
        if (horizon >= budget) {
            cls.locked = false;
            int count = 0;
            for (const Zero& z : traj.zeros)
                if (z.t > pulse.delta) ++count;
            cls.fnfp2_depth = std::max(0, count - 2);
            break;
        }
        horizon = std::min(budget, horizon * 2.0);
    }
    return cls;
}

struct PulseResponse {
    Classification cls;
    // Case formula for the resetting time. The formulas assume the pulse
    // never pushes the solution outside the band the cycle can represent;
    // strong pulses overshoot x_max and then the literal return happens a
    // little later (see resetting_time_measured).
    double resetting_time = 0.0;
    // Earliest time minus Delta from which the trajectory actually tracks
    // the phase-shifted cycle (the resetting-time definition applied to
    // the solved trajectory). Equals resetting_time whenever the case
    // formula's premise holds.
    double resetting_time_measured = 0.0;
    double cycle_length = 0.0;  // T(Delta)
    double new_phase = 0.0;     // phi with x(t) = x~(t + phi) after reset
    std::vector<Zero> perturbed_zeros;
    // sup |x - x~(. + phi)| over one period past the measured reset
    double phase_residual = 0.0;
};

// Resetting time and cycle length for a single pulse, with the trajectory
// cross-checked against the phase-shifted cycle. Delta >= period is
// allowed: the pulse acts on a later cycle and the markers shift with it.
inline PulseResponse pulse_response(const ModelParams& p, const PulseSpec& pulse) {
    p.validate();
    if (!(pulse.delta >= 0.0)) throw Error("pulse_response: delta must be >= 0");
    const LimitCycle lc = limit_cycle(p);
    const DeltaConstants dc = delta_constants(p, pulse.sigma, pulse.amplitude);

    const double m = std::floor(pulse.delta / lc.period);
    const double delta_red = pulse.delta - lc.period * m;
    const int shift = 2 * static_cast<int>(m);

    if (dc.delta_inf.defined() &&
        std::abs(delta_red - dc.delta_inf.get()) <= 1e-12)
        throw InfiniteResetting("pulse_response: Delta sits on the rapid-cycle phase");

    PulseResponse out;
    out.cls.label = detail::classify_closed(lc, dc, delta_red, pulse.sigma);

    const ForcingSchedule f =
        ForcingSchedule::single_pulse(pulse.delta, pulse.sigma, pulse.amplitude);
    const double t_end = pulse.delta + pulse.sigma + 3.0 * lc.period + p.tau;
    Trajectory traj = solve(p, limit_cycle_history(p), f, t_end);
    out.perturbed_zeros = traj.zeros;

    auto traj_zero = [&](int k) -> double {
        const std::size_t idx = static_cast<std::size_t>(k + shift) - 1;
        if (idx >= traj.zeros.size())
            throw Error("pulse_response: marker zero missing from trajectory");
        return traj.zeros[idx].t;
    };
    auto cycle_marker = [&](int k) { return cycle_zero(lc, k) + m * lc.period; };

    const double sigma = pulse.sigma;
    const double delta_abs = pulse.delta;
    int marker = 0;

    switch (out.cls.label) {
        case CaseLabel::RNRN:
            out.resetting_time = sigma;
            marker = 1;
            break;
        case CaseLabel::RNRP:
        case CaseLabel::RPRP:
            out.resetting_time =
                lc.t_max + m * lc.period + (traj_zero(2) - cycle_marker(2)) - delta_abs;
            marker = 2;
            break;
        case CaseLabel::RPFP:
        case CaseLabel::FPFP:
            out.resetting_time = sigma;
            marker = 2;
            break;
        case CaseLabel::RPFN:
        case CaseLabel::FPFN:
            out.resetting_time = traj_zero(2) + p.tau - delta_abs;
            marker = 3;
            break;
        case CaseLabel::FNFP1:
            out.resetting_time = traj_zero(3) + p.tau - delta_abs;
            marker = 4;
            break;
        case CaseLabel::FNFN:
            out.resetting_time = cycle_marker(2) + p.tau - delta_abs;
            marker = 3;
            break;
        case CaseLabel::FNRN:
            out.resetting_time = sigma;
            marker = 3;
            break;
        case CaseLabel::FNRP:
            out.resetting_time = cycle_marker(3) + p.tau -
                                 (cycle_marker(4) - traj_zero(4)) - delta_abs;
            marker = 4;
            break;
        case CaseLabel::FNFP2:
        case CaseLabel::FNFP3:
        case CaseLabel::FNFP4:
            marker = 0;  // no closed form; measured below
            break;
    }

    const double scale = std::max(1.0, lc.x_max - lc.x_min);
    if (marker > 0) {
        out.cycle_length = lc.period + (traj_zero(marker) - cycle_marker(marker));
        out.new_phase = cycle_marker(marker) - traj_zero(marker);
        const double tol = 1e-10 * scale;
        const double locked =
            detail::lock_time(traj, p, lc, out.new_phase, delta_abs, t_end, tol);
        out.resetting_time_measured =
            std::isfinite(locked) ? locked - delta_abs : locked;
        const double t_reset = std::isfinite(locked)
                                   ? locked
                                   : delta_abs + out.resetting_time;
        out.phase_residual = detail::sup_diff_to_cycle(
            traj, p, lc, out.new_phase, t_reset, std::min(t_reset + lc.period, t_end));
        return out;
    }

    // FNFP2 family: no closed form. Measure the resetting time as the
    // earliest breakpoint from which the trajectory tracks the shifted
    // cycle, extending the horizon until it locks or the budget runs out.
    const double tol = 1e-10 * scale;
    const double budget = delta_abs + sigma + 1000.0 * p.tau;
    double horizon = t_end;
    while (true) {
        if (!traj.zeros.empty()) {
            const Zero& last = traj.zeros.back();
            const double ref = last.rising ? lc.z1 : lc.z2;
            double phi = ref - last.t;
            const double from =
                detail::lock_time(traj, p, lc, phi, delta_abs, traj.t_end, tol);
            if (std::isfinite(from) && traj.t_end - from >= lc.period) {
                out.resetting_time = from - delta_abs;
                out.resetting_time_measured = out.resetting_time;
                // Reduce the phase shift to the centered branch for the
                // cycle length (the marker convention does not extend here).
                double shift_c = -phi - lc.period * std::floor(0.5 - phi / lc.period);
                out.cycle_length = lc.period + shift_c;
                out.new_phase = phi;
                out.phase_residual =
                    detail::sup_diff_to_cycle(traj, p, lc, phi, from,
                                              std::min(from + lc.period, traj.t_end));
                int count = 0;
                for (const Zero& z : traj.zeros)
                    if (z.t > delta_abs && z.t <= from + 1e-12 * p.tau) ++count;
                out.cls.fnfp2_depth = std::max(0, count - 2);
                out.perturbed_zeros = traj.zeros;
                return out;
            }
        }
        if (horizon >= budget) {
            throw InfiniteResetting(
                "pulse_response: no lock within 1000 delay intervals");
        }
        horizon = std::min(budget, horizon * 2.0);
        traj = solve(p, limit_cycle_history(p), f, horizon);
    }
}

// The rapidly oscillating unstable cycle at Delta = delta_inf.
struct RapidCycle {
    double delta_inf = 0.0;
    double period = 0.0;  // T~ - delta_inf, inside (tau - sigma, tau)
    double x_min = 0.0;
    double x_max = 0.0;
};

inline RapidCycle unstable_cycle(const ModelParams& p, double sigma, double a) {
    p.validate();
    const DeltaConstants dc = delta_constants(p, sigma, a);
    if (!dc.delta_inf.defined())
        throw Undefined("unstable_cycle: " + dc.delta_inf.reason);
    const LimitCycle lc = limit_cycle(p);
    RapidCycle rc;
    rc.delta_inf = dc.delta_inf.get();
    rc.period = lc.period - rc.delta_inf;
    rc.x_min = p.beta_up * (std::exp(-(rc.delta_inf - lc.z2)) - 1.0);
    rc.x_max = a * (1.0 - std::exp(-sigma)) +
               p.beta_up * (std::exp(lc.z2 - rc.delta_inf - sigma) - 1.0);
    return rc;
}

// The pulse width at which the rapid cycle closes exactly, i.e. the pulse
// piece replays as the post-pulse feedback piece: requires a = beta_L +
// beta_U and x(delta_inf) = x(T~), which pins sigma to the root of
//   beta_U a / (beta_U + (a - beta_U) e^s) =
//       e^{s - tau} (beta_U + (a - beta_U)(e^s - 1)).
// Away from this width the orbit at delta_inf has a closure defect that
// the cycle's instability amplifies.
inline double rapid_cycle_width(const ModelParams& p, double a) {
    p.validate();
    if (std::abs(a - (p.beta_low + p.beta_up)) > 1e-9 * (p.beta_low + p.beta_up))
        throw Undefined("rapid_cycle_width: requires a = beta_L + beta_U");
    const double bu = p.beta_up;
    auto defect = [&](double s) {
        return bu * a / (bu + (a - bu) * std::exp(s)) -
               std::exp(s - p.tau) * (bu + (a - bu) * (std::exp(s) - 1.0));
    };
    double lo = 1e-9, hi = p.tau;
    if (!(defect(lo) > 0.0 && defect(hi) < 0.0))
        throw Undefined("rapid_cycle_width: closure defect does not bracket a root");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (defect(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// F and T sampled on a uniform grid over [0, T~] (closed: the right
// endpoint shows the T(0) = T(T~) closure).
struct ClmPoint {
    double delta = 0.0;
    CaseLabel label = CaseLabel::RNRN;
    double resetting_time = 0.0;
    double cycle_length = 0.0;
    bool infinite = false;  // Delta hit the rapid-cycle phase
};

inline std::vector<ClmPoint> cycle_length_map(const ModelParams& p, double sigma,
                                              double a, int n_points) {
    if (n_points < 2) throw Error("cycle_length_map: need at least 2 grid points");
    const LimitCycle lc = limit_cycle(p);
    std::vector<ClmPoint> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double delta = lc.period * static_cast<double>(i) / (n_points - 1);
        ClmPoint pt;
        pt.delta = delta;
        try {
            PulseResponse r = pulse_response(p, {delta, sigma, a});
            pt.label = r.cls.label;
            pt.resetting_time = r.resetting_time;
            pt.cycle_length = r.cycle_length;
        } catch (const InfiniteResetting&) {
            pt.infinite = true;
            pt.label = CaseLabel::FNFP2;
            pt.resetting_time = std::numeric_limits<double>::infinity();
            pt.cycle_length = std::numeric_limits<double>::infinity();
        }
        out.push_back(pt);
    }
    return out;
}

}  // namespace ddepulse
