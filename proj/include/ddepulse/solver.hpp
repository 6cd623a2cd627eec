#pragma once

// Event-driven propagation of
//
//     x'(t) = -x(t) + f(x(t - tau)) + p(t)
//
// where f is the two-level feedback and p a rectangular pulse train.
// Between breaking points the solution is exactly A + B e^{-(t - t_k)}, so
// integration is bookkeeping: the offset A is one of
// {beta_L, beta_L + a, -beta_U, -beta_U + a} depending on the sign of the
// delayed state and the pulse being on or off, B carries continuity, and
// each feedback switch fires at (zero of x) + tau in closed form. There is
// no step-size control anywhere because there is no truncation error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/trajectory.hpp"

namespace ddepulse {

constexpr std::uint64_t kUnboundedPulses = std::numeric_limits<std::uint64_t>::max();

// Rectangular pulse train: amplitude a on [Delta_n, Delta_n + sigma] with
// Delta_n = delta0 + n (sigma + alpha). alpha = +inf degenerates to a
// single pulse.
struct ForcingSchedule {
    double delta0 = 0.0;
    double sigma = 0.0;
    double alpha = std::numeric_limits<double>::infinity();
    double amplitude = 0.0;
    std::uint64_t pulse_count = 0;

    static ForcingSchedule none() { return ForcingSchedule{}; }

    static ForcingSchedule single_pulse(double delta, double sigma, double amplitude) {
        return ForcingSchedule{delta, sigma, std::numeric_limits<double>::infinity(),
                               amplitude, 1};
    }

    static ForcingSchedule periodic(double delta0, double sigma, double alpha,
                                    double amplitude,
                                    std::uint64_t count = kUnboundedPulses) {
        return ForcingSchedule{delta0, sigma, alpha, amplitude, count};
    }

    double period() const { return sigma + alpha; }
    bool active() const { return amplitude != 0.0 && pulse_count > 0; }

    void validate() const {
        if (!active()) return;
        if (!(sigma > 0.0)) throw Error("ForcingSchedule: sigma must be > 0");
        if (!(alpha > 0.0)) throw Error("ForcingSchedule: alpha must be > 0");
        if (!(delta0 >= 0.0)) throw Error("ForcingSchedule: delta0 must be >= 0");
        if (std::isinf(alpha) && pulse_count > 1)
            throw Error("ForcingSchedule: infinite alpha implies a single pulse");
    }

    // Pulse state at an arbitrary time (edges use the same arithmetic as
    // the event loop, so the two views agree away from the edge instants).
    bool on_at(double t) const {
        if (!active() || t < delta0) return false;
        if (std::isinf(alpha)) return t < delta0 + sigma;
        const double tp = period();
        const double n = std::floor((t - delta0) / tp);
        if (n < 0.0) return false;
        if (pulse_count != kUnboundedPulses && n >= static_cast<double>(pulse_count))
            return false;
        return t - (delta0 + n * tp) < sigma;
    }
};

namespace detail {

// Iterator over pulse edges in increasing time order.
struct PulseEdgeCursor {
    const ForcingSchedule* f = nullptr;
    std::uint64_t n = 0;
    bool next_is_on = true;
    double next_t = std::numeric_limits<double>::infinity();

    explicit PulseEdgeCursor(const ForcingSchedule& forcing) : f(&forcing) {
        if (f->active()) next_t = f->delta0;
    }

    // Consume the pending edge; returns the new pulse state.
    bool advance() {
        if (next_is_on) {
            next_t = std::isinf(f->alpha)
                         ? f->delta0 + f->sigma
                         : f->delta0 + static_cast<double>(n) * f->period() + f->sigma;
            next_is_on = false;
            return true;
        }
        ++n;
        if (std::isinf(f->alpha) ||
            (f->pulse_count != kUnboundedPulses && n >= f->pulse_count)) {
            next_t = std::numeric_limits<double>::infinity();
        } else {
            next_t = f->delta0 + static_cast<double>(n) * f->period();
        }
        next_is_on = true;
        return false;
    }
};

inline int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace detail

inline Trajectory solve(const ModelParams& p, const HistoryFunction& history,
                        const ForcingSchedule& forcing, double t_end) {
    p.validate();
    forcing.validate();
    if (history.empty()) throw Error("solve: history is empty");
    const double t0 = history.hi();
    if (!(t_end > t0)) throw Error("solve: t_end must exceed the history end");
    if (history.lo() > t0 - p.tau * (1.0 - 1e-12))
        throw Error("solve: history does not cover one delay interval");

    const double inf = std::numeric_limits<double>::infinity();
    const double merge_tol = 1e-13 * p.tau;

    Trajectory traj;
    traj.params = p;
    traj.history = history;
    traj.t_begin = t0;
    traj.t_end = t_end;

    // Zeros drive the delayed feedback: each strict sign change at z flips
    // f at z + tau. Seed with the history's zeros inside the delay window.
    std::vector<Zero> zeros;
    for (const Zero& z : history.sign_change_zeros())
        if (z.t > t0 - p.tau) zeros.push_back(z);
    std::size_t switch_cursor = 0;

    int delayed_sign = history.sign_after(t0 - p.tau);
    if (delayed_sign == 0) delayed_sign = 1;  // ties take the ">= 0" branch

    detail::PulseEdgeCursor edges(forcing);
    bool pulse_on = false;
    while (edges.next_t <= t0) pulse_on = edges.advance();

    std::vector<Segment> path;
    std::vector<BreakPoint> bps;

    double t_cur = t0;
    double x_cur = history.eval(t0);
    // Last nonzero sign of x, needed to decide whether a segment that
    // starts exactly at zero is a crossing or a tangential touch.
    int prev_sign = detail::sign_of(x_cur);
    if (prev_sign == 0) {
        const double d = history.segments().back().slope(t0);
        prev_sign = d > 0.0 ? -1 : 1;
    }

    std::uint64_t merge_count = 0;

    auto register_zero = [&](double z, bool rising) {
        if (zeros.size() > switch_cursor) {
            const Zero& last = zeros.back();
            if (z - last.t < merge_tol && last.rising != rising) {
                zeros.pop_back();  // graze at rounding scale: cancel the pair
                return;
            }
        }
        zeros.push_back({z, rising});
    };

    auto pending_switch = [&]() {
        return switch_cursor < zeros.size() ? zeros[switch_cursor].t + p.tau : inf;
    };

    while (t_cur < t_end) {
        const double A = (delayed_sign >= 0 ? -p.beta_up : p.beta_low) +
                         (pulse_on ? forcing.amplitude : 0.0);
        const double B = x_cur - A;

        double t_next = std::min(t_end, std::min(pending_switch(), edges.next_t));

        if (t_next <= t_cur) {
            // Degenerate gap: apply due events without emitting a segment.
            while (switch_cursor < zeros.size() &&
                   zeros[switch_cursor].t + p.tau <= t_cur + merge_tol) {
                delayed_sign = zeros[switch_cursor].rising ? 1 : -1;
                bps.push_back({zeros[switch_cursor].t + p.tau, BreakKind::FeedbackSwitch});
                ++switch_cursor;
                ++merge_count;
            }
            while (edges.next_t <= t_cur + merge_tol) {
                bps.push_back({edges.next_t,
                               edges.next_is_on ? BreakKind::PulseOn : BreakKind::PulseOff});
                pulse_on = edges.advance();
                ++merge_count;
            }
            if (merge_count > 1000000) throw EventStall("solve: event chatter guard tripped");
            continue;
        }

        // Zero of this piece, if any. Found before the piece is finalized
        // because its own delayed switch at z + tau may bound the piece.
        // Crossings are decided by strict sign change of the endpoint
        // values; the closed form only locates the position.
        if (x_cur == 0.0) {
            const int dir = detail::sign_of(A);  // sign just after t_cur
            if (dir != 0 && prev_sign != 0 && dir != prev_sign) {
                register_zero(t_cur, dir > 0);
                prev_sign = dir;
                t_next = std::min(t_next, pending_switch());
            }
        } else {
            const int s0 = detail::sign_of(x_cur);
            const int s1 = detail::sign_of(A + B * std::exp(-(t_next - t_cur)));
            if (s1 != 0 && s1 != s0) {
                double z = t_next;
                if (A != 0.0 && B != 0.0) {
                    const double ratio = -B / A;
                    if (ratio > 0.0)
                        z = std::min(std::max(t_cur + std::log(ratio), t_cur), t_next);
                }
                register_zero(z, s1 > 0);
                t_next = std::min(t_next, pending_switch());
            }
            // s1 == 0: the piece ends exactly on a zero; the next iteration
            // sees x_cur == 0 and resolves crossing vs touch.
        }

        Segment seg;
        seg.offset = A;
        seg.coef = B;
        seg.anchor = t_cur;
        seg.lo = t_cur;
        seg.hi = t_next;
        path.push_back(seg);

        const double x_next = seg.eval(t_next);

        // Apply every event within the merge window of t_next.
        std::uint64_t applied = 0;
        while (switch_cursor < zeros.size() &&
               zeros[switch_cursor].t + p.tau <= t_next + merge_tol) {
            delayed_sign = zeros[switch_cursor].rising ? 1 : -1;
            bps.push_back({zeros[switch_cursor].t + p.tau, BreakKind::FeedbackSwitch});
            ++switch_cursor;
            ++applied;
        }
        while (edges.next_t <= t_next + merge_tol) {
            bps.push_back({edges.next_t,
                           edges.next_is_on ? BreakKind::PulseOn : BreakKind::PulseOff});
            pulse_on = edges.advance();
            ++applied;
        }
        if (applied > 1) {
            merge_count += applied - 1;
            if (merge_count > 1000000) throw EventStall("solve: event chatter guard tripped");
        }

        if (detail::sign_of(x_next) != 0) prev_sign = detail::sign_of(x_next);
        x_cur = x_next;
        t_cur = t_next;
    }

    bps.push_back({t_end, BreakKind::End});
    std::stable_sort(bps.begin(), bps.end(),
                     [](const BreakPoint& a, const BreakPoint& b) { return a.t < b.t; });

    traj.path = PiecewiseExp(std::move(path));
    traj.breaking_points = std::move(bps);
    // Keep only zeros produced by the solve itself (t > t_begin); history
    // zeros were consumed as switch seeds.
    for (const Zero& z : zeros)
        if (z.t > t0) traj.zeros.push_back(z);
    return traj;
}

// Max |x'(t) + x(t) - f(x(t - tau)) - p(t)| over interior sample points of
// every segment. For an exactly propagated trajectory x' + x == A per
// piece, so this reduces to checking the offset bookkeeping against an
// independent evaluation of the delayed sign and the pulse state.
inline double residual_check(const Trajectory& traj, const ModelParams& p,
                             const ForcingSchedule& forcing, int samples_per_segment = 1) {
    if (samples_per_segment < 1) samples_per_segment = 1;
    double worst = 0.0;
    for (const Segment& s : traj.path.segments()) {
        for (int k = 1; k <= samples_per_segment; ++k) {
            const double t =
                s.lo + (s.hi - s.lo) * static_cast<double>(k) / (samples_per_segment + 1.0);
            if (t - p.tau < traj.span_lo()) continue;
            const double delayed = traj.eval(t - p.tau);
            const double expect =
                p.feedback(delayed) + (forcing.on_at(t) ? forcing.amplitude : 0.0);
            worst = std::max(worst, std::abs(s.offset - expect));
        }
    }
    return worst;
}

}  // namespace ddepulse
