#pragma once

// Piecewise-exponential function representation shared by histories and
// solver output. Every piece is A + B*exp(-(t - anchor)) on [lo, hi]; the
// anchor is kept separate from the coverage bounds so that slicing a
// trajectory into a new history window preserves each piece bit-exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"

namespace ddepulse {

struct Segment {
    double offset = 0.0;  // A
    double coef = 0.0;    // B
    double anchor = 0.0;  // time origin of the exponential
    double lo = 0.0;      // coverage start
    double hi = 0.0;      // coverage end

    double eval(double t) const { return offset + coef * std::exp(-(t - anchor)); }
    double slope(double t) const { return -coef * std::exp(-(t - anchor)); }

    // Zero of the piece if it lies in (lo, hi] with a strict sign change.
    // A monotone piece crosses zero at most once: t = anchor + ln(-B/A).
    bool zero(double* out) const {
        if (offset == 0.0 || coef == 0.0) return false;
        const double ratio = -coef / offset;
        if (!(ratio > 0.0)) return false;
        const double z = anchor + std::log(ratio);
        if (z > lo && z <= hi) {
            *out = z;
            return true;
        }
        return false;
    }
};

enum class BreakKind { PulseOn, PulseOff, FeedbackSwitch, End };

struct BreakPoint {
    double t = 0.0;
    BreakKind kind = BreakKind::End;
};

struct Zero {
    double t = 0.0;
    bool rising = false;
};

// A piecewise function on [lo(), hi()] made of contiguous segments.
class PiecewiseExp {
public:
    PiecewiseExp() = default;
    explicit PiecewiseExp(std::vector<Segment> segs) : segments_(std::move(segs)) {}

    const std::vector<Segment>& segments() const { return segments_; }
    std::vector<Segment>& segments() { return segments_; }
    bool empty() const { return segments_.empty(); }
    double lo() const { return segments_.front().lo; }
    double hi() const { return segments_.back().hi; }

    double eval(double t) const { return segment_at(t).eval(t); }

    const Segment& segment_at(double t) const {
        if (segments_.empty() || t < lo() || t > hi())
            throw OutOfRange("PiecewiseExp: t outside covered span");
        // First segment whose coverage end is >= t.
        auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                                   [](const Segment& s, double v) { return s.hi < v; });
        if (it == segments_.end()) --it;
        return *it;
    }

    std::size_t index_at(double t) const {
        return static_cast<std::size_t>(&segment_at(t) - segments_.data());
    }

    // Sign of the function just after time t (used to seed the delayed
    // feedback state). Falls back to the slope direction when the value at
    // t is exactly zero.
    int sign_after(double t) const {
        const Segment& s = segment_at(t);
        const double v = s.eval(t);
        if (v > 0.0) return 1;
        if (v < 0.0) return -1;
        const double d = s.slope(t);
        if (d > 0.0) return 1;
        if (d < 0.0) return -1;
        return 0;  // identically zero piece
    }

    // Strict sign-change zeros over the covered span, in increasing order.
    // Tangential touches (value reaching zero without changing sign) are
    // not zeros.
    std::vector<Zero> sign_change_zeros() const {
        std::vector<Zero> zs;
        int prev_sign = 0;  // last nonzero sign seen
        for (const Segment& s : segments_) {
            const double v0 = s.eval(s.lo);
            const double v1 = s.eval(s.hi);
            const int s0 = v0 > 0.0 ? 1 : (v0 < 0.0 ? -1 : 0);
            const int s1 = v1 > 0.0 ? 1 : (v1 < 0.0 ? -1 : 0);
            if (s0 != 0) {
                if (prev_sign != 0 && s0 != prev_sign) {
                    // Sign flipped exactly at the joint s.lo.
                    zs.push_back({s.lo, s0 > 0});
                }
                prev_sign = s0;
            }
            if (s1 != 0 && s0 != 0 && s1 != s0) {
                double z = s.hi;
                if (s.offset != 0.0 && s.coef != 0.0) {
                    const double ratio = -s.coef / s.offset;
                    if (ratio > 0.0)
                        z = std::min(std::max(s.anchor + std::log(ratio), s.lo), s.hi);
                }
                zs.push_back({z, s1 > 0});
            }
            if (s1 != 0) prev_sign = s1;
        }
        return zs;
    }

private:
    std::vector<Segment> segments_;
};

// History function: a piecewise-exponential covering [t0 - tau, t0].
using HistoryFunction = PiecewiseExp;

// The limit-cycle history used throughout: x(t) = -beta_U + beta_U e^{-(t+tau)}
// on [-tau, 0], i.e. the cycle segment ending at its minimum, so a solve
// starting at t = 0 sits at phase 0 of the unperturbed cycle.
inline HistoryFunction limit_cycle_history(const ModelParams& p) {
    Segment s;
    s.offset = -p.beta_up;
    s.coef = p.beta_up;
    s.anchor = -p.tau;
    s.lo = -p.tau;
    s.hi = 0.0;
    return HistoryFunction({s});
}

// The cycle segment ending sigma BEFORE the minimum:
// x(t) = -beta_U + beta_U e^{-(t - sigma + tau)} on [-tau, 0], so a pulse of
// width sigma starting at t = 0 ends exactly at the minimum phase.
inline HistoryFunction preminimum_history(const ModelParams& p, double sigma) {
    Segment s;
    s.offset = -p.beta_up;
    s.coef = p.beta_up;
    s.anchor = sigma - p.tau;
    s.lo = -p.tau;
    s.hi = 0.0;
    return HistoryFunction({s});
}

// Constant history at a fixed level.
inline HistoryFunction constant_history(double level, double tau, double t_end = 0.0) {
    Segment s;
    s.offset = level;
    s.coef = 0.0;
    s.anchor = t_end - tau;
    s.lo = t_end - tau;
    s.hi = t_end;
    return HistoryFunction({s});
}

// Solver output: exact segments on [t_begin, t_end], the history they grew
// from, every breaking point, and every strict sign-change zero with t > t_begin.
struct Trajectory {
    ModelParams params;
    PiecewiseExp history;  // covers [t_begin - tau_window, t_begin]
    PiecewiseExp path;     // covers [t_begin, t_end]
    std::vector<BreakPoint> breaking_points;
    std::vector<Zero> zeros;
    double t_begin = 0.0;
    double t_end = 0.0;

    // Evaluate anywhere in [history.lo(), t_end].
    double eval(double t) const {
        if (!history.empty() && t < t_begin) return history.eval(t);
        return path.eval(t);
    }

    double span_lo() const { return history.empty() ? t_begin : history.lo(); }

    // Ordered zeros with t in [t_lo, t_hi] (path zeros only).
    std::vector<Zero> zeros_between(double t_lo, double t_hi) const {
        if (t_lo < span_lo() || t_hi > t_end)
            throw OutOfRange("zeros_between: window outside trajectory span");
        std::vector<Zero> out;
        for (const Zero& z : zeros)
            if (z.t >= t_lo && z.t <= t_hi) out.push_back(z);
        return out;
    }

    // Slice the last part of this trajectory into a history window
    // [t_end - window, t_end]. Segments keep their anchors, offsets and
    // coefficients, so evaluation of the slice is bit-identical.
    HistoryFunction slice_history(double window) const {
        const double start = t_end - window;
        if (start < span_lo())
            throw OutOfRange("slice_history: window longer than trajectory span");
        std::vector<Segment> segs;
        auto add_from = [&](const PiecewiseExp& pw) {
            for (const Segment& s : pw.segments()) {
                if (s.hi <= start || s.lo >= t_end) continue;
                Segment c = s;
                c.lo = std::max(s.lo, start);
                c.hi = std::min(s.hi, t_end);
                if (c.hi > c.lo || segs.empty()) segs.push_back(c);
            }
        };
        add_from(history);
        add_from(path);
        return HistoryFunction(std::move(segs));
    }
};

}  // namespace ddepulse
