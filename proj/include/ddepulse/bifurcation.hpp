#pragma once

// One-parameter orbit diagrams with warm-start continuation, time-delay
// embeddings and projected Poincare sections. Extrema are read off the
// breaking points: within a segment the solution is strictly monotone, so
// every local extremum is a breaking point and extremum detection is a
// sign test on segment coefficients, never finite differencing.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/solver.hpp"
#include "ddepulse/trajectory.hpp"

namespace ddepulse {

enum class SweepParam { Amplitude, Sigma, BetaUp, Tau };
enum class SweepDirection { Increasing, Decreasing };

inline const char* to_string(SweepParam p) {
    switch (p) {
        case SweepParam::Amplitude: return "a";
        case SweepParam::Sigma: return "sigma";
        case SweepParam::BetaUp: return "beta_u";
        case SweepParam::Tau: return "tau";
    }
    return "?";
}

struct SweepSpec {
    SweepParam parameter = SweepParam::Amplitude;
    double lo = 0.0;
    double hi = 1.0;
    int mesh_count = 10000;
    SweepDirection direction = SweepDirection::Increasing;
    double transient_periods = 5.5;        // discarded, in units of T_p
    double record_periods = 5.5;           // recorded, in units of T_p
    double first_transient_periods = 220.0;  // transient at the first mesh point
    bool warm_start = true;  // carry the last tau of each solve to the next point

    void validate() const {
        if (mesh_count < 2) throw Error("SweepSpec: mesh_count must be >= 2");
        if (!(hi > lo)) throw Error("SweepSpec: need hi > lo");
        if (!(transient_periods > 0 && record_periods > 0))
            throw Error("SweepSpec: transient/record periods must be > 0");
    }
};

struct ExtremaRecord {
    double param_value = 0.0;
    std::vector<double> maxima;
    std::vector<double> minima;
};

namespace detail {

// Local extrema of the path over [t_lo, t_hi]: breaking points where the
// segment slope changes sign (slope sign is sign(-coef) per piece).
inline void record_extrema(const Trajectory& traj, double t_lo, double t_hi,
                           std::vector<double>* maxima,
                           std::vector<double>* minima) {
    const auto& segs = traj.path.segments();
    for (std::size_t i = 1; i < segs.size(); ++i) {
        const double t = segs[i].lo;
        if (t <= t_lo || t >= t_hi) continue;
        const double before = -segs[i - 1].coef;
        const double after = -segs[i].coef;
        if (before > 0.0 && after < 0.0)
            maxima->push_back(segs[i].eval(t));
        else if (before < 0.0 && after > 0.0)
            minima->push_back(segs[i].eval(t));
    }
}

inline void apply_sweep_value(SweepParam which, double v, ModelParams* p,
                              ForcingSchedule* f) {
    switch (which) {
        case SweepParam::Amplitude: f->amplitude = v; break;
        case SweepParam::Sigma: f->sigma = v; break;
        case SweepParam::BetaUp: p->beta_up = v; break;
        case SweepParam::Tau: p->tau = v; break;
    }
}

}  // namespace detail

// Warm-start continuation: each mesh point solves with the previous
// point's final tau of trajectory (breaking points included) as history,
// discards transient_periods * T_p, and records extrema over
// record_periods * T_p. The first point runs first_transient_periods.
inline std::vector<ExtremaRecord> sweep(const ModelParams& p0,
                                        const ForcingSchedule& f0,
                                        const SweepSpec& spec) {
    p0.validate();
    spec.validate();

    std::vector<ExtremaRecord> records;
    records.reserve(spec.mesh_count);

    Trajectory prev;  // previous mesh point's solution (warm-start source)
    bool have_prev = false;

    for (int i = 0; i < spec.mesh_count; ++i) {
        const double frac = static_cast<double>(i) / (spec.mesh_count - 1);
        const double value = spec.direction == SweepDirection::Increasing
                                 ? spec.lo + (spec.hi - spec.lo) * frac
                                 : spec.hi - (spec.hi - spec.lo) * frac;

        ModelParams p = p0;
        ForcingSchedule f = f0;
        detail::apply_sweep_value(spec.parameter, value, &p, &f);
        if (f.sigma <= 0.0) f.amplitude = 0.0;  // zero-width pulses: no forcing
        p.validate();

        const double schedule_tp = f.period();
        const double t_p = std::isfinite(schedule_tp) && schedule_tp > 0.0
                               ? schedule_tp
                               : limit_cycle(p).period;
        const double transient =
            (i == 0 ? spec.first_transient_periods : spec.transient_periods) * t_p;
        const double record = spec.record_periods * t_p;

        HistoryFunction h;
        if (have_prev && spec.warm_start &&
            prev.t_end - prev.span_lo() >= p.tau * (1.0 + 1e-12)) {
            h = prev.slice_history(p.tau);
        } else {
            h = limit_cycle_history(p);
        }
        const double t0 = h.hi();
        ForcingSchedule fs = f;
        if (fs.active()) fs.delta0 = t0 + f.delta0;

        Trajectory traj = solve(p, h, fs, t0 + transient + record);

        ExtremaRecord rec;
        rec.param_value = value;
        detail::record_extrema(traj, t0 + transient, traj.t_end, &rec.maxima,
                               &rec.minima);
        records.push_back(std::move(rec));

        if (spec.warm_start) {
            prev = std::move(traj);
            have_prev = true;
        }
    }
    return records;
}

// Cluster count of a value list at the given absolute tolerance (used to
// tell a period-q orbit's q branches apart on a diagram).
inline int distinct_cluster_count(std::vector<double> values, double tol = 1e-7) {
    if (values.empty()) return 0;
    std::sort(values.begin(), values.end());
    int count = 1;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] - values[i - 1] > tol) ++count;
    return count;
}

struct EmbeddingPoint {
    double x_delayed = 0.0;  // x(t - tau)
    double x_now = 0.0;      // x(t)
    double t = 0.0;
};

// Time-delay embedding (x(t - tau), x(t)) over [t_lo, t_hi], sampled at
// every breaking point of either coordinate plus interior points.
inline std::vector<EmbeddingPoint> delay_embedding(const Trajectory& traj,
                                                   double t_lo, double t_hi,
                                                   double tau,
                                                   int samples_per_segment = 8) {
    if (t_lo - tau < traj.span_lo() || t_hi > traj.t_end)
        throw OutOfRange("delay_embedding: window leaves the trajectory span");
    std::vector<double> ts;
    ts.push_back(t_lo);
    ts.push_back(t_hi);
    for (const Segment& s : traj.path.segments()) {
        for (double edge : {s.lo, s.lo + tau}) {
            if (edge > t_lo && edge < t_hi) ts.push_back(edge);
        }
    }
    std::sort(ts.begin(), ts.end());
    std::vector<EmbeddingPoint> pts;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        for (int k = 0; k < samples_per_segment; ++k) {
            const double t =
                ts[i] + (ts[i + 1] - ts[i]) * k / static_cast<double>(samples_per_segment);
            pts.push_back({traj.eval(t - tau), traj.eval(t), t});
        }
    }
    pts.push_back({traj.eval(t_hi - tau), traj.eval(t_hi), t_hi});
    return pts;
}

struct SectionSpec {
    double level = 0.14;
    bool rising = true;  // crossing direction x'(t) > 0
};

struct SectionPoint {
    double x_tau = 0.0;   // x(t_c - tau)
    double x_2tau = 0.0;  // x(t_c - 2 tau)
    double t_c = 0.0;
    bool rising = true;
};

// Crossings of x(t) = level with the requested direction, projected onto
// (x(t - tau), x(t - 2 tau)). Crossing times are closed form per segment.
inline std::vector<SectionPoint> poincare_section(const Trajectory& traj,
                                                  const SectionSpec& spec,
                                                  double t_lo, double t_hi) {
    const double tau = traj.params.tau;
    if (t_lo - 2.0 * tau < traj.span_lo() || t_hi > traj.t_end)
        throw OutOfRange("poincare_section: window needs two delays of span");
    std::vector<SectionPoint> pts;
    for (const Segment& s : traj.path.segments()) {
        if (s.hi <= t_lo || s.lo >= t_hi) continue;
        if (s.coef == 0.0) continue;
        const bool seg_rising = s.coef < 0.0;
        if (seg_rising != spec.rising) continue;
        const double ratio = (spec.level - s.offset) / s.coef;
        if (!(ratio > 0.0)) continue;
        const double t_c = s.anchor - std::log(ratio);
        if (t_c <= std::max(s.lo, t_lo) || t_c > std::min(s.hi, t_hi)) continue;
        pts.push_back({traj.eval(t_c - tau), traj.eval(t_c - 2.0 * tau), t_c,
                       seg_rising});
    }
    return pts;
}

}  // namespace ddepulse
