#pragma once

// Dosing formulas built on the forced limit cycle, the mapping of the
// decoupled neutrophil model onto the reduced DDE, G-CSF pulse simulation
// and the chemotherapy nadir/amplitude scan.
//
// Unit conventions: concentrations (N_star, Q_star, betas, amplitudes) are
// held in units of 1e9 cells/kg of body mass; physical time is in days and
// reduced time is t = gamma_N * t_hat. Exported tables carry an explicit
// units field.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ddepulse/errors.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/periodic.hpp"
#include "ddepulse/solver.hpp"
#include "ddepulse/trajectory.hpp"

namespace ddepulse {

// Concentration below which neutropenia counts as severe (1e9 cells/kg;
// equals an absolute neutrophil count of 500 cells/ul).
constexpr double kSevereNeutropeniaLevel = 0.061;

struct PhysioParams {
    double gamma_n = 2.4;      // neutrophil apoptosis rate (1/day)
    double tau_np = 5.0;       // proliferation time (days)
    double tau_nm = 4.3;       // maturation time (days)
    double n_star = 0.63;      // normal neutrophil level (1e9 cells/kg)
    double q_star = 1.1e-3;    // stem-cell steady state (1e9 cells/kg)
    double a_n = 6.55e4;       // amplification factor without G-CSF
    double f0 = 0.4;           // maximal commitment rate kappa_N(0) (1/day)
    double epsilon = 1e-4;     // b_U = epsilon * b_L
    double eta_np_max = 3.0552;  // max proliferation rate under G-CSF (1/day)
    double gamma0_min = 0.12;    // min death rate in maturation (1/day)
    double tau_nm_gcsf = 4.3;    // maturation time under G-CSF (days)

    double tau_n() const { return tau_np + tau_nm; }
    // Amplification under G-CSF: exp(eta_NP^max tau_NP - gamma_0^min tau_NM^gcsf).
    double a_n_gcsf() const {
        return std::exp(eta_np_max * tau_np - gamma0_min * tau_nm_gcsf);
    }

    void validate() const {
        if (!(gamma_n > 0 && tau_np > 0 && tau_nm > 0 && n_star > 0 && q_star > 0 &&
              a_n > 0 && f0 > 0 && epsilon > 0))
            throw Error("PhysioParams: all parameters must be positive");
        if (!(epsilon < 1.0)) throw Error("PhysioParams: epsilon must be << 1");
    }
};

struct BandSpec {
    double x_norm = 0.0;  // normal level in reduced units
    double f_min = 1.0;
    double f_max = 1.0;

    void validate() const {
        if (!(x_norm > 0.0)) throw Error("BandSpec: x_norm must be > 0");
        if (!(0.0 < f_min && f_min <= 1.0 && 1.0 <= f_max))
            throw Error("BandSpec: need 0 < f_min <= 1 <= f_max");
    }
};

// Minimal off interval between administrations so that the forced-cycle
// minimum sits exactly at x_norm:
//   alpha = ln((a + (x_norm + beta_U - a) e^{-sigma}) / (x_norm + beta_U)).
inline double min_rest_interval(double a, double sigma, double x_norm,
                                double beta_up) {
    if (!(a > 0.0 && sigma > 0.0 && x_norm > 0.0 && beta_up > 0.0))
        throw Error("min_rest_interval: arguments must be positive");
    const double level = x_norm + beta_up;
    const double arg = (a + (level - a) * std::exp(-sigma)) / level;
    if (!(arg > 1.0))
        throw Infeasible(
            "min_rest_interval: no positive rest interval ends neutropenia at this "
            "dose (log argument <= 1)");
    return std::log(arg);
}

struct BandFit {
    double a = 0.0;
    double alpha = 0.0;
    double a1 = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

// Solve x_min_p(a, alpha) = f_min x_norm, x_max_p(a, alpha) = f_max x_norm
// by damped Newton with the analytic Jacobian of the forced-cycle extrema;
// falls back to bisection on alpha (a is linear given alpha) if Newton
// stalls. Initial guess a = beta_U (f_max + 1), alpha = sigma.
inline BandFit fit_band(const ModelParams& p, const BandSpec& band, double sigma) {
    p.validate();
    band.validate();
    if (!(sigma > 0.0 && sigma <= p.tau))
        throw Error("fit_band: sigma must be in (0, tau]");

    const double ems = std::exp(-sigma);
    const double s1 = 1.0 - ems;
    const double lo_target = band.f_min * band.x_norm;
    const double hi_target = band.f_max * band.x_norm;
    const double bu = p.beta_up;

    auto extrema = [&](double a, double alpha, double* xmin, double* xmax) {
        const double ea = std::exp(alpha);
        const double w = s1 / (ea - ems);
        *xmin = -bu + a * w;
        *xmax = -bu + a * w * ea;
    };

    double a = bu * (band.f_max + 1.0);
    double alpha = sigma;
    double xmin, xmax;
    extrema(a, alpha, &xmin, &xmax);
    double r1 = xmin - lo_target;
    double r2 = xmax - hi_target;
    double rnorm = std::max(std::abs(r1), std::abs(r2));

    int iter = 0;
    bool converged = rnorm < 1e-10;
    for (; iter < 200 && !converged; ++iter) {
        const double ea = std::exp(alpha);
        const double den = ea - ems;
        const double w = s1 / den;
        // d xmin/da = w,            d xmin/dalpha = -a s1 ea / den^2
        // d xmax/da = w ea,         d xmax/dalpha = -a s1 ea ems / den^2
        const double j11 = w;
        const double j12 = -a * s1 * ea / (den * den);
        const double j21 = w * ea;
        const double j22 = -a * s1 * ea * ems / (den * den);
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double da = (r1 * j22 - r2 * j12) / det;
        const double dalpha = (r2 * j11 - r1 * j21) / det;

        double step = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            const double a_try = a - step * da;
            const double alpha_try = alpha - step * dalpha;
            if (!(a_try > 0.0) || !(alpha_try > 0.0)) continue;
            double m1, m2;
            extrema(a_try, alpha_try, &m1, &m2);
            const double t1 = m1 - lo_target;
            const double t2 = m2 - hi_target;
            const double tn = std::max(std::abs(t1), std::abs(t2));
            if (tn < rnorm) {
                a = a_try;
                alpha = alpha_try;
                r1 = t1;
                r2 = t2;
                rnorm = tn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
        converged = rnorm < 1e-10;
    }

    if (!converged) {
        // Bisection fallback: for fixed alpha, a(alpha) puts the minimum on
        // target exactly; the remaining residual in the maximum is monotone
        // increasing in alpha.
        auto max_residual = [&](double alpha_try) {
            const double ea = std::exp(alpha_try);
            const double w = s1 / (ea - ems);
            const double a_fit = (lo_target + bu) / w;
            return (-bu + a_fit * w * ea) - hi_target;
        };
        double lo = 1e-12, hi = sigma;
        while (max_residual(hi) < 0.0 && hi < 1e3) hi *= 2.0;
        if (max_residual(lo) > 0.0 || max_residual(hi) < 0.0)
            throw NoConvergence("fit_band: bisection could not bracket a solution");
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (max_residual(mid) < 0.0 ? lo : hi) = mid;
        }
        alpha = 0.5 * (lo + hi);
        const double ea = std::exp(alpha);
        a = (lo_target + bu) * (ea - ems) / s1;
        extrema(a, alpha, &xmin, &xmax);
        rnorm = std::max(std::abs(xmin - lo_target), std::abs(xmax - hi_target));
        if (rnorm >= 1e-10)
            throw NoConvergence("fit_band: residual did not reach 1e-10");
    }

    if (!(alpha > 1e-12))
        throw Infeasible("fit_band: band requires alpha -> 0 (zero amplitude)");

    BandFit fit;
    fit.a = a;
    fit.alpha = alpha;
    fit.residual = rnorm;
    fit.iterations = iter;
    fit.a1 = a1_threshold(bu, sigma, alpha);
    if (fit.a < fit.a1)
        throw Infeasible("fit_band: fitted dose sits below the a1 threshold");
    return fit;
}

// Reduced-model view of the decoupled neutrophil equation.
struct NeutrophilMap {
    ModelParams reduced;         // tau = gamma_N tau_N, betas in 1e9 cells/kg
    double gamma_n = 1.0;        // t_hat = t / gamma_N
    double n_star = 0.0;         // N(t_hat) = x(t) + N_star
    double g = 0.0;              // beta_L / beta_U
    double period_days = 0.0;    // exact unperturbed period, T~ / gamma_N
    double period_approx_days = 0.0;  // 2 tau_N + ln((g+1)^2/g) / gamma_N
};

inline double period_approx_days(double tau_n, double gamma_n, double g) {
    return 2.0 * tau_n + std::log((g + 1.0) * (g + 1.0) / g) / gamma_n;
}

inline NeutrophilMap map_neutrophil_model(const PhysioParams& phys) {
    phys.validate();
    RawParams raw;
    raw.gamma = phys.gamma_n;
    raw.tau_raw = phys.tau_n();
    raw.b_low = phys.a_n * phys.f0 * phys.q_star;
    raw.b_high = phys.epsilon * raw.b_low;
    raw.theta = phys.n_star;

    NeutrophilMap m;
    m.reduced = normalize_params(raw);
    m.gamma_n = phys.gamma_n;
    m.n_star = phys.n_star;
    m.g = m.reduced.beta_low / m.reduced.beta_up;
    m.period_days = limit_cycle(m.reduced).period / phys.gamma_n;
    m.period_approx_days = period_approx_days(phys.tau_n(), phys.gamma_n, m.g);
    return m;
}

// Direct construction from reduced-unit levels (used when the feedback
// bounds are chosen to reproduce observed oscillation bounds).
inline NeutrophilMap neutrophil_map_from_reduced(double beta_up, double beta_low,
                                                 double tau, double gamma_n,
                                                 double n_star) {
    NeutrophilMap m;
    m.reduced = ModelParams{tau, beta_up, beta_low};
    m.reduced.validate();
    m.gamma_n = gamma_n;
    m.n_star = n_star;
    m.g = beta_low / beta_up;
    m.period_days = limit_cycle(m.reduced).period / gamma_n;
    m.period_approx_days = period_approx_days(tau / gamma_n, gamma_n, m.g);
    return m;
}

namespace detail {

// Extremes of N(t_hat) = x(t) + N_star over a reduced-time window; segment
// monotonicity makes endpoint scanning exact.
inline void window_extrema(const Trajectory& traj, double t_lo, double t_hi,
                           double* min_out, double* max_out) {
    double lo = traj.eval(t_lo);
    double hi = lo;
    auto take = [&](double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    take(traj.eval(t_hi));
    for (const Segment& s : traj.path.segments()) {
        if (s.hi <= t_lo || s.lo >= t_hi) continue;
        take(s.eval(std::max(s.lo, t_lo)));
        take(s.eval(std::min(s.hi, t_hi)));
    }
    *min_out = lo;
    *max_out = hi;
}

}  // namespace detail

struct GcsfResult {
    Trajectory traj;            // reduced time, x units (add n_star for N)
    double nadir_before = 0.0;  // min N before treatment starts (1e9 cells/kg)
    double nadir_after = 0.0;   // min N from treatment start on
    double max_after = 0.0;
    bool severe_before = false;
    bool severe_after = false;
};

// Periodic G-CSF administration: one day on, one day off (sigma = alpha =
// gamma_N in reduced time), pulses starting at start_day.
inline GcsfResult gcsf_simulation(const NeutrophilMap& m, double dose_amplitude,
                                  double start_day, double t_end_days = 70.0) {
    const double sigma = m.gamma_n;
    const double alpha = m.gamma_n;
    const double t_end = t_end_days * m.gamma_n;
    const double delta0 = start_day * m.gamma_n;
    if (!(delta0 >= 0.0 && t_end > delta0))
        throw Error("gcsf_simulation: need 0 <= start_day < t_end_days");

    ForcingSchedule f = dose_amplitude == 0.0
                            ? ForcingSchedule::none()
                            : ForcingSchedule::periodic(delta0, sigma, alpha,
                                                        dose_amplitude);
    GcsfResult r;
    r.traj = solve(m.reduced, limit_cycle_history(m.reduced), f, t_end);
    double lo, hi;
    if (delta0 > 0.0) {
        detail::window_extrema(r.traj, 0.0, delta0, &lo, &hi);
        r.nadir_before = lo + m.n_star;
    } else {
        r.nadir_before = r.traj.eval(0.0) + m.n_star;
    }
    detail::window_extrema(r.traj, delta0, t_end, &lo, &hi);
    r.nadir_after = lo + m.n_star;
    r.max_after = hi + m.n_star;
    r.severe_before = r.nadir_before < kSevereNeutropeniaLevel;
    r.severe_after = r.nadir_after < kSevereNeutropeniaLevel;
    return r;
}

// Chemotherapy amplitude that pins the daily-administration nadir at zero:
// a = beta_U - N_star / (1 - e^{-tau}) (negative).
inline double chemo_amplitude(const NeutrophilMap& m) {
    return m.reduced.beta_up - m.n_star / (1.0 - std::exp(-m.reduced.tau));
}

struct ChemoPoint {
    double t_p_days = 0.0;
    double nadir = 0.0;      // min N over the window (1e9 cells/kg)
    double amplitude = 0.0;  // max N - min N over the window
};

struct ScanResult {
    std::vector<ChemoPoint> points;
    double window_lo_days = 0.0;
    double window_hi_days = 0.0;
    double amplitude_used = 0.0;          // the (negative) pulse amplitude
    std::string units = "1e9 cells/kg";
    std::vector<double> resonance_markers_days;  // n * T_hat / 2, n = 1..4
};

// Uniform day grid from lo to hi inclusive with the given step.
inline std::vector<double> day_grid(double lo, double hi, double step) {
    std::vector<double> g;
    const int n = static_cast<int>(std::round((hi - lo) / step));
    for (int i = 0; i <= n; ++i) g.push_back(lo + i * step);
    return g;
}

// Nadir/amplitude of N(t_hat) as a function of the administration period.
// Protocol: one-day doses (sigma = gamma_N), first dose at t = 0, history
// equal to the cycle segment ending sigma before the minimum, simulated to
// t_sim_days with extrema taken over [window_lo, window_hi] days.
inline ScanResult chemo_scan(const NeutrophilMap& m, double amplitude,
                             const std::vector<double>& t_p_days_grid,
                             double window_lo_days, double window_hi_days,
                             double t_sim_days = 2000.0) {
    if (!(amplitude < 0.0))
        throw Error("chemo_scan: chemotherapy amplitude must be negative");
    if (!(window_lo_days < window_hi_days && window_hi_days <= t_sim_days))
        throw Error("chemo_scan: bad window");
    const double sigma = m.gamma_n;  // one day
    const double t_end = t_sim_days * m.gamma_n;

    ScanResult out;
    out.window_lo_days = window_lo_days;
    out.window_hi_days = window_hi_days;
    out.amplitude_used = amplitude;
    for (int n = 1; n <= 4; ++n)
        out.resonance_markers_days.push_back(n * m.period_days / 2.0);

    const HistoryFunction history = preminimum_history(m.reduced, sigma);
    for (double tp_days : t_p_days_grid) {
        const double alpha = (tp_days - 1.0) * m.gamma_n;
        ForcingSchedule f;
        if (alpha > 1e-12 * m.gamma_n) {
            f = ForcingSchedule::periodic(0.0, sigma, alpha, amplitude);
        } else {
            // Daily dosing with one-day effect: the perturbation never
            // switches off.
            f = ForcingSchedule::single_pulse(0.0, t_end + sigma, amplitude);
        }
        Trajectory traj = solve(m.reduced, history, f, t_end);
        double lo, hi;
        detail::window_extrema(traj, window_lo_days * m.gamma_n,
                               window_hi_days * m.gamma_n, &lo, &hi);
        ChemoPoint pt;
        pt.t_p_days = tp_days;
        pt.nadir = lo + m.n_star;
        pt.amplitude = hi - lo;
        out.points.push_back(pt);
    }
    return out;
}

// First-day floor of the chemo protocol: N(1) = (N_star - beta_U) e^{-sigma}
// with sigma = gamma_N (one day), valid when tau is large.
inline double chemo_day1_level(const NeutrophilMap& m) {
    return (m.n_star - m.reduced.beta_up) * std::exp(-m.gamma_n);
}

}  // namespace ddepulse
