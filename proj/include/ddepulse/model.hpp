#pragma once

// Reduced model of a scalar DDE with piecewise-constant delayed negative
// feedback:
//
//     x'(t) = -x(t) + f(x(t - tau)),   f(v) = beta_L  (v < 0)
//                                             -beta_U (v >= 0)
//
// plus the affine change of variables that maps the five-parameter
// physiological form onto it, and the closed-form unperturbed limit cycle.

#include <cmath>
#include <string>

#include "ddepulse/errors.hpp"

namespace ddepulse {

// Five-parameter form: x' = -gamma*x + b_L or b_U against threshold theta.
struct RawParams {
    double gamma = 1.0;    // decay rate (1/time)
    double tau_raw = 1.0;  // delay (time)
    double b_low = 2.0;    // production rate below threshold
    double b_high = 0.5;   // production rate at/above threshold
    double theta = 1.0;    // feedback threshold

    void validate() const {
        if (!(gamma > 0.0)) throw Error("RawParams: gamma must be > 0");
        if (!(tau_raw > 0.0)) throw Error("RawParams: tau_raw must be > 0");
        if (!(theta > 0.0)) throw Error("RawParams: theta must be > 0");
        if (!(b_low > b_high && b_high > 0.0))
            throw Error("RawParams: need b_low > b_high > 0");
    }
};

// Reduced three-parameter form. Both betas are strictly positive, which
// encodes -beta_U < 0 < beta_L.
struct ModelParams {
    double tau = 1.0;     // dimensionless delay
    double beta_up = 1.0;   // magnitude of the upper (suppressive) level
    double beta_low = 1.0;  // lower (productive) level

    void validate() const {
        if (!(tau > 0.0)) throw Error("ModelParams: tau must be > 0");
        if (!(beta_up > 0.0) || !(beta_low > 0.0))
            throw Error("ModelParams: betas must be > 0");
    }

    // Feedback level for a delayed value v; the tie v == 0 selects the
    // suppressive branch (the ">=" in the feedback definition).
    double feedback(double v) const { return v >= 0.0 ? -beta_up : beta_low; }
};

// Unperturbed limit cycle descriptors: x rises from x_min through zero z1
// up to x_max at t_max = z1 + tau, then falls through z2 back to x_min at
// t = period.
struct LimitCycle {
    double x_min = 0.0;  // minimum (negative)
    double x_max = 0.0;  // maximum (positive)
    double z1 = 0.0;     // first zero (rising)
    double z2 = 0.0;     // second zero (falling)
    double period = 0.0;
    double t_max = 0.0;  // time of the maximum, z1 + tau
};

// Map the five-parameter form onto the reduced one:
// tau = gamma*tau_raw, beta_L = b_low/gamma - theta, beta_U = theta - b_high/gamma.
// Requires b_low > gamma*theta > b_high, otherwise the reduced feedback does
// not straddle zero and no oscillation exists.
inline ModelParams normalize_params(const RawParams& raw) {
    raw.validate();
    const double beta_low = raw.b_low / raw.gamma - raw.theta;
    const double beta_up = raw.theta - raw.b_high / raw.gamma;
    if (!(beta_low > 0.0))
        throw NonOscillatoryRegime("normalize_params: b_low <= gamma*theta");
    if (!(beta_up > 0.0))
        throw NonOscillatoryRegime("normalize_params: b_high >= gamma*theta");
    return ModelParams{raw.gamma * raw.tau_raw, beta_up, beta_low};
}

// Inverse of normalize_params for a given gamma and theta.
inline RawParams denormalize_params(const ModelParams& p, double gamma, double theta) {
    RawParams raw;
    raw.gamma = gamma;
    raw.theta = theta;
    raw.tau_raw = p.tau / gamma;
    raw.b_low = gamma * (theta + p.beta_low);
    raw.b_high = gamma * (theta - p.beta_up);
    return raw;
}

// Closed-form limit cycle constants.
inline LimitCycle limit_cycle(const ModelParams& p) {
    p.validate();
    LimitCycle lc;
    const double decay = 1.0 - std::exp(-p.tau);
    lc.x_min = -p.beta_up * decay;
    lc.x_max = p.beta_low * decay;
    lc.z1 = std::log((p.beta_low - lc.x_min) / p.beta_low);
    lc.z2 = lc.z1 + p.tau + std::log((p.beta_up + lc.x_max) / p.beta_up);
    lc.period = lc.z2 + p.tau;
    lc.t_max = lc.z1 + p.tau;
    return lc;
}

// Limit cycle value at t in [0, period]. At exactly t = t_max both branches
// agree; the first branch is used there for determinism.
inline double eval_unperturbed(const LimitCycle& lc, const ModelParams& p, double t) {
    if (t < 0.0 || t > lc.period)
        throw OutOfRange("eval_unperturbed: t outside [0, period]");
    if (t <= lc.t_max)
        return p.beta_low + (lc.x_min - p.beta_low) * std::exp(-t);
    return -p.beta_up + (lc.x_max + p.beta_up) * std::exp(-(t - lc.t_max));
}

// Limit cycle value at an arbitrary phase (wraps t into [0, period)).
inline double eval_cycle_wrapped(const LimitCycle& lc, const ModelParams& p, double t) {
    double s = t - lc.period * std::floor(t / lc.period);
    if (s < 0.0) s = 0.0;
    return eval_unperturbed(lc, p, s);
}

// j-th zero of the limit cycle (1-based): z_{j+2} = z_j + period.
inline double cycle_zero(const LimitCycle& lc, int j) {
    if (j < 1) throw OutOfRange("cycle_zero: index must be >= 1");
    const int cycles = (j - 1) / 2;
    return ((j - 1) % 2 == 0 ? lc.z1 : lc.z2) + cycles * lc.period;
}

}  // namespace ddepulse
