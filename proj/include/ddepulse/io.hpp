#pragma once

// CSV and JSON emission for every exportable object. CSV files start with
// a provenance header block ("# key = value" lines) listing the tolerances
// and defaults that produced them; doubles are printed with max_digits10
// so re-reading reproduces them exactly.

#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddepulse/bifurcation.hpp"
#include "ddepulse/model.hpp"
#include "ddepulse/single_pulse.hpp"
#include "ddepulse/solver.hpp"
#include "ddepulse/trajectory.hpp"
#include "ddepulse/treatment.hpp"

namespace ddepulse {

using json = nlohmann::json;

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

using HeaderBlock = std::vector<std::pair<std::string, std::string>>;

inline void write_header(std::ostream& os, const HeaderBlock& header) {
    for (const auto& [k, v] : header) os << "# " << k << " = " << v << "\n";
}

// --- trajectory ---------------------------------------------------------

// Columns: t, x, segment_index, is_breaking_point. Breaking points appear
// exactly; segment interiors are filled with extra samples.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 int samples_per_segment = 8,
                                 HeaderBlock header = {}) {
    header.emplace_back("samples_per_segment", std::to_string(samples_per_segment));
    write_header(os, header);
    os << "t,x,segment_index,is_breaking_point\n";
    const auto& segs = traj.path.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& s = segs[i];
        os << fmt(s.lo) << "," << fmt(s.eval(s.lo)) << "," << i << ",1\n";
        for (int k = 1; k < samples_per_segment; ++k) {
            const double t = s.lo + (s.hi - s.lo) * k / static_cast<double>(samples_per_segment);
            os << fmt(t) << "," << fmt(s.eval(t)) << "," << i << ",0\n";
        }
    }
    if (!segs.empty()) {
        const Segment& last = segs.back();
        os << fmt(last.hi) << "," << fmt(last.eval(last.hi)) << "," << segs.size() - 1
           << ",1\n";
    }
}

inline json segment_to_json(const Segment& s) {
    return json{{"offset", s.offset},
                {"coef", s.coef},
                {"anchor", s.anchor},
                {"lo", s.lo},
                {"hi", s.hi}};
}

inline Segment segment_from_json(const json& j) {
    Segment s;
    s.offset = j.at("offset").get<double>();
    s.coef = j.at("coef").get<double>();
    s.anchor = j.at("anchor").get<double>();
    s.lo = j.at("lo").get<double>();
    s.hi = j.at("hi").get<double>();
    return s;
}

inline const char* to_string(BreakKind k) {
    switch (k) {
        case BreakKind::PulseOn: return "pulse_on";
        case BreakKind::PulseOff: return "pulse_off";
        case BreakKind::FeedbackSwitch: return "feedback_switch";
        case BreakKind::End: return "end";
    }
    return "?";
}

inline BreakKind break_kind_from_string(const std::string& s) {
    if (s == "pulse_on") return BreakKind::PulseOn;
    if (s == "pulse_off") return BreakKind::PulseOff;
    if (s == "feedback_switch") return BreakKind::FeedbackSwitch;
    return BreakKind::End;
}

// Full segment list; parsing it back reproduces the trajectory exactly.
inline json trajectory_to_json(const Trajectory& traj) {
    json j;
    j["params"] = {{"tau", traj.params.tau},
                   {"beta_u", traj.params.beta_up},
                   {"beta_l", traj.params.beta_low}};
    j["t_begin"] = traj.t_begin;
    j["t_end"] = traj.t_end;
    json hist = json::array();
    for (const Segment& s : traj.history.segments()) hist.push_back(segment_to_json(s));
    j["history"] = std::move(hist);
    json path = json::array();
    for (const Segment& s : traj.path.segments()) path.push_back(segment_to_json(s));
    j["segments"] = std::move(path);
    json bps = json::array();
    for (const BreakPoint& b : traj.breaking_points)
        bps.push_back(json{{"t", b.t}, {"kind", to_string(b.kind)}});
    j["breaking_points"] = std::move(bps);
    json zs = json::array();
    for (const Zero& z : traj.zeros)
        zs.push_back(json{{"t", z.t}, {"rising", z.rising}});
    j["zeros"] = std::move(zs);
    return j;
}

inline Trajectory trajectory_from_json(const json& j) {
    Trajectory traj;
    traj.params.tau = j.at("params").at("tau").get<double>();
    traj.params.beta_up = j.at("params").at("beta_u").get<double>();
    traj.params.beta_low = j.at("params").at("beta_l").get<double>();
    traj.t_begin = j.at("t_begin").get<double>();
    traj.t_end = j.at("t_end").get<double>();
    std::vector<Segment> hist;
    for (const json& s : j.at("history")) hist.push_back(segment_from_json(s));
    traj.history = PiecewiseExp(std::move(hist));
    std::vector<Segment> path;
    for (const json& s : j.at("segments")) path.push_back(segment_from_json(s));
    traj.path = PiecewiseExp(std::move(path));
    for (const json& b : j.at("breaking_points"))
        traj.breaking_points.push_back(
            {b.at("t").get<double>(), break_kind_from_string(b.at("kind"))});
    for (const json& z : j.at("zeros"))
        traj.zeros.push_back({z.at("t").get<double>(), z.at("rising").get<bool>()});
    return traj;
}

// --- cycle length map ----------------------------------------------------

inline void write_clm_csv(std::ostream& os, const std::vector<ClmPoint>& points,
                          HeaderBlock header = {}) {
    write_header(os, header);
    os << "delta,case_label,resetting_time,cycle_length\n";
    for (const ClmPoint& pt : points) {
        os << fmt(pt.delta) << "," << to_string(pt.label) << ","
           << (pt.infinite ? "inf" : fmt(pt.resetting_time)) << ","
           << (pt.infinite ? "inf" : fmt(pt.cycle_length)) << "\n";
    }
}

// --- pulse map / locking --------------------------------------------------

inline void write_pulse_map_csv(std::ostream& os, const PulseMapSequences& seq,
                                HeaderBlock header = {}) {
    write_header(os, header);
    os << "k,x_at_onset,x_at_offset\n";
    for (std::size_t k = 0; k < seq.at_onset.size(); ++k)
        os << k << "," << fmt(seq.at_onset[k]) << "," << fmt(seq.at_offset[k]) << "\n";
}

// --- sweep / embedding / section -------------------------------------------

inline void write_sweep_csv(std::ostream& os, const std::vector<ExtremaRecord>& recs,
                            HeaderBlock header = {}) {
    write_header(os, header);
    os << "param_value,kind,x_value\n";
    for (const ExtremaRecord& r : recs) {
        for (double v : r.maxima) os << fmt(r.param_value) << ",max," << fmt(v) << "\n";
        for (double v : r.minima) os << fmt(r.param_value) << ",min," << fmt(v) << "\n";
    }
}

inline void write_embedding_csv(std::ostream& os,
                                const std::vector<EmbeddingPoint>& pts,
                                HeaderBlock header = {}) {
    write_header(os, header);
    os << "x_tau,x\n";
    for (const EmbeddingPoint& p : pts)
        os << fmt(p.x_delayed) << "," << fmt(p.x_now) << "\n";
}

inline void write_section_csv(std::ostream& os, const std::vector<SectionPoint>& pts,
                              HeaderBlock header = {}) {
    write_header(os, header);
    os << "x_tau,x_2tau,t_c,direction\n";
    for (const SectionPoint& p : pts)
        os << fmt(p.x_tau) << "," << fmt(p.x_2tau) << "," << fmt(p.t_c) << ","
           << (p.rising ? "rising" : "falling") << "\n";
}

// --- treatment -------------------------------------------------------------

inline void write_scan_csv(std::ostream& os, const ScanResult& scan,
                           HeaderBlock header = {}) {
    header.emplace_back("amplitude", fmt(scan.amplitude_used));
    header.emplace_back("units", scan.units);
    {
        std::string marks;
        for (double m : scan.resonance_markers_days) {
            if (!marks.empty()) marks += " ";
            marks += fmt(m);
        }
        header.emplace_back("resonance_markers_days", marks);
    }
    write_header(os, header);
    os << "t_p_days,nadir,amplitude,window_lo,window_hi,units\n";
    for (const ChemoPoint& pt : scan.points)
        os << fmt(pt.t_p_days) << "," << fmt(pt.nadir) << "," << fmt(pt.amplitude)
           << "," << fmt(scan.window_lo_days) << "," << fmt(scan.window_hi_days)
           << "," << scan.units << "\n";
}

inline json dosing_report_json(double a, double alpha, double sigma, double a1,
                               double x_min_p, double x_max_p) {
    return json{{"a", a},          {"alpha", alpha},     {"sigma", sigma},
                {"a1", a1},        {"x_min_p", x_min_p}, {"x_max_p", x_max_p}};
}

}  // namespace ddepulse
