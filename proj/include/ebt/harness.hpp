#pragma once
// Experiment harness: reads a flat key-value config, runs a cohort-width
// sweep against the dense reference solution, measures flat-metric errors,
// fits the convergence order, and writes deterministic CSV reports.
//
// The reference is solved twice, once at the configured resolution and once
// with every step halved; the distance between the two runs (compared on a
// common cell grain) must stay below a configured fraction of the smallest
// sweep error, otherwise the report is flagged invalid.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <locale>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "ebt/cohorts.hpp"
#include "ebt/flat_metric.hpp"
#include "ebt/grids.hpp"
#include "ebt/integrator.hpp"
#include "ebt/model.hpp"
#include "ebt/reference.hpp"
#include "ebt/scalar_ebt.hpp"

namespace ebt {

// ---------------------------------------------------------------------------
// Number formatting. Reports and configs round-trip bit-exactly, so every
// value is written with the shortest representation that parses back to the
// same double.

inline std::string format_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw config_error(what + ": cannot parse number '" + std::string(s) + "'");
    if (!std::isfinite(v)) throw config_error(what + ": value must be finite");
    return v;
}

inline int parse_int(std::string_view s, const std::string& what) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw config_error(what + ": cannot parse integer '" + std::string(s) + "'");
    return v;
}

namespace detail {

inline void trim(std::string& s) {
    const auto keep = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), keep));
    s.erase(std::find_if(s.rbegin(), s.rend(), keep).base(), s.end());
}

inline std::vector<std::string> split_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::size_t k = 0;
    while (k < s.size()) {
        while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k;
        std::size_t j = k;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > k) out.emplace_back(s.substr(k, j - k));
        k = j;
    }
    return out;
}

inline bool is_multiple(double a, double b) {
    if (!(b > 0.0) || !(a > 0.0)) return false;
    const double r = a / b;
    const double k = std::round(r);
    return k >= 1.0 && std::abs(r - k) <= 1e-9 * std::max(1.0, std::abs(r));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Initial-data profiles: named analytic families with parameters.
//   uniform height lo hi
//   bump amp lo hi            amp * 16 s^2 (1-s)^2 on (lo, hi), s scaled
//   gaussian amp mean sigma lo hi

struct ProfileSpec {
    std::string family;
    std::vector<double> params;

    bool operator==(const ProfileSpec&) const = default;
};

inline void validate_profile(const ProfileSpec& p, const std::string& what) {
    std::size_t want = 0;
    if (p.family == "uniform" || p.family == "bump") want = 3;
    else if (p.family == "gaussian") want = 5;
    else throw config_error(what + ": unknown profile family '" + p.family + "'");
    if (p.params.size() != want)
        throw config_error(what + ": profile '" + p.family + "' needs " +
                           std::to_string(want) + " parameters");
    for (double v : p.params)
        if (!std::isfinite(v)) throw config_error(what + ": profile parameter not finite");
    if (p.params[0] < 0.0) throw config_error(what + ": profile amplitude must be nonnegative");
    const double lo = p.params[p.params.size() - 2];
    const double hi = p.params[p.params.size() - 1];
    if (!(hi > lo)) throw config_error(what + ": profile window must have hi > lo");
    if (p.family == "gaussian" && !(p.params[2] > 0.0))
        throw config_error(what + ": gaussian sigma must be positive");
}

inline double profile_value(const ProfileSpec& p, double x) {
    const double lo = p.params[p.params.size() - 2];
    const double hi = p.params[p.params.size() - 1];
    if (x < lo || x > hi) return 0.0;
    if (p.family == "uniform") return p.params[0];
    if (p.family == "bump") {
        const double s = (x - lo) / (hi - lo);
        return p.params[0] * 16.0 * s * s * (1.0 - s) * (1.0 - s);
    }
    const double d = (x - p.params[1]) / p.params[2];
    return p.params[0] * std::exp(-0.5 * d * d);
}

inline std::function<double(double)> profile_function(const ProfileSpec& p) {
    return [p](double x) { return profile_value(p, x); };
}

inline ProfileSpec parse_profile(std::string_view text, const std::string& what) {
    const auto tokens = detail::split_tokens(text);
    if (tokens.empty()) throw config_error(what + ": empty profile");
    ProfileSpec p;
    p.family = tokens[0];
    for (std::size_t k = 1; k < tokens.size(); ++k)
        p.params.push_back(parse_number(tokens[k], what));
    validate_profile(p, what);
    return p;
}

inline std::string format_profile(const ProfileSpec& p) {
    std::string s = p.family;
    for (double v : p.params) s += " " + format_number(v);
    return s;
}

// ---------------------------------------------------------------------------
// Experiment configuration.

struct ExperimentConfig {
    std::string model = "two-sex";  // "scalar" | "two-sex"
    std::string preset;
    double t_end = 1.0;
    double support = 0.5;  // initial data live on [0, support]
    double x_max = 1.6;    // domain cutoff; must contain support + t_end
    std::vector<double> widths;
    std::string output = "out";

    ProfileSpec male, female, couple_x, couple_y;  // two-sex initial data
    ProfileSpec density;                           // scalar initial data

    double dt_scale = 1.0;  // internalization interval = dt_scale * width
    int substeps = 4;

    int metric_resolution = 64;
    double lp_tolerance = 1e-9;
    int neighbours = 16;
    double cell = 0.05;  // couple comparison grain, fixed across widths

    double ref_h1 = 0.0;      // singles grid spacing (two-sex) / mesh spacing (scalar)
    double ref_h2 = 0.0;      // couple grid spacing = reference time step (two-sex)
    double ref_dt = 0.0;      // reference time step (scalar)
    bool autonomous = false;  // let the reference precompute rate grids
    double budget = 0.1;      // allowed reference self-error as an error fraction

    bool operator==(const ExperimentConfig&) const = default;
};

inline MetricConfig metric_config(const ExperimentConfig& cfg) {
    MetricConfig mc;
    mc.dual_grid_resolution = cfg.metric_resolution;
    mc.lp_tolerance = cfg.lp_tolerance;
    mc.transport_neighbours = cfg.neighbours;
    mc.domain_bound = cfg.x_max;
    return mc;
}

inline void validate_config(const ExperimentConfig& cfg) {
    const bool scalar = cfg.model == "scalar";
    if (!scalar && cfg.model != "two-sex")
        throw config_error("config: model must be 'scalar' or 'two-sex'");
    if (cfg.preset.empty()) throw config_error("config: preset is required");
    if (scalar)
        scalar_preset(cfg.preset);
    else
        preset(cfg.preset);

    if (!(cfg.t_end > 0.0)) throw config_error("config: t_end must be positive");
    if (!(cfg.support > 0.0)) throw config_error("config: support must be positive");
    if (cfg.x_max < cfg.support + cfg.t_end - 1e-12)
        throw config_error(
            "config: x_max must contain the initial support transported to t_end");

    if (cfg.widths.size() < 3)
        throw config_error("config: at least three widths are needed to fit an order");
    for (std::size_t k = 0; k < cfg.widths.size(); ++k) {
        const double w = cfg.widths[k];
        if (!(w > 0.0)) throw config_error("config: widths must be positive");
        if (k > 0 && !(w < cfg.widths[k - 1]))
            throw config_error("config: widths must be strictly decreasing");
        if (!detail::is_multiple(cfg.support, w))
            throw config_error("config: every width must partition the initial support");
        if (!detail::is_multiple(cfg.t_end, cfg.dt_scale * w))
            throw config_error(
                "config: t_end must be a multiple of every internalization interval");
    }

    if (!(cfg.dt_scale > 0.0)) throw config_error("config: dt_scale must be positive");
    if (cfg.substeps < 1) throw config_error("config: substeps must be at least 1");

    if (cfg.metric_resolution < 8)
        throw config_error("config: metric resolution must be at least 8");
    if (!(cfg.lp_tolerance > 0.0) || cfg.lp_tolerance > 1e-7)
        throw config_error("config: lp_tolerance must lie in (0, 1e-7]");
    if (cfg.neighbours < 1) throw config_error("config: neighbours must be at least 1");
    if (!(cfg.cell > 0.0)) throw config_error("config: cell must be positive");
    if (!(cfg.budget > 0.0) || cfg.budget > 1.0)
        throw config_error("config: budget must lie in (0, 1]");

    const auto check_profile = [&](const ProfileSpec& p, const std::string& what) {
        validate_profile(p, what);
        const double lo = p.params[p.params.size() - 2];
        const double hi = p.params[p.params.size() - 1];
        if (lo < -1e-12 || hi > cfg.support + 1e-12)
            throw config_error(what + ": profile window must lie inside [0, support]");
    };
    if (scalar) {
        check_profile(cfg.density, "initial.density");
    } else {
        check_profile(cfg.male, "initial.male");
        check_profile(cfg.female, "initial.female");
        check_profile(cfg.couple_x, "initial.couple_x");
        check_profile(cfg.couple_y, "initial.couple_y");
    }

    if (!(cfg.ref_h1 > 0.0)) throw config_error("config: reference h1 must be positive");
    if (scalar) {
        if (!(cfg.ref_dt > 0.0)) throw config_error("config: reference dt must be positive");
        if (!detail::is_multiple(cfg.support, cfg.ref_h1))
            throw config_error("config: reference h1 must partition the initial support");
        if (!detail::is_multiple(cfg.t_end, cfg.ref_dt))
            throw config_error("config: t_end must be a multiple of the reference dt");
    } else {
        if (!(cfg.ref_h2 > 0.0)) throw config_error("config: reference h2 must be positive");
        if (!detail::is_multiple(cfg.ref_h2, cfg.ref_h1))
            throw config_error("config: reference h2 must be a multiple of h1");
        if (!detail::is_multiple(cfg.x_max, cfg.ref_h2))
            throw config_error("config: x_max must be a multiple of reference h2");
        if (!detail::is_multiple(cfg.t_end, cfg.ref_h2))
            throw config_error(
                "config: t_end must be a multiple of the reference step (= h2)");
        const auto even_intervals = [&](double h, const char* what) {
            const long long n = std::llround(cfg.x_max / h);
            if (n % 2 != 0)
                throw config_error(std::string("config: ") + what +
                                   " must split x_max into an even interval count");
        };
        even_intervals(cfg.ref_h1, "reference h1");
        even_intervals(cfg.ref_h2, "reference h2");
        if (!detail::is_multiple(cfg.x_max, cfg.cell))
            throw config_error("config: x_max must be a multiple of the couple cell");
    }
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    const auto fail = [&](const std::string& msg) -> void {
        throw config_error("config line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = line.substr(1, line.size() - 2);
            detail::trim(section);
            if (section != "experiment" && section != "initial" &&
                section != "integrator" && section != "metric" && section != "reference")
                fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        detail::trim(key);
        detail::trim(value);
        if (section.empty()) fail("key before any section header");
        if (key.empty()) fail("empty key");
        const std::string qual = section + "." + key;
        if (!seen.insert(qual).second) fail("duplicate key " + qual);

        if (qual == "experiment.model") cfg.model = value;
        else if (qual == "experiment.preset") cfg.preset = value;
        else if (qual == "experiment.t_end") cfg.t_end = parse_number(value, qual);
        else if (qual == "experiment.support") cfg.support = parse_number(value, qual);
        else if (qual == "experiment.x_max") cfg.x_max = parse_number(value, qual);
        else if (qual == "experiment.widths") {
            cfg.widths.clear();
            for (const auto& tok : detail::split_tokens(value))
                cfg.widths.push_back(parse_number(tok, qual));
        } else if (qual == "experiment.output") cfg.output = value;
        else if (qual == "initial.male") cfg.male = parse_profile(value, qual);
        else if (qual == "initial.female") cfg.female = parse_profile(value, qual);
        else if (qual == "initial.couple_x") cfg.couple_x = parse_profile(value, qual);
        else if (qual == "initial.couple_y") cfg.couple_y = parse_profile(value, qual);
        else if (qual == "initial.density") cfg.density = parse_profile(value, qual);
        else if (qual == "integrator.dt_scale") cfg.dt_scale = parse_number(value, qual);
        else if (qual == "integrator.substeps") cfg.substeps = parse_int(value, qual);
        else if (qual == "metric.resolution") cfg.metric_resolution = parse_int(value, qual);
        else if (qual == "metric.lp_tolerance") cfg.lp_tolerance = parse_number(value, qual);
        else if (qual == "metric.neighbours") cfg.neighbours = parse_int(value, qual);
        else if (qual == "metric.cell") cfg.cell = parse_number(value, qual);
        else if (qual == "reference.h1") cfg.ref_h1 = parse_number(value, qual);
        else if (qual == "reference.h2") cfg.ref_h2 = parse_number(value, qual);
        else if (qual == "reference.dt") cfg.ref_dt = parse_number(value, qual);
        else if (qual == "reference.autonomous") {
            const int v = parse_int(value, qual);
            if (v != 0 && v != 1) fail("autonomous must be 0 or 1");
            cfg.autonomous = v == 1;
        } else if (qual == "reference.budget") cfg.budget = parse_number(value, qual);
        else fail("unknown key " + qual);
    }
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// Canonical form: fixed section and key order, shortest number spellings.
// parse_config(serialize_config(cfg)) reproduces cfg exactly.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    const bool scalar = cfg.model == "scalar";
    std::string s;
    s += "[experiment]\n";
    s += "model = " + cfg.model + "\n";
    s += "preset = " + cfg.preset + "\n";
    s += "t_end = " + format_number(cfg.t_end) + "\n";
    s += "support = " + format_number(cfg.support) + "\n";
    s += "x_max = " + format_number(cfg.x_max) + "\n";
    s += "widths =";
    for (double w : cfg.widths) s += " " + format_number(w);
    s += "\n";
    s += "output = " + cfg.output + "\n";
    s += "\n[initial]\n";
    if (scalar) {
        s += "density = " + format_profile(cfg.density) + "\n";
    } else {
        s += "male = " + format_profile(cfg.male) + "\n";
        s += "female = " + format_profile(cfg.female) + "\n";
        s += "couple_x = " + format_profile(cfg.couple_x) + "\n";
        s += "couple_y = " + format_profile(cfg.couple_y) + "\n";
    }
    s += "\n[integrator]\n";
    s += "dt_scale = " + format_number(cfg.dt_scale) + "\n";
    s += "substeps = " + std::to_string(cfg.substeps) + "\n";
    s += "\n[metric]\n";
    s += "resolution = " + std::to_string(cfg.metric_resolution) + "\n";
    s += "lp_tolerance = " + format_number(cfg.lp_tolerance) + "\n";
    s += "neighbours = " + std::to_string(cfg.neighbours) + "\n";
    s += "cell = " + format_number(cfg.cell) + "\n";
    s += "\n[reference]\n";
    s += "h1 = " + format_number(cfg.ref_h1) + "\n";
    if (scalar) {
        s += "dt = " + format_number(cfg.ref_dt) + "\n";
    } else {
        s += "h2 = " + format_number(cfg.ref_h2) + "\n";
        s += "autonomous = " + std::string(cfg.autonomous ? "1" : "0") + "\n";
    }
    s += "budget = " + format_number(cfg.budget) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Order fitting: least-squares slope of log(error) against log(width).

inline double fit_order(const std::vector<double>& errors,
                        const std::vector<double>& widths) {
    if (errors.size() != widths.size())
        throw input_error("fit_order: errors and widths must have the same length");
    if (errors.size() < 3) throw input_error("fit_order: need at least three points");
    const std::size_t n = errors.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(errors[k] > 0.0)) throw input_error("fit_order: errors must be positive");
        if (!(widths[k] > 0.0)) throw input_error("fit_order: widths must be positive");
        lx[k] = std::log(widths[k]);
        ly[k] = std::log(errors[k]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    if (!(sxx > 0.0)) throw input_error("fit_order: widths must not coincide");
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Sweep results.

struct WidthResult {
    double width = 0.0;
    double error = 0.0;  // composite for two-sex, plain distance for scalar
    double male_error = 0.0;
    double female_error = 0.0;
    double couple_error = 0.0;
    double bracket_width = 0.0;
    Diagnostics diag;
    PopulationState final_state;  // two-sex snapshot source
    ScalarState final_scalar;     // scalar snapshot source
};

struct ConvergenceReport {
    std::string model;
    std::vector<WidthResult> results;
    double order = 0.0;
    double reference_error = 0.0;
    double reference_allowance = 0.0;
    bool valid = false;
};

namespace detail {

inline std::vector<double> uniform_mesh(double end, double width) {
    const long long cells = std::llround(end / width);
    std::vector<double> mesh(static_cast<std::size_t>(cells) + 1);
    for (long long k = 0; k <= cells; ++k)
        mesh[static_cast<std::size_t>(k)] = static_cast<double>(k) * width;
    mesh.back() = end;
    return mesh;
}

template <class RunWidth>
std::vector<WidthResult> sweep(const std::vector<double>& widths, int threads,
                               RunWidth&& run_width) {
    std::vector<WidthResult> results(widths.size());
    if (threads <= 1) {
        for (std::size_t k = 0; k < widths.size(); ++k) results[k] = run_width(widths[k]);
        return results;
    }
    for (std::size_t base = 0; base < widths.size();
         base += static_cast<std::size_t>(threads)) {
        const std::size_t stop =
            std::min(widths.size(), base + static_cast<std::size_t>(threads));
        std::vector<std::future<WidthResult>> batch;
        batch.reserve(stop - base);
        for (std::size_t k = base; k < stop; ++k)
            batch.push_back(std::async(std::launch::async, run_width, widths[k]));
        for (std::size_t k = base; k < stop; ++k) results[k] = batch[k - base].get();
    }
    return results;
}

struct TwoSexReferenceMeasures {
    AtomicMeasure1D male, female;
    AtomicMeasure2D couple;
};

inline TwoSexReferenceMeasures grid_measures(const DensityGrid& g,
                                             const std::vector<double>& edges1,
                                             const std::vector<double>& edges_c) {
    TwoSexReferenceMeasures m;
    m.male = density_to_measure(g.ax1, g.um, edges1);
    m.female = density_to_measure(g.ax1, g.uf, edges1);
    m.couple = density_to_measure_2d(g.ax2, g.uc, edges_c, edges_c);
    return m;
}

inline ConvergenceReport run_two_sex(const ExperimentConfig& cfg, int threads) {
    const Coefficients co = preset(cfg.preset);
    const auto mfn = profile_function(cfg.male);
    const auto ffn = profile_function(cfg.female);
    const auto cxf = profile_function(cfg.couple_x);
    const auto cyf = profile_function(cfg.couple_y);
    const auto cfn = [&](double x, double y) { return cxf(x) * cyf(y); };

    ReferenceConfig rc;
    rc.x_max = cfg.x_max;
    rc.h1 = cfg.ref_h1;
    rc.h2 = cfg.ref_h2;
    rc.dt = cfg.ref_h2;
    rc.t_end = cfg.t_end;
    rc.autonomous = cfg.autonomous;
    const auto base = solve_two_sex(mfn, ffn, cfn, co, rc);
    auto rch = rc;
    rch.h1 *= 0.5;
    rch.h2 *= 0.5;
    rch.dt *= 0.5;
    const auto half = solve_two_sex(mfn, ffn, cfn, co, rch);

    // Singles are compared on the reference's own fine cells; couples on the
    // fixed coarse grain that also caps the sweep-side atom counts.
    std::vector<double> edges1(static_cast<std::size_t>(base.grid.ax1.n));
    for (int k = 0; k < base.grid.ax1.n; ++k)
        edges1[static_cast<std::size_t>(k)] = base.grid.ax1.at(k);
    const auto edges_c = uniform_mesh(cfg.x_max, cfg.cell);

    const auto ref = grid_measures(base.grid, edges1, edges_c);
    const auto ref_half = grid_measures(half.grid, edges1, edges_c);
    const MetricConfig mc = metric_config(cfg);
    const double ref_err = rho_flat_1d(ref.male, ref_half.male, mc) +
                           rho_flat_1d(ref.female, ref_half.female, mc) +
                           rho_flat_2d(ref.couple, ref_half.couple, mc).value();

    const auto run_width = [&](double w) {
        WidthResult r;
        r.width = w;
        const auto mesh = uniform_mesh(cfg.support, w);
        const auto state0 = init_state(mfn, ffn, cfn, mesh);
        IntegratorConfig ic;
        ic.dt_internalization = cfg.dt_scale * w;
        ic.substeps = cfg.substeps;
        ic.t_end = cfg.t_end;
        ic.cone_constant = cfg.x_max;
        auto snaps = run(state0, co, ic, &r.diag);
        r.final_state = std::move(snaps.back());
        const auto [mm, mf, mcpl] = extract_measures(r.final_state);
        r.male_error = rho_flat_1d(mm, ref.male, mc);
        r.female_error = rho_flat_1d(mf, ref.female, mc);
        const auto d2 = rho_flat_2d(aggregate_measure_2d(mcpl, cfg.cell), ref.couple, mc);
        r.couple_error = d2.value();
        r.bracket_width = d2.width();
        r.error = r.male_error + r.female_error + r.couple_error;
        return r;
    };

    ConvergenceReport rep;
    rep.model = cfg.model;
    rep.results = sweep(cfg.widths, threads, run_width);
    std::vector<double> errors;
    errors.reserve(rep.results.size());
    for (const auto& r : rep.results) errors.push_back(r.error);
    rep.order = fit_order(errors, cfg.widths);
    rep.reference_error = ref_err;
    rep.reference_allowance = cfg.budget * *std::min_element(errors.begin(), errors.end());
    rep.valid = ref_err <= rep.reference_allowance;
    return rep;
}

inline ConvergenceReport run_scalar(const ExperimentConfig& cfg, int threads) {
    const ScalarCoefficients co = scalar_preset(cfg.preset);
    const auto u0 = profile_function(cfg.density);

    ScalarReferenceConfig rc{cfg.ref_dt, cfg.t_end};
    const auto base = solve_scalar(u0, uniform_mesh(cfg.support, cfg.ref_h1), co, rc);
    ScalarReferenceConfig rch{0.5 * cfg.ref_dt, cfg.t_end};
    const auto half = solve_scalar(u0, uniform_mesh(cfg.support, 0.5 * cfg.ref_h1), co, rch);

    const MetricConfig mc = metric_config(cfg);
    const double ref_err = rho_flat_1d(aggregate_measure_1d(base.atoms, cfg.ref_h1),
                                       aggregate_measure_1d(half.atoms, cfg.ref_h1), mc);

    const auto run_width = [&](double w) {
        WidthResult r;
        r.width = w;
        const auto state0 = scalar_init_state(u0, uniform_mesh(cfg.support, w));
        IntegratorConfig ic;
        ic.dt_internalization = cfg.dt_scale * w;
        ic.substeps = cfg.substeps;
        ic.t_end = cfg.t_end;
        ic.cone_constant = cfg.x_max;
        auto snaps = scalar_run(state0, co, ic, &r.diag);
        r.final_scalar = std::move(snaps.back());
        r.error = rho_flat_1d(scalar_extract_measure(r.final_scalar), base.atoms, mc);
        return r;
    };

    ConvergenceReport rep;
    rep.model = cfg.model;
    rep.results = sweep(cfg.widths, threads, run_width);
    std::vector<double> errors;
    errors.reserve(rep.results.size());
    for (const auto& r : rep.results) errors.push_back(r.error);
    rep.order = fit_order(errors, cfg.widths);
    rep.reference_error = ref_err;
    rep.reference_allowance = cfg.budget * *std::min_element(errors.begin(), errors.end());
    rep.valid = ref_err <= rep.reference_allowance;
    return rep;
}

} // namespace detail

inline ConvergenceReport run_experiment(const ExperimentConfig& cfg, int threads = 1) {
    validate_config(cfg);
    if (threads < 1) throw config_error("run_experiment: threads must be at least 1");
    return cfg.model == "scalar" ? detail::run_scalar(cfg, threads)
                                 : detail::run_two_sex(cfg, threads);
}

// ---------------------------------------------------------------------------
// Report and log rendering. Identical configs produce byte-identical text.

inline std::string format_report(const ConvergenceReport& rep,
                                 const ExperimentConfig& cfg) {
    std::string s = "# ebt-report v1\n";
    s += "# model=" + cfg.model + " preset=" + cfg.preset +
         " t_end=" + format_number(cfg.t_end) + "\n";
    s += "width,composite_error,male_error,female_error,couple_error,"
         "couple_bracket_width,clamp_events,minor_clamps,denominator_floors,"
         "cone_violations,negative_creation_cells\n";
    for (const auto& r : rep.results) {
        s += format_number(r.width) + "," + format_number(r.error) + "," +
             format_number(r.male_error) + "," + format_number(r.female_error) + "," +
             format_number(r.couple_error) + "," + format_number(r.bracket_width) + "," +
             std::to_string(r.diag.clamp_events) + "," +
             std::to_string(r.diag.minor_clamps) + "," +
             std::to_string(r.diag.denominator_floors) + "," +
             std::to_string(r.diag.cone_violations) + "," +
             std::to_string(r.diag.negative_N_cells) + "\n";
    }
    s += "order," + format_number(rep.order) + "\n";
    s += "reference_error," + format_number(rep.reference_error) + "\n";
    s += "reference_allowance," + format_number(rep.reference_allowance) + "\n";
    s += std::string("valid,") + (rep.valid ? "1" : "0") + "\n";
    return s;
}

inline std::string format_diagnostics(const ConvergenceReport& rep,
                                      const ExperimentConfig& cfg) {
    std::string s = "reference error=" + format_number(rep.reference_error) +
                    " allowance=" + format_number(rep.reference_allowance) +
                    " valid=" + (rep.valid ? "1" : "0") + "\n";
    for (const auto& r : rep.results) {
        s += "width=" + format_number(r.width) +
             " clamp_events=" + std::to_string(r.diag.clamp_events) +
             " minor_clamps=" + std::to_string(r.diag.minor_clamps) +
             " max_undershoot=" + format_number(r.diag.max_undershoot) +
             " denominator_floors=" + std::to_string(r.diag.denominator_floors) +
             " cone_violations=" + std::to_string(r.diag.cone_violations) +
             " negative_creation_cells=" + std::to_string(r.diag.negative_N_cells) + "\n";
        for (const auto& ev : r.diag.events)
            s += "event width=" + format_number(r.width) + " " + ev + "\n";
    }
    (void)cfg;
    return s;
}

inline void write_outputs(const ConvergenceReport& rep, const ExperimentConfig& cfg,
                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    fs::create_directories(root / "snapshots");

    const auto write_text = [](const fs::path& path, const std::string& text) {
        std::ofstream os(path);
        if (!os) throw input_error("cannot write " + path.string());
        os << text;
    };
    write_text(root / "report.csv", format_report(rep, cfg));
    write_text(root / "diagnostics.log", format_diagnostics(rep, cfg));

    const auto open_csv = [](const fs::path& path) {
        std::ofstream os(path);
        if (!os) throw input_error("cannot write " + path.string());
        os.imbue(std::locale::classic());
        os << std::setprecision(17);
        return os;
    };
    for (const auto& r : rep.results) {
        const std::string stem = "width-" + format_number(r.width);
        if (rep.model == "scalar") {
            auto os = open_csv(root / "snapshots" / (stem + "-density.csv"));
            write_sex_csv(os, r.final_scalar.pop);
        } else {
            {
                auto os = open_csv(root / "snapshots" / (stem + "-male.csv"));
                write_sex_csv(os, r.final_state.male);
            }
            {
                auto os = open_csv(root / "snapshots" / (stem + "-female.csv"));
                write_sex_csv(os, r.final_state.female);
            }
            auto os = open_csv(root / "snapshots" / (stem + "-couples.csv"));
            write_couples_csv(os, r.final_state);
        }
    }
}

} // namespace ebt
