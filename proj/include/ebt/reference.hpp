#pragma once

// High-resolution reference solutions for the convergence studies.
//
// Two-sex system: Eulerian grids with exact unit-speed shifting. Singles
// live on a fine axis (spacing h1), couples on a square grid (spacing h2)
// whose step equals the time step, so transport is an index shift and the
// only discretization errors are the trapezoid decay factor, the
// predictor-corrector creation quadrature, and the quadrature of the
// nonlocal terms: all second order in the step. The marriage source is
// evaluated on the grid through the same availability-and-denominator
// structure the cohort scheme uses.
//
// One-sex renewal model: characteristics carry the tube amplitude
// A = u * dx/dxi, which obeys dA/dt = -c A regardless of the growth field b;
// the age distribution is recovered as one atom per characteristic segment.
// A new characteristic is released at the inflow age each step with
// amplitude equal to the current birth integral.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cohorts.hpp"
#include "grids.hpp"
#include "model.hpp"
#include "scalar_ebt.hpp"

namespace ebt {

struct ReferenceConfig {
    double x_max = 0.0;  // domain [0, x_max] on every age axis
    double h1 = 0.0;     // singles grid spacing
    double h2 = 0.0;     // couple grid spacing; must equal dt
    double dt = 0.0;
    double t_end = 0.0;
    // With autonomous set, c and beta are treated as time independent and
    // their grids are sampled once instead of every step.
    bool autonomous = false;
};

namespace detail {

inline int exact_ratio(double num, double den, const char* what) {
    const double r = num / den;
    const int k = static_cast<int>(std::lround(r));
    if (k < 1 || std::abs(r - k) > 1e-9 * std::max(1.0, std::abs(r)))
        throw config_error(std::string("reference: ") + what +
                           " must be an exact positive multiple");
    return k;
}

// Composite Simpson node weights over the full axis (odd node count).
inline std::vector<double> simpson_axis_weights(const Axis& ax) {
    std::vector<double> w(static_cast<std::size_t>(ax.n), 0.0);
    const double third = ax.h / 3.0;
    w.front() = third;
    w.back() = third;
    for (int k = 1; k + 1 < ax.n; ++k) w[static_cast<std::size_t>(k)] = (k % 2 ? 4.0 : 2.0) * third;
    return w;
}

} // namespace detail

// Marriage source and the associated scalars for one time level.
struct CreationGrid {
    std::vector<double> T;  // couple creation density, row-major on ax2 x ax2
    double D = 0.0;         // floored denominator
    double B_m = 0.0;       // male birth integral
    double B_f = 0.0;       // female birth integral
    bool floored = false;
    long long negative_cells = 0;
};

class TwoSexReference {
  public:
    TwoSexReference(const std::function<double(double)>& u0m,
                    const std::function<double(double)>& u0f,
                    const std::function<double(double, double)>& u0c,
                    const Coefficients& co, const ReferenceConfig& cfg)
        : co_(co), cfg_(cfg) {
        validate();
        const int n1 = detail::exact_ratio(cfg.x_max, cfg.h1, "x_max over h1") + 1;
        const int n2 = detail::exact_ratio(cfg.x_max, cfg.h2, "x_max over h2") + 1;
        if (n1 % 2 == 0 || n2 % 2 == 0)
            throw config_error("reference: quadrature needs an even interval count per axis");
        r_ = detail::exact_ratio(cfg.h2, cfg.h1, "h2 over h1");
        steps_ = detail::exact_ratio(cfg.t_end, cfg.dt, "t_end over dt");

        state_.t = 0.0;
        state_.ax1 = {0.0, cfg.h1, n1};
        state_.ax2 = {0.0, cfg.h2, n2};
        state_.um.resize(static_cast<std::size_t>(n1));
        state_.uf.resize(static_cast<std::size_t>(n1));
        state_.uc.resize(static_cast<std::size_t>(n2) * n2);
        for (int k = 0; k < n1; ++k) {
            const double x = state_.ax1.at(k);
            state_.um[static_cast<std::size_t>(k)] = sample(u0m(x), "initial male density");
            state_.uf[static_cast<std::size_t>(k)] = sample(u0f(x), "initial female density");
        }
        for (int i = 0; i < n2; ++i)
            for (int j = 0; j < n2; ++j)
                state_.uc[idx2(i, j)] =
                    sample(u0c(state_.ax2.at(i), state_.ax2.at(j)), "initial couple density");

        w1_ = detail::simpson_axis_weights(state_.ax1);
        w2_ = detail::simpson_axis_weights(state_.ax2);
        h1v_.resize(static_cast<std::size_t>(n1));
        g1v_.resize(static_cast<std::size_t>(n1));
        for (int k = 0; k < n1; ++k) {
            h1v_[static_cast<std::size_t>(k)] = detail::checked(co.h(state_.ax1.at(k)), "h");
            g1v_[static_cast<std::size_t>(k)] = detail::checked(co.g(state_.ax1.at(k)), "g");
        }
        thg_.resize(state_.uc.size());
        for (int i = 0; i < n2; ++i) {
            const double x = state_.ax2.at(i);
            const double hx = detail::checked(co.h(x), "h");
            for (int j = 0; j < n2; ++j) {
                const double y = state_.ax2.at(j);
                thg_[idx2(i, j)] = detail::checked(co.theta(x, y), "theta") * hx *
                                   detail::checked(co.g(y), "g");
            }
        }
        if (cfg.autonomous) {
            decay_m_ = singles_decay(co.c_m, 0.0);
            decay_f_ = singles_decay(co.c_f, 0.0);
            decay_c_ = couple_decay(0.0);
            beta_m_grid_ = beta_grid(co.beta_m, 0.0);
            beta_f_grid_ = beta_grid(co.beta_f, 0.0);
        }

        // Step scratch, sized once; advance() rewrites every cell it reads.
        row_int_.assign(static_cast<std::size_t>(n2), 0.0);
        col_int_.assign(static_cast<std::size_t>(n2), 0.0);
        avail_m_.assign(static_cast<std::size_t>(n2), 0.0);
        avail_f_.assign(static_cast<std::size_t>(n2), 0.0);
        buf_ucp_.assign(state_.uc.size(), 0.0);
        buf_ucn_.assign(state_.uc.size(), 0.0);
        buf_umn_.assign(state_.um.size(), 0.0);
        buf_ufn_.assign(state_.uf.size(), 0.0);
        cg_now_.T.assign(state_.uc.size(), 0.0);
        cg_pred_.T.assign(state_.uc.size(), 0.0);
    }

    // Marriage source, denominator, and birth integrals for given fields.
    CreationGrid creation(const std::vector<double>& um, const std::vector<double>& uf,
                          const std::vector<double>& uc, double t) const {
        CreationGrid out;
        creation_into(um, uf, uc, t, out);
        return out;
    }

    // Same computation writing into a caller-owned grid, so the stepping loop
    // does not allocate. Every cell of out.T is overwritten.
    void creation_into(const std::vector<double>& um, const std::vector<double>& uf,
                       const std::vector<double>& uc, double t, CreationGrid& out) const {
        const int n1 = state_.ax1.n, n2 = state_.ax2.n;
        if (out.T.size() != uc.size()) out.T.resize(uc.size());
        out.D = 0.0;
        out.B_m = 0.0;
        out.B_f = 0.0;
        out.floored = false;
        out.negative_cells = 0;

        std::fill(col_int_.begin(), col_int_.end(), 0.0);
        for (int i = 0; i < n2; ++i) {
            const double* urow = uc.data() + idx2(i, 0);
            double acc = 0.0;
            for (int j = 0; j < n2; ++j) {
                acc += w2_[static_cast<std::size_t>(j)] * urow[j];
                col_int_[static_cast<std::size_t>(j)] +=
                    w2_[static_cast<std::size_t>(i)] * urow[j];
            }
            row_int_[static_cast<std::size_t>(i)] = acc;
        }

        double ihum = 0.0, iguf = 0.0;
        for (int k = 0; k < n1; ++k) {
            ihum += w1_[static_cast<std::size_t>(k)] * h1v_[static_cast<std::size_t>(k)] *
                    um[static_cast<std::size_t>(k)];
            iguf += w1_[static_cast<std::size_t>(k)] * g1v_[static_cast<std::size_t>(k)] *
                    uf[static_cast<std::size_t>(k)];
        }
        double ihuc = 0.0, iguc = 0.0;
        for (int i = 0; i < n2; ++i)
            ihuc += w2_[static_cast<std::size_t>(i)] * h1v_[static_cast<std::size_t>(i) * r_] *
                    row_int_[static_cast<std::size_t>(i)];
        for (int j = 0; j < n2; ++j)
            iguc += w2_[static_cast<std::size_t>(j)] * g1v_[static_cast<std::size_t>(j) * r_] *
                    col_int_[static_cast<std::size_t>(j)];

        out.D = co_.gamma + (ihum - ihuc) + (iguf - iguc);
        if (out.D < 0.5 * co_.gamma) {
            out.D = 0.5 * co_.gamma;
            out.floored = true;
        }

        for (int i = 0; i < n2; ++i)
            avail_m_[static_cast<std::size_t>(i)] =
                um[static_cast<std::size_t>(i) * r_] - row_int_[static_cast<std::size_t>(i)];
        for (int j = 0; j < n2; ++j)
            avail_f_[static_cast<std::size_t>(j)] =
                uf[static_cast<std::size_t>(j) * r_] - col_int_[static_cast<std::size_t>(j)];

        const double inv_d = 1.0 / out.D;
        for (int i = 0; i < n2; ++i) {
            const double mi = avail_m_[static_cast<std::size_t>(i)] * inv_d;
            const double* trow = thg_.data() + idx2(i, 0);
            double* orow = out.T.data() + idx2(i, 0);
            for (int j = 0; j < n2; ++j) {
                const double v = trow[j] * mi * avail_f_[static_cast<std::size_t>(j)];
                orow[j] = v;
                out.negative_cells += v < 0.0;
            }
        }

        const std::vector<double>& bm = cfg_.autonomous ? beta_m_grid_ : beta_m_scratch(t);
        const std::vector<double>& bf = cfg_.autonomous ? beta_f_grid_ : beta_f_scratch(t);
        double accm = 0.0, accf = 0.0;
        for (int i = 0; i < n2; ++i) {
            const double* urow = uc.data() + idx2(i, 0);
            const double* bmr = bm.data() + idx2(i, 0);
            const double* bfr = bf.data() + idx2(i, 0);
            double sm = 0.0, sf = 0.0;
            for (int j = 0; j < n2; ++j) {
                const double wu = w2_[static_cast<std::size_t>(j)] * urow[j];
                sm += bmr[j] * wu;
                sf += bfr[j] * wu;
            }
            accm += w2_[static_cast<std::size_t>(i)] * sm;
            accf += w2_[static_cast<std::size_t>(i)] * sf;
        }
        out.B_m = accm;
        out.B_f = accf;
    }

    void advance() {
        const int n1 = state_.ax1.n, n2 = state_.ax2.n;
        const double t = state_.t, dt = cfg_.dt;

        creation_into(state_.um, state_.uf, state_.uc, t, cg_now_);
        const CreationGrid& now = cg_now_;
        floors_ += now.floored;
        negative_cells_ += now.negative_cells;

        // Couple predictor along the diagonal characteristics. The entering
        // row and column stay zero; only the interior is rewritten.
        const std::vector<double>& dc = cfg_.autonomous ? decay_c_ : couple_decay(t);
        std::vector<double>& ucp = buf_ucp_;
        zero_couple_rim(ucp);
        for (int i = 1; i < n2; ++i) {
            const double* src = state_.uc.data() + idx2(i - 1, 0);
            const double* tsrc = now.T.data() + idx2(i - 1, 0);
            const double* drow = dc.data() + idx2(i, 0);
            double* dst = ucp.data() + idx2(i, 0);
            for (int j = 1; j < n2; ++j)
                dst[j] = (src[j - 1] + dt * tsrc[j - 1]) * drow[j];
        }

        // Singles shift with trapezoid decay; entering nodes carry the birth
        // integral interpolated to their birth time, decayed over their age.
        // The entering slots must read as empty while the predictor runs.
        std::vector<double>& umn = buf_umn_;
        std::vector<double>& ufn = buf_ufn_;
        for (int k = 0; k < r_; ++k) {
            umn[static_cast<std::size_t>(k)] = 0.0;
            ufn[static_cast<std::size_t>(k)] = 0.0;
        }
        const std::vector<double>& dm = cfg_.autonomous ? decay_m_ : singles_decay(co_.c_m, t);
        const std::vector<double>& df = cfg_.autonomous ? decay_f_ : singles_decay(co_.c_f, t);
        for (int k = r_; k < n1; ++k) {
            umn[static_cast<std::size_t>(k)] =
                state_.um[static_cast<std::size_t>(k - r_)] * dm[static_cast<std::size_t>(k)];
            ufn[static_cast<std::size_t>(k)] =
                state_.uf[static_cast<std::size_t>(k - r_)] * df[static_cast<std::size_t>(k)];
        }
        creation_into(umn, ufn, ucp, t + dt, cg_pred_);
        const CreationGrid& pred = cg_pred_;
        for (int k = 0; k < r_; ++k) {
            const double age = state_.ax1.at(k);
            const double tb = t + dt - age;
            const double lever = (tb - t) / dt;
            const double bm = now.B_m + (pred.B_m - now.B_m) * lever;
            const double bf = now.B_f + (pred.B_f - now.B_f) * lever;
            const double em =
                std::exp(-age * detail::checked(co_.c_m(tb + 0.5 * age, 0.5 * age), "c_m"));
            const double ef =
                std::exp(-age * detail::checked(co_.c_f(tb + 0.5 * age, 0.5 * age), "c_f"));
            umn[static_cast<std::size_t>(k)] = bm * em;
            ufn[static_cast<std::size_t>(k)] = bf * ef;
        }

        // Couple corrector: trapezoid of the creation term along the path.
        std::vector<double>& ucn = buf_ucn_;
        zero_couple_rim(ucn);
        for (int i = 1; i < n2; ++i) {
            const double* src = state_.uc.data() + idx2(i - 1, 0);
            const double* t0 = now.T.data() + idx2(i - 1, 0);
            const double* t1 = pred.T.data() + idx2(i, 0);
            const double* drow = dc.data() + idx2(i, 0);
            double* dst = ucn.data() + idx2(i, 0);
            for (int j = 1; j < n2; ++j)
                dst[j] = (src[j - 1] + 0.5 * dt * t0[j - 1]) * drow[j] + 0.5 * dt * t1[j];
        }

        floors_ += pred.floored;
        negative_cells_ += pred.negative_cells;
        state_.um.swap(umn);
        state_.uf.swap(ufn);
        state_.uc.swap(ucn);
        ++step_index_;
        state_.t = cfg_.dt * step_index_;
    }

    void run() {
        while (step_index_ < steps_) advance();
        for (double v : state_.um)
            if (!std::isfinite(v)) throw blowup_error("reference: male density is not finite");
        for (double v : state_.uf)
            if (!std::isfinite(v)) throw blowup_error("reference: female density is not finite");
        for (double v : state_.uc)
            if (!std::isfinite(v)) throw blowup_error("reference: couple density is not finite");
    }

    const DensityGrid& state() const { return state_; }
    long long denominator_floors() const { return floors_; }
    long long negative_creation_cells() const { return negative_cells_; }

  private:
    std::size_t idx2(int i, int j) const {
        return static_cast<std::size_t>(i) * state_.ax2.n + static_cast<std::size_t>(j);
    }

    static double sample(double v, const char* what) {
        if (!std::isfinite(v)) throw input_error(std::string(what) + " is not finite");
        if (v < -1e-12) throw input_error(std::string(what) + " is negative");
        return std::max(v, 0.0);
    }

    void validate() const {
        if (!(cfg_.x_max > 0.0) || !(cfg_.h1 > 0.0) || !(cfg_.h2 > 0.0) || !(cfg_.dt > 0.0))
            throw config_error("reference: domain, spacings, and step must be positive");
        if (!(cfg_.t_end > 0.0)) throw config_error("reference: t_end must be positive");
        if (std::abs(cfg_.dt - cfg_.h2) > 1e-12 * std::max(1.0, cfg_.h2))
            throw config_error("reference: couple grid spacing must equal the time step");
        if (cfg_.h1 > cfg_.h2 + 1e-15)
            throw config_error("reference: singles grid must be at least as fine as couples");
    }

    // exp(-dt/2 (c(t, x-dt) + c(t+dt, x))) per fine node; entering nodes unused.
    std::vector<double> singles_decay(const Rate1& c, double t) const {
        const int n1 = state_.ax1.n;
        std::vector<double> d(static_cast<std::size_t>(n1), 0.0);
        const double dt = cfg_.dt;
        for (int k = r_; k < n1; ++k) {
            const double x = state_.ax1.at(k);
            const double tr = detail::checked(c(t, x - dt), "c") +
                              detail::checked(c(t + dt, x), "c");
            d[static_cast<std::size_t>(k)] = std::exp(-0.5 * dt * tr);
        }
        return d;
    }

    std::vector<double> couple_decay(double t) const {
        const int n2 = state_.ax2.n;
        const double dt = cfg_.dt;
        std::vector<double> d(state_.uc.size(), 0.0);
        for (int i = 1; i < n2; ++i) {
            const double x = state_.ax2.at(i);
            for (int j = 1; j < n2; ++j) {
                const double y = state_.ax2.at(j);
                const double tr = detail::checked(co_.c_c(t, x - dt, y - dt), "c_c") +
                                  detail::checked(co_.c_c(t + dt, x, y), "c_c");
                d[idx2(i, j)] = std::exp(-0.5 * dt * tr);
            }
        }
        return d;
    }

    std::vector<double> beta_grid(const Rate2& beta, double t) const {
        const int n2 = state_.ax2.n;
        std::vector<double> b(state_.uc.size(), 0.0);
        for (int i = 0; i < n2; ++i)
            for (int j = 0; j < n2; ++j)
                b[idx2(i, j)] =
                    detail::checked(beta(t, state_.ax2.at(i), state_.ax2.at(j)), "beta");
        return b;
    }

    const std::vector<double>& beta_m_scratch(double t) const {
        beta_m_tmp_ = beta_grid(co_.beta_m, t);
        return beta_m_tmp_;
    }
    const std::vector<double>& beta_f_scratch(double t) const {
        beta_f_tmp_ = beta_grid(co_.beta_f, t);
        return beta_f_tmp_;
    }

    // The swap at the end of advance() recycles state buffers as scratch, so
    // the entering row and column may hold stale values on entry.
    void zero_couple_rim(std::vector<double>& u) const {
        const int n2 = state_.ax2.n;
        std::fill_n(u.begin(), static_cast<std::size_t>(n2), 0.0);
        for (int i = 1; i < n2; ++i) u[idx2(i, 0)] = 0.0;
    }

    Coefficients co_;
    ReferenceConfig cfg_;
    DensityGrid state_;
    int r_ = 1;
    int steps_ = 0;
    int step_index_ = 0;
    long long floors_ = 0;
    long long negative_cells_ = 0;
    std::vector<double> w1_, w2_, h1v_, g1v_, thg_;
    std::vector<double> decay_m_, decay_f_, decay_c_;
    std::vector<double> beta_m_grid_, beta_f_grid_;
    mutable std::vector<double> beta_m_tmp_, beta_f_tmp_;
    std::vector<double> buf_ucp_, buf_ucn_, buf_umn_, buf_ufn_;
    CreationGrid cg_now_, cg_pred_;
    mutable std::vector<double> row_int_, col_int_, avail_m_, avail_f_;
};

struct TwoSexReferenceSolution {
    DensityGrid grid;
    long long denominator_floors = 0;
    long long negative_creation_cells = 0;
};

inline TwoSexReferenceSolution solve_two_sex(const std::function<double(double)>& u0m,
                                             const std::function<double(double)>& u0f,
                                             const std::function<double(double, double)>& u0c,
                                             const Coefficients& co,
                                             const ReferenceConfig& cfg) {
    TwoSexReference engine(u0m, u0f, u0c, co, cfg);
    engine.run();
    return {engine.state(), engine.denominator_floors(), engine.negative_creation_cells()};
}

struct ScalarReferenceConfig {
    double dt = 0.0;
    double t_end = 0.0;
};

struct ScalarReferenceSolution {
    AtomicMeasure1D atoms;       // age distribution at t_end, one atom per segment
    double total_mass = 0.0;     // includes mass below the atom cutoff
    std::size_t initial_nodes = 0;
    std::size_t renewal_nodes = 0;
};

// Characteristics for the one-sex renewal model. Nodes carry (x, A) with
// dx/dt = b and dA/dt = -c A; the renewal family gains one node per step at
// the inflow age with amplitude equal to the birth integral, which matches
// the cohort scheme's inflow bookkeeping.
inline ScalarReferenceSolution solve_scalar(const std::function<double(double)>& u0,
                                            const std::vector<double>& mesh,
                                            const ScalarCoefficients& co,
                                            const ScalarReferenceConfig& cfg) {
    if (!(cfg.dt > 0.0) || !(cfg.t_end > 0.0))
        throw config_error("scalar reference: dt and t_end must be positive");
    const int steps = static_cast<int>(std::lround(cfg.t_end / cfg.dt));
    if (steps < 1 || std::abs(steps * cfg.dt - cfg.t_end) > 1e-12 * std::max(1.0, cfg.t_end))
        throw config_error("scalar reference: t_end must be a multiple of dt");
    if (mesh.size() < 2)
        throw input_error("scalar reference: mesh needs at least two nodes");
    for (std::size_t k = 1; k < mesh.size(); ++k)
        if (!(mesh[k] > mesh[k - 1]))
            throw input_error("scalar reference: mesh must be strictly increasing");
    if (mesh.front() < co.x_b - 1e-12)
        throw input_error("scalar reference: mesh starts below the inflow age");

    std::vector<double> xi(mesh), ai(mesh.size());  // initial family
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const double v = u0(mesh[k]);
        if (!std::isfinite(v)) throw input_error("scalar reference: initial density not finite");
        if (v < -1e-12) throw input_error("scalar reference: initial density negative");
        ai[k] = std::max(v, 0.0);
    }
    std::vector<double> xr, ar;  // renewal family, one node per spawn time
    xr.reserve(static_cast<std::size_t>(steps) + 1);
    ar.reserve(static_cast<std::size_t>(steps) + 1);

    double t = 0.0;
    // Trapezoid over both families in their own parameters.
    const auto births_now = [&](double tt) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < xi.size(); ++k) {
            const double f0 = detail::checked(co.beta(tt, xi[k]), "beta") * ai[k];
            const double f1 = detail::checked(co.beta(tt, xi[k + 1]), "beta") * ai[k + 1];
            acc += 0.5 * (mesh[k + 1] - mesh[k]) * (f0 + f1);
        }
        for (std::size_t k = 0; k + 1 < xr.size(); ++k) {
            const double f0 = detail::checked(co.beta(tt, xr[k]), "beta") * ar[k];
            const double f1 = detail::checked(co.beta(tt, xr[k + 1]), "beta") * ar[k + 1];
            acc += 0.5 * cfg.dt * (f0 + f1);
        }
        return acc;
    };

    // Spawning extends the birth-time trapezoid by the panel ending at the
    // current time. The new node sits inside its own birth integral, so the
    // closing half-panel is folded in implicitly; the previous family tail
    // gets promoted from endpoint weight to interior weight.
    const auto spawn = [&](double tt) {
        double amp = births_now(tt);
        if (!xr.empty()) {
            amp += 0.5 * cfg.dt * detail::checked(co.beta(tt, xr.back()), "beta") * ar.back();
            const double self = 0.5 * cfg.dt * detail::checked(co.beta(tt, co.x_b), "beta");
            if (self >= 0.5)
                throw step_size_error("scalar reference: dt too large for the fertility scale");
            amp /= 1.0 - self;
        }
        xr.push_back(co.x_b);
        ar.push_back(amp);
    };

    const auto rk4_node = [&](double& x, double& a, double t0, double dt) {
        const auto fx = [&](double s, double xx) { return detail::checked(co.b(s, xx), "b"); };
        const auto fa = [&](double s, double xx, double aa) {
            return -detail::checked(co.c(s, xx), "c") * aa;
        };
        const double k1x = fx(t0, x), k1a = fa(t0, x, a);
        const double k2x = fx(t0 + 0.5 * dt, x + 0.5 * dt * k1x);
        const double k2a = fa(t0 + 0.5 * dt, x + 0.5 * dt * k1x, a + 0.5 * dt * k1a);
        const double k3x = fx(t0 + 0.5 * dt, x + 0.5 * dt * k2x);
        const double k3a = fa(t0 + 0.5 * dt, x + 0.5 * dt * k2x, a + 0.5 * dt * k2a);
        const double k4x = fx(t0 + dt, x + dt * k3x);
        const double k4a = fa(t0 + dt, x + dt * k3x, a + dt * k3a);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    };

    for (int n = 0; n < steps; ++n) {
        spawn(t);
        for (std::size_t k = 0; k < xi.size(); ++k) rk4_node(xi[k], ai[k], t, cfg.dt);
        for (std::size_t k = 0; k < xr.size(); ++k) rk4_node(xr[k], ar[k], t, cfg.dt);
        t += cfg.dt;
    }
    spawn(t);

    ScalarReferenceSolution out;
    out.initial_nodes = xi.size();
    out.renewal_nodes = xr.size();
    std::vector<double> masses;
    const auto emit = [&](double x0, double a0, double x1, double a1, double width) {
        const double mass = 0.5 * width * (a0 + a1);
        if (!std::isfinite(mass))
            throw blowup_error("scalar reference: segment mass is not finite");
        masses.push_back(mass);
        if (mass > kMassEpsilon) {
            const double loc = (a0 + a1) > 0.0 ? (x0 * a0 + x1 * a1) / (a0 + a1)
                                               : 0.5 * (x0 + x1);
            out.atoms.atoms.push_back({loc, mass});
        }
    };
    for (std::size_t k = 0; k + 1 < xi.size(); ++k)
        emit(xi[k], ai[k], xi[k + 1], ai[k + 1], mesh[k + 1] - mesh[k]);
    for (std::size_t k = 0; k + 1 < xr.size(); ++k)
        emit(xr[k], ar[k], xr[k + 1], ar[k + 1], cfg.dt);
    out.total_mass = pairwise_sum(masses);
    return out;
}

} // namespace ebt
