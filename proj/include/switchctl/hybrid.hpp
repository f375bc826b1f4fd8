#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "switchctl/core.hpp"
#include "switchctl/ode.hpp"

namespace switchctl::hybrid {

/** @brief One dynamic mode ẏ = A y + f(t, y); f and its Jacobian default to zero. */
struct Mode {
    Eigen::MatrixXd A;
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)> f;
    std::function<void(double, const Eigen::VectorXd&, Eigen::MatrixXd&)> f_jacobian;
};

/** @brief State reset applied on a mode change; defaults to the identity. */
struct ResetMap {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> g;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

/** @brief Switching cost l(τ, y⁻) charged at a mode change; defaults to zero. */
struct SwitchCost {
    std::function<double(double, const Eigen::VectorXd&)> value;
    std::function<double(double, const Eigen::VectorXd&)> d_tau;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> d_y;
};

/** @brief Running cost l(t, y) with gradient; defaults to zero. */
struct RunningCost {
    std::function<double(double, const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> gradient;
};

/**
 * @brief Switched system: modes with affine-plus-perturbation right-hand
 * sides, per-ordered-pair reset maps and switching costs, and a running cost.
 *
 * Pairs without an explicit reset use the identity; pairs without an explicit
 * switching cost are free.  Mode indices are 0-based.
 */
class HybridSystem {
public:
    HybridSystem(int dim, std::vector<Mode> modes) : dim_(dim), modes_(std::move(modes)) {
        if (dim_ < 1) throw std::invalid_argument("HybridSystem: need dim >= 1");
        if (modes_.empty()) throw std::invalid_argument("HybridSystem: need at least one mode");
        for (const Mode& m : modes_)
            if (m.A.rows() != dim_ || m.A.cols() != dim_)
                throw std::invalid_argument("HybridSystem: generator dimension mismatch");
    }

    int dim() const { return dim_; }
    int mode_count() const { return static_cast<int>(modes_.size()); }
    const Mode& mode(int j) const {
        if (j < 0 || j >= mode_count()) throw std::invalid_argument("HybridSystem: bad mode index");
        return modes_[static_cast<std::size_t>(j)];
    }

    void set_reset(int i, int j, ResetMap reset) { resets_[{i, j}] = std::move(reset); }
    void set_switch_cost(int i, int j, SwitchCost cost) { switch_costs_[{i, j}] = std::move(cost); }
    void set_running_cost(RunningCost cost) { running_ = std::move(cost); }

    /** @brief Reset for the ordered pair (i → j); identity when unset. */
    Eigen::VectorXd reset(int i, int j, const Eigen::VectorXd& y) const {
        const auto it = resets_.find({i, j});
        if (it == resets_.end() || !it->second.g) return y;
        return it->second.g(y);
    }
    Eigen::MatrixXd reset_jacobian(int i, int j, const Eigen::VectorXd& y) const {
        const auto it = resets_.find({i, j});
        if (it == resets_.end() || !it->second.jacobian)
            return Eigen::MatrixXd::Identity(dim_, dim_);
        return it->second.jacobian(y);
    }

    double switch_cost(int i, int j, double tau, const Eigen::VectorXd& y) const {
        const auto it = switch_costs_.find({i, j});
        if (it == switch_costs_.end() || !it->second.value) return 0.0;
        return it->second.value(tau, y);
    }
    double switch_cost_d_tau(int i, int j, double tau, const Eigen::VectorXd& y) const {
        const auto it = switch_costs_.find({i, j});
        if (it == switch_costs_.end() || !it->second.d_tau) return 0.0;
        return it->second.d_tau(tau, y);
    }
    Eigen::VectorXd switch_cost_d_y(int i, int j, double tau, const Eigen::VectorXd& y) const {
        const auto it = switch_costs_.find({i, j});
        if (it == switch_costs_.end() || !it->second.d_y) return Eigen::VectorXd::Zero(dim_);
        return it->second.d_y(tau, y);
    }

    double running_cost(double t, const Eigen::VectorXd& y) const {
        if (!running_.value) return 0.0;
        return running_.value(t, y);
    }
    Eigen::VectorXd running_cost_gradient(double t, const Eigen::VectorXd& y) const {
        if (!running_.gradient) return Eigen::VectorXd::Zero(dim_);
        return running_.gradient(t, y);
    }
    bool has_running_cost() const { return static_cast<bool>(running_.value); }

    /** @brief Full right-hand side F_j(t, y) = A^j y + f^j(t, y). */
    Eigen::VectorXd rhs(int j, double t, const Eigen::VectorXd& y) const {
        const Mode& m = mode(j);
        Eigen::VectorXd out = m.A * y;
        if (m.f) {
            Eigen::VectorXd pert(dim_);
            m.f(t, y, pert);
            out += pert;
        }
        return out;
    }
    Eigen::MatrixXd rhs_jacobian(int j, double t, const Eigen::VectorXd& y) const {
        const Mode& m = mode(j);
        Eigen::MatrixXd out = m.A;
        if (m.f_jacobian) {
            Eigen::MatrixXd jac(dim_, dim_);
            m.f_jacobian(t, y, jac);
            out += jac;
        }
        return out;
    }

private:
    int dim_;
    std::vector<Mode> modes_;
    std::map<std::pair<int, int>, ResetMap> resets_;
    std::map<std::pair<int, int>, SwitchCost> switch_costs_;
    RunningCost running_;
};

/**
 * @brief Mode sequence j_0..j_N and switching times τ_0 ≤ τ_1 ≤ … ≤ τ_{N+1};
 * τ_0 and τ_{N+1} are the fixed endpoints, equalities (empty intervals) are
 * legal.
 */
struct SwitchSchedule {
    std::vector<int> modes;
    std::vector<double> times;

    SwitchSchedule(std::vector<int> modes_, std::vector<double> times_)
        : modes(std::move(modes_)), times(std::move(times_)) {
        if (modes.empty()) throw std::invalid_argument("SwitchSchedule: need at least one mode");
        if (times.size() != modes.size() + 1)
            throw std::invalid_argument("SwitchSchedule: need one more time than modes");
        for (std::size_t k = 0; k + 1 < times.size(); ++k)
            if (times[k] > times[k + 1] + 1e-15)
                throw std::invalid_argument("SwitchSchedule: times must be nondecreasing");
    }

    std::size_t switch_count() const { return modes.size() - 1; }
    double t0() const { return times.front(); }
    double tf() const { return times.back(); }

    void validate_against(const HybridSystem& sys) const {
        for (int j : modes)
            if (j < 0 || j >= sys.mode_count())
                throw std::invalid_argument("SwitchSchedule: mode index out of range");
    }
};

/**
 * @brief Forward solution: one dense-output arc per interval (state augmented
 * with the accumulated running cost as the trailing component), pre/post jump
 * states, and the total cost.
 */
struct HybridTrajectory {
    std::vector<OdeSolution> arcs;          ///< augmented (y, z), z = running cost so far
    std::vector<Eigen::VectorXd> pre_jump;  ///< y⁻(τ_n), n = 1..N
    std::vector<Eigen::VectorXd> post_jump; ///< y⁺(τ_n) after the reset, n = 1..N
    Eigen::VectorXd y_final;
    double running_cost = 0.0;
    double switching_cost = 0.0;
    double total_cost = 0.0;
    bool truncated = false;
    double truncation_time = 0.0;

    /** @brief State (without the cost component) inside interval n at time t. */
    Eigen::VectorXd state(std::size_t interval, double t) const {
        const Eigen::VectorXd aug = arcs.at(interval).eval(t);
        return aug.head(aug.size() - 1);
    }
};

/**
 * @brief Integrate the switched system over a schedule with adaptive
 * dense-output arcs; resets are applied exactly at the switching times and
 * empty intervals contribute their reset only.  A state norm beyond the
 * blowup guard stops the run early and sets the truncated flag instead of
 * throwing.
 */
inline HybridTrajectory simulate_hybrid(const HybridSystem& sys, const SwitchSchedule& schedule,
                                        const Eigen::VectorXd& y0, const OdeOptions& options = {}) {
    schedule.validate_against(sys);
    if (y0.size() != sys.dim()) throw std::invalid_argument("simulate_hybrid: y0 dimension mismatch");

    HybridTrajectory traj;
    const std::size_t intervals = schedule.modes.size();
    traj.arcs.reserve(intervals);

    Eigen::VectorXd y = y0;
    double z = 0.0;
    for (std::size_t n = 0; n < intervals; ++n) {
        const int j = schedule.modes[n];
        if (n > 0) {
            const int i = schedule.modes[n - 1];
            const double tau = schedule.times[n];
            traj.pre_jump.push_back(y);
            traj.switching_cost += sys.switch_cost(i, j, tau, y);
            y = sys.reset(i, j, y);
            if (!y.allFinite()) throw numerical_error("simulate_hybrid: reset produced non-finite state");
            traj.post_jump.push_back(y);
        }
        Eigen::VectorXd aug(sys.dim() + 1);
        aug.head(sys.dim()) = y;
        aug[sys.dim()] = z;
        const auto rhs = [&sys, j](double t, const Eigen::VectorXd& state, Eigen::VectorXd& dot) {
            const auto d = state.size() - 1;
            const Eigen::VectorXd yy = state.head(d);
            dot.head(d) = sys.rhs(j, t, yy);
            dot[d] = sys.running_cost(t, yy);
        };
        OdeSolution arc = integrate_dopri5(rhs, schedule.times[n], schedule.times[n + 1], aug, options);
        const bool cut = arc.truncated();
        const double cut_time = arc.truncation_time();
        const Eigen::VectorXd end = arc.y_back();
        traj.arcs.push_back(std::move(arc));
        y = end.head(sys.dim());
        z = end[sys.dim()];
        if (cut) {
            traj.truncated = true;
            traj.truncation_time = cut_time;
            break;
        }
    }
    traj.y_final = y;
    traj.running_cost = z;
    traj.total_cost = traj.running_cost + traj.switching_cost;
    return traj;
}

/** @brief Total cost Φ = ∫ l dt + Σ switching costs of a schedule from y0. */
inline double evaluate_cost(const HybridSystem& sys, const SwitchSchedule& schedule,
                            const Eigen::VectorXd& y0, const OdeOptions& options = {}) {
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0, options);
    if (traj.truncated) throw numerical_error("evaluate_cost: trajectory left the blowup guard");
    return traj.total_cost;
}

/** @brief Backward adjoint: arcs per interval plus the jump values at every switch. */
struct HybridAdjoint {
    std::vector<OdeSolution> arcs;        ///< backward in time per interval
    std::vector<Eigen::VectorXd> p_plus;  ///< p⁺(τ_n) = limit from the right, n = 1..N
    std::vector<Eigen::VectorXd> p_minus; ///< p⁻(τ_n) after the jump rule, n = 1..N
    Eigen::VectorXd p_start;              ///< p(τ_0)
};

/**
 * @brief Solve ṗ = −(A^j)ᵀ p − (f^j_y)ᵀ p + l_y backward from p(t_f) = 0,
 * applying p⁻(τ_n) = g_yᵀ(y⁻) p⁺(τ_n) − l^{i,j}_y(τ_n, y⁻) at each switch.
 */
inline HybridAdjoint adjoint_hybrid(const HybridSystem& sys, const SwitchSchedule& schedule,
                                    const HybridTrajectory& traj, const OdeOptions& options = {}) {
    schedule.validate_against(sys);
    if (traj.truncated)
        throw std::invalid_argument("adjoint_hybrid: trajectory was truncated by the blowup guard");
    const std::size_t intervals = schedule.modes.size();
    if (traj.arcs.size() != intervals)
        throw std::invalid_argument("adjoint_hybrid: trajectory does not match the schedule");

    HybridAdjoint adj;
    adj.arcs.assign(intervals, OdeSolution());
    const std::size_t switches = schedule.switch_count();
    adj.p_plus.assign(switches, Eigen::VectorXd());
    adj.p_minus.assign(switches, Eigen::VectorXd());

    Eigen::VectorXd p = Eigen::VectorXd::Zero(sys.dim());
    for (std::size_t n = intervals; n-- > 0;) {
        const int j = schedule.modes[n];
        const auto rhs = [&sys, &traj, n, j](double t, const Eigen::VectorXd& pp,
                                             Eigen::VectorXd& dot) {
            const Eigen::VectorXd y = traj.state(n, t);
            dot = -(sys.rhs_jacobian(j, t, y).transpose() * pp);
            dot += sys.running_cost_gradient(t, y);
        };
        adj.arcs[n] = integrate_dopri5(rhs, schedule.times[n + 1], schedule.times[n], p, options);
        if (adj.arcs[n].truncated())
            throw numerical_error("adjoint_hybrid: backward sweep left the blowup guard");
        p = adj.arcs[n].y_back();
        if (n > 0) {
            const std::size_t k = n - 1; // switch index n, stored 0-based
            const int i = schedule.modes[n - 1];
            const double tau = schedule.times[n];
            const Eigen::VectorXd& y_minus = traj.pre_jump[k];
            adj.p_plus[k] = p;
            p = sys.reset_jacobian(i, j, y_minus).transpose() * p -
                sys.switch_cost_d_y(i, j, tau, y_minus);
            adj.p_minus[k] = p;
        }
    }
    adj.p_start = p;
    return adj;
}

struct GradientReport {
    std::vector<double> d_tau; ///< ∂Φ/∂τ_n, n = 1..N
};

/**
 * @brief Derivative of the cost with respect to each switching time.
 *
 * For switch k between modes i = j_{k−1} and j = j_k, with y⁻/y⁺ the pre- and
 * post-jump states and F_m(t, y) = A^m y + f^m(t, y):
 *
 *   ∂Φ/∂τ_k = l(τ_k, y⁻) − l(τ_k, y⁺) + l^{i,j}_τ(τ_k, y⁻)
 *             − ⟨p⁻(τ_k), F_i(τ_k, y⁻)⟩ + ⟨p⁺(τ_k), F_j(τ_k, y⁺)⟩.
 *
 * Expressed through the pre-jump adjoint, the chain rule of the switching
 * cost through the moving pre-jump state is included automatically; writing
 * the same formula with p⁺ and the reset Jacobian alone would drop the
 * ⟨l^{i,j}_y, F_i(y⁻)⟩ term, which vanishes only for state-independent
 * switching costs.  The finite-difference suite pins this down with
 * state-dependent costs.
 */
inline GradientReport switch_time_gradient(const HybridSystem& sys, const SwitchSchedule& schedule,
                                           const HybridTrajectory& traj, const HybridAdjoint& adj) {
    const std::size_t switches = schedule.switch_count();
    if (traj.pre_jump.size() != switches || adj.p_minus.size() != switches)
        throw std::invalid_argument("switch_time_gradient: inconsistent inputs");
    GradientReport report;
    report.d_tau.resize(switches);
    for (std::size_t k = 0; k < switches; ++k) {
        const int i = schedule.modes[k];
        const int j = schedule.modes[k + 1];
        const double tau = schedule.times[k + 1];
        const Eigen::VectorXd& y_minus = traj.pre_jump[k];
        const Eigen::VectorXd& y_plus = traj.post_jump[k];
        const Eigen::VectorXd f_prev = sys.rhs(i, tau, y_minus);
        const Eigen::VectorXd f_next = sys.rhs(j, tau, y_plus);
        double g = sys.running_cost(tau, y_minus) - sys.running_cost(tau, y_plus);
        g += sys.switch_cost_d_tau(i, j, tau, y_minus);
        g -= adj.p_minus[k].dot(f_prev);
        g += adj.p_plus[k].dot(f_next);
        report.d_tau[k] = g;
    }
    return report;
}

/** @brief Per-switch verdict of the grouped-sum stationarity conditions. */
struct ConditionVerdict {
    std::size_t a = 0;       ///< first index sharing this switch time (0 = pinned at τ_0)
    std::size_t b = 0;       ///< last index sharing this switch time (N+1 = pinned at t_f)
    double left_sum = 0.0;   ///< Σ_{j=a..k} ∂Φ/∂τ_j (when a ≥ 1)
    double right_sum = 0.0;  ///< Σ_{j=k..b} ∂Φ/∂τ_j (when b ≤ N)
    bool left_applicable = false;
    bool right_applicable = false;
    bool left_ok = true;
    bool right_ok = true;
};

struct NecessaryConditionReport {
    std::vector<ConditionVerdict> verdicts; ///< per switch k = 1..N
    bool satisfied = true;
};

/**
 * @brief Stationarity check for coincident switch groups: moving a left block
 * {a..k} earlier must not pay (grouped sum ≤ 0) and moving a right block
 * {k..b} later must not pay (grouped sum ≥ 0), within tolerance.  Groups
 * pinned at the endpoints have the corresponding condition vacuous.
 */
inline NecessaryConditionReport necessary_conditions(const SwitchSchedule& schedule,
                                                     const GradientReport& grads,
                                                     double tol = 1e-8) {
    const std::size_t n_switch = schedule.switch_count();
    if (grads.d_tau.size() != n_switch)
        throw std::invalid_argument("necessary_conditions: gradient/schedule mismatch");
    NecessaryConditionReport report;
    report.verdicts.resize(n_switch);
    const auto& t = schedule.times;
    for (std::size_t k = 1; k <= n_switch; ++k) {
        ConditionVerdict v;
        std::size_t a = k;
        while (a > 0 && t[a - 1] == t[k]) --a;
        std::size_t b = k;
        while (b + 1 <= n_switch + 1 && t[b + 1] == t[k]) ++b;
        v.a = a;
        v.b = b;
        v.left_applicable = a >= 1;
        v.right_applicable = b <= n_switch;
        if (v.left_applicable) {
            for (std::size_t m = a; m <= k; ++m) v.left_sum += grads.d_tau[m - 1];
            v.left_ok = v.left_sum <= tol;
        }
        if (v.right_applicable) {
            for (std::size_t m = k; m <= b; ++m) v.right_sum += grads.d_tau[m - 1];
            v.right_ok = v.right_sum >= -tol;
        }
        if (!v.left_ok || !v.right_ok) report.satisfied = false;
        report.verdicts[k - 1] = v;
    }
    return report;
}

namespace detail {

/** @brief Locate the interval active at time t (right-continuous; t_f maps to the last). */
inline std::size_t interval_of(const SwitchSchedule& schedule, double t) {
    if (t < schedule.t0() - 1e-12 || t > schedule.tf() + 1e-12)
        throw std::invalid_argument("interval_of: time outside the schedule");
    for (std::size_t n = 0; n + 1 < schedule.modes.size(); ++n)
        if (t < schedule.times[n + 1]) return n;
    return schedule.modes.size() - 1;
}

inline void check_reset_composition(const HybridSystem& sys, int i, int via, int j,
                                    const Eigen::VectorXd& anchor) {
    // g^{i,j} must equal g^{via,j} ∘ g^{i,via} near the trajectory
    const double scale = std::max(1.0, anchor.norm());
    for (int s = 0; s < 5; ++s) {
        Eigen::VectorXd y = anchor;
        if (s > 0) {
            // deterministic probe offsets; no RNG needed for a consistency check
            for (Eigen::Index r = 0; r < y.size(); ++r)
                y[r] += 0.01 * scale * std::sin(0.7 * static_cast<double>(s) +
                                                1.3 * static_cast<double>(r));
        }
        const Eigen::VectorXd direct = sys.reset(i, j, y);
        const Eigen::VectorXd chained = sys.reset(via, j, sys.reset(i, via, y));
        if ((direct - chained).norm() > 1e-8 * std::max(1.0, direct.norm()))
            throw std::invalid_argument(
                "mode insertion: reset maps violate the composition rule g(i,j) = "
                "g(via,j) ∘ g(i,via) for modes i=" + std::to_string(i) +
                ", via=" + std::to_string(via) + ", j=" + std::to_string(j) +
                "; refusing to build the expanded schedule");
    }
}

} // namespace detail

/** @brief Schedule with a zero-length interval of mode j_hat inserted at t_hat. */
inline SwitchSchedule expand_schedule(const SwitchSchedule& schedule, double t_hat, int j_hat) {
    t_hat = std::clamp(t_hat, schedule.t0(), schedule.tf());
    const std::size_t m = detail::interval_of(schedule, t_hat);
    std::vector<int> modes = schedule.modes;
    std::vector<double> times = schedule.times;
    modes.insert(modes.begin() + static_cast<std::ptrdiff_t>(m) + 1,
                 {j_hat, schedule.modes[m]});
    times.insert(times.begin() + static_cast<std::ptrdiff_t>(m) + 1, {t_hat, t_hat});
    return SwitchSchedule(std::move(modes), std::move(times));
}

/**
 * @brief First-order effect of growing a zero-length interval of mode j_hat
 * inserted at t_hat: the derivative of the expanded cost with respect to the
 * closing time of the inserted interval.
 *
 * Requires the reset maps around the insertion to satisfy the composition
 * rule (checked on sampled states; violations refuse with a diagnostic).
 */
inline double mode_insertion_gradient(const HybridSystem& sys, const SwitchSchedule& schedule,
                                      const HybridTrajectory& traj, double t_hat, int j_hat,
                                      const OdeOptions& options = {}) {
    schedule.validate_against(sys);
    if (j_hat < 0 || j_hat >= sys.mode_count())
        throw std::invalid_argument("mode_insertion_gradient: bad mode index");
    if (traj.truncated)
        throw std::invalid_argument("mode_insertion_gradient: trajectory was truncated");
    if (traj.arcs.size() != schedule.modes.size())
        throw std::invalid_argument("mode_insertion_gradient: trajectory does not match the schedule");
    const std::size_t m = detail::interval_of(schedule, t_hat);
    const int j_m = schedule.modes[m];
    const Eigen::VectorXd anchor = traj.state(m, t_hat);
    detail::check_reset_composition(sys, j_m, j_hat, j_m, anchor);

    const SwitchSchedule expanded = expand_schedule(schedule, t_hat, j_hat);
    const Eigen::VectorXd y0 = traj.state(0, schedule.t0());
    const HybridTrajectory etraj = simulate_hybrid(sys, expanded, y0, options);
    if (etraj.truncated)
        throw numerical_error("mode_insertion_gradient: expanded trajectory left the blowup guard");
    const HybridAdjoint eadj = adjoint_hybrid(sys, expanded, etraj, options);
    const GradientReport egrad = switch_time_gradient(sys, expanded, etraj, eadj);
    return egrad.d_tau[m + 1]; // the closing switch of the inserted interval
}

/** @brief Euclidean projection onto {lo ≤ x_1 ≤ … ≤ x_N ≤ hi} (isotonic regression, then clip). */
inline std::vector<double> project_ordered(std::vector<double> x, double lo, double hi) {
    std::vector<double> level;
    std::vector<std::size_t> count;
    level.reserve(x.size());
    count.reserve(x.size());
    for (double v : x) {
        level.push_back(v);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged =
                (level[level.size() - 2] * static_cast<double>(count[count.size() - 2]) +
                 level.back() * static_cast<double>(count.back())) /
                static_cast<double>(count[count.size() - 2] + count.back());
            count[count.size() - 2] += count.back();
            level[level.size() - 2] = merged;
            level.pop_back();
            count.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(x.size());
    for (std::size_t b = 0; b < level.size(); ++b)
        out.insert(out.end(), count[b], std::clamp(level[b], lo, hi));
    return out;
}

struct OptimizeOptions {
    std::size_t max_outer = 10;
    std::size_t max_inner = 40;
    std::size_t insertion_grid = 16;
    double insertion_threshold = -1e-6;
    double armijo_c = 1e-4;
    double step0 = 1.0;
    OdeOptions ode;
};

struct OptimizeReport {
    std::vector<int> modes;
    std::vector<double> times;
    double phi = 0.0;
    std::vector<double> phi_history; ///< accepted objective values, non-increasing
    std::size_t outer_iterations = 0;
    std::string stopping_reason;
};

/**
 * @brief Alternating descent on schedules: projected Armijo steps on the
 * switching times until stationary, then a mode-insertion sweep over a coarse
 * candidate grid; the most negative insertion gradient below the threshold is
 * inserted as a zero-length interval and the alternation repeats.
 *
 * Candidates whose insertion would charge a nonzero switching cost are
 * skipped: a zero-length insertion must leave Φ unchanged for the accepted
 * objective history to stay non-increasing.
 */
inline OptimizeReport optimize_schedule(const HybridSystem& sys, const SwitchSchedule& schedule0,
                                        const Eigen::VectorXd& y0,
                                        const OptimizeOptions& opts = {}) {
    schedule0.validate_against(sys);
    std::vector<int> modes = schedule0.modes;
    std::vector<double> times = schedule0.times;
    const double t0 = times.front();
    const double tf = times.back();

    OptimizeReport report;
    auto phi_of = [&](const std::vector<int>& md, const std::vector<double>& tm) {
        return evaluate_cost(sys, SwitchSchedule(md, tm), y0, opts.ode);
    };
    double phi = phi_of(modes, times);
    report.phi_history.push_back(phi);

    for (std::size_t outer = 0; outer < opts.max_outer; ++outer) {
        ++report.outer_iterations;
        // (a) projected gradient descent on the switching times
        for (std::size_t inner = 0; inner < opts.max_inner; ++inner) {
            const SwitchSchedule current(modes, times);
            if (current.switch_count() == 0) break;
            const HybridTrajectory traj = simulate_hybrid(sys, current, y0, opts.ode);
            if (traj.truncated) throw numerical_error("optimize_schedule: trajectory blowup");
            const HybridAdjoint adj = adjoint_hybrid(sys, current, traj, opts.ode);
            const GradientReport grads = switch_time_gradient(sys, current, traj, adj);

            const std::size_t n_switch = current.switch_count();
            std::vector<double> inner_times(times.begin() + 1, times.end() - 1);
            std::vector<double> probe(inner_times);
            for (std::size_t k = 0; k < n_switch; ++k) probe[k] -= grads.d_tau[k];
            const std::vector<double> projected = project_ordered(probe, t0, tf);
            double stationarity = 0.0;
            for (std::size_t k = 0; k < n_switch; ++k)
                stationarity = std::max(stationarity, std::abs(projected[k] - inner_times[k]));
            if (stationarity < 1e-8) break;

            double s = opts.step0;
            bool accepted = false;
            while (s >= 1e-12) {
                std::vector<double> cand(inner_times);
                for (std::size_t k = 0; k < n_switch; ++k) cand[k] -= s * grads.d_tau[k];
                cand = project_ordered(cand, t0, tf);
                double decrease = 0.0;
                for (std::size_t k = 0; k < n_switch; ++k)
                    decrease += grads.d_tau[k] * (inner_times[k] - cand[k]);
                std::vector<double> full(times);
                std::copy(cand.begin(), cand.end(), full.begin() + 1);
                const double phi_new = phi_of(modes, full);
                if (phi_new <= phi - opts.armijo_c * decrease) {
                    times = full;
                    phi = phi_new;
                    report.phi_history.push_back(phi);
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if (!accepted) break;
        }

        // (b) mode-insertion sweep on a coarse candidate grid
        double best_gradient = 0.0;
        double best_t = 0.0;
        int best_mode = -1;
        {
            const SwitchSchedule current(modes, times);
            const HybridTrajectory traj = simulate_hybrid(sys, current, y0, opts.ode);
            if (traj.truncated) throw numerical_error("optimize_schedule: trajectory blowup");
            for (std::size_t g = 0; g < opts.insertion_grid; ++g) {
                const double t_hat =
                    t0 + (tf - t0) * (static_cast<double>(g) + 0.5) /
                             static_cast<double>(opts.insertion_grid);
                const std::size_t m = detail::interval_of(current, t_hat);
                const int active = current.modes[m];
                for (int j_hat = 0; j_hat < sys.mode_count(); ++j_hat) {
                    if (j_hat == active) continue;
                    const Eigen::VectorXd y_at = traj.state(m, t_hat);
                    const double charge = sys.switch_cost(active, j_hat, t_hat, y_at) +
                                          sys.switch_cost(j_hat, active, t_hat,
                                                          sys.reset(active, j_hat, y_at));
                    if (std::abs(charge) > 1e-12) continue; // would break monotonicity
                    const double gr =
                        mode_insertion_gradient(sys, current, traj, t_hat, j_hat, opts.ode);
                    if (gr < best_gradient) {
                        best_gradient = gr;
                        best_t = t_hat;
                        best_mode = j_hat;
                    }
                }
            }
        }
        if (best_mode < 0 || best_gradient >= opts.insertion_threshold) {
            report.stopping_reason = "stationary (no insertion below threshold)";
            break;
        }
        const SwitchSchedule expanded = expand_schedule(SwitchSchedule(modes, times), best_t, best_mode);
        modes = expanded.modes;
        times = expanded.times;
    }
    if (report.stopping_reason.empty()) report.stopping_reason = "outer iteration limit";
    report.modes = modes;
    report.times = times;
    report.phi = phi;
    return report;
}

/**
 * @brief Periodic upwind discretization of transport at speed c on d cells of
 * [0,1), with an optional zero-order amplification term γ·I that makes the
 * mode exponentially unstable (pure upwind transport is marginally stable).
 */
inline Eigen::MatrixXd unstable_transport(int d, double c, double gamma) {
    if (d < 2) throw std::invalid_argument("unstable_transport: need d >= 2");
    if (!(c > 0.0)) throw std::invalid_argument("unstable_transport: need c > 0");
    const double dx = 1.0 / d;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        A(i, i) = -c / dx + gamma;
        A(i, (i + d - 1) % d) = c / dx;
    }
    return A;
}

/** @brief Dirichlet second-difference diffusion with viscosity ν on d interior nodes of (0,1). */
inline Eigen::MatrixXd diffusion(int d, double nu) {
    if (d < 2) throw std::invalid_argument("diffusion: need d >= 2");
    if (!(nu > 0.0)) throw std::invalid_argument("diffusion: need nu > 0");
    const double dx = 1.0 / (d + 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    const double w = nu / (dx * dx);
    for (int i = 0; i < d; ++i) {
        A(i, i) = -2.0 * w;
        if (i > 0) A(i, i - 1) = w;
        if (i + 1 < d) A(i, i + 1) = w;
    }
    return A;
}

} // namespace switchctl::hybrid
