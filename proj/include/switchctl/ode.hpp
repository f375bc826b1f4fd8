#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "switchctl/core.hpp"

namespace switchctl {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h0 = 0.0;        ///< initial step; 0 = choose automatically
    double hmax = 0.0;      ///< step cap; 0 = whole interval
    std::size_t max_steps = 10000000;
    double blowup_norm = 1e12; ///< sup-norm threshold marking finite-time blowup
};

/**
 * @brief Dense ODE solution: accepted nodes (t_i, y_i, f_i) plus cubic
 * Hermite interpolation in between.
 *
 * Every accepted step keeps its endpoint derivative, so later adjoint sweeps
 * can query y(t) anywhere without re-running the forward integration.  The
 * Hermite interpolant is O(h^4)-accurate, below the adaptive step error at
 * the tolerances used here.
 */
class OdeSolution {
public:
    OdeSolution() = default;

    double t_front() const { return ts_.front(); }
    double t_back() const { return ts_.back(); }
    const Eigen::VectorXd& y_front() const { return ys_.front(); }
    const Eigen::VectorXd& y_back() const { return ys_.back(); }
    const std::vector<double>& times() const noexcept { return ts_; }
    const std::vector<Eigen::VectorXd>& states() const noexcept { return ys_; }
    bool truncated() const noexcept { return truncated_; }
    double truncation_time() const noexcept { return truncation_time_; }
    std::size_t steps() const noexcept { return ts_.empty() ? 0 : ts_.size() - 1; }

    /** @brief Interpolated state at t inside the covered span. */
    Eigen::VectorXd eval(double t) const {
        if (ts_.empty()) throw std::invalid_argument("OdeSolution::eval: empty solution");
        if (ts_.size() == 1) return ys_.front();
        const bool fwd = ts_.back() > ts_.front();
        const double lo = fwd ? ts_.front() : ts_.back();
        const double hi = fwd ? ts_.back() : ts_.front();
        const double pad = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
        if (t < lo - pad || t > hi + pad)
            throw std::invalid_argument("OdeSolution::eval: time outside solution span");
        t = std::clamp(t, lo, hi);
        // bracketing step index via direction-aware binary search
        std::size_t lo_i = 0, hi_i = ts_.size() - 1;
        while (hi_i - lo_i > 1) {
            const std::size_t mid = (lo_i + hi_i) / 2;
            const bool left = fwd ? (t >= ts_[mid]) : (t <= ts_[mid]);
            if (left) lo_i = mid; else hi_i = mid;
        }
        const double h = ts_[lo_i + 1] - ts_[lo_i];
        if (h == 0.0) return ys_[lo_i + 1];
        const double th = (t - ts_[lo_i]) / h;
        const double th2 = th * th, th3 = th2 * th;
        const double h00 = 2 * th3 - 3 * th2 + 1;
        const double h10 = th3 - 2 * th2 + th;
        const double h01 = -2 * th3 + 3 * th2;
        const double h11 = th3 - th2;
        return h00 * ys_[lo_i] + (h10 * h) * fs_[lo_i] + h01 * ys_[lo_i + 1] + (h11 * h) * fs_[lo_i + 1];
    }

    void push(double t, Eigen::VectorXd y, Eigen::VectorXd f) {
        ts_.push_back(t);
        ys_.push_back(std::move(y));
        fs_.push_back(std::move(f));
    }

    void mark_truncated(double t) {
        truncated_ = true;
        truncation_time_ = t;
    }

private:
    std::vector<double> ts_;
    std::vector<Eigen::VectorXd> ys_;
    std::vector<Eigen::VectorXd> fs_;
    bool truncated_ = false;
    double truncation_time_ = 0.0;
};

/**
 * @brief Adaptive Dormand–Prince 5(4) integration from t0 to t1 (either
 * direction) with stored dense output.
 *
 * On blowup (sup-norm above OdeOptions::blowup_norm) the solution returned so
 * far is marked truncated instead of throwing: finite-time escape is a
 * modeled outcome for switched systems, not a programming error.
 *
 * @param rhs callable rhs(t, y, dydt&)
 */
template <typename Rhs>
OdeSolution integrate_dopri5(Rhs&& rhs, double t0, double t1, const Eigen::VectorXd& y0,
                             const OdeOptions& opt = OdeOptions{}) {
    OdeSolution sol;
    const auto n = y0.size();
    Eigen::VectorXd f0(n);
    rhs(t0, y0, f0);
    sol.push(t0, y0, f0);
    if (t1 == t0) return sol;

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double hmax = (opt.hmax > 0.0) ? std::min(opt.hmax, span) : span;

    // Butcher tableau (Dormand–Prince 5(4), FSAL)
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    Eigen::VectorXd y = y0, k1 = f0, k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    double t = t0;

    // initial step: rough second-derivative probe (Hairer's HINIT, simplified)
    double h;
    if (opt.h0 > 0.0) {
        h = std::min(opt.h0, hmax);
    } else {
        const double d0 = y.cwiseAbs().maxCoeff();
        const double d1 = k1.cwiseAbs().maxCoeff();
        h = (d1 > 1e-10) ? 0.01 * std::max(d0, opt.atol) / d1 : 1e-6 * span;
        h = std::clamp(h, 1e-10 * span, hmax);
    }

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        if (std::abs(t - t1) <= 0.0) break;
        h = std::min(h, std::abs(t1 - t));
        const double hs = dir * h;

        ytmp = y + hs * (a21 * k1);
        rhs(t + c2 * hs, ytmp, k2);
        ytmp = y + hs * (a31 * k1 + a32 * k2);
        rhs(t + c3 * hs, ytmp, k3);
        ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * hs, ytmp, k4);
        ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * hs, ytmp, k5);
        ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + hs, ytmp, k6);
        ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + hs, ynew, k7); // FSAL stage
        err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double errnorm = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double r = err[i] / sc;
            errnorm += r * r;
        }
        errnorm = std::sqrt(errnorm / static_cast<double>(n));

        if (errnorm <= 1.0) {
            t = (std::abs(t1 - t) <= h * (1.0 + 1e-12)) ? t1 : t + hs;
            y.swap(ynew);
            k1.swap(k7);
            sol.push(t, y, k1);
            if (y.cwiseAbs().maxCoeff() > opt.blowup_norm) {
                sol.mark_truncated(t);
                return sol;
            }
            if (t == t1) return sol;
        }
        const double fac = std::clamp(0.9 * std::pow(std::max(errnorm, 1e-16), -0.2), 0.2, 10.0);
        h = std::min(h * fac, hmax);
        if (h < 1e-14 * span)
            throw numerical_error("integrate_dopri5: step size underflow at t = " + std::to_string(t));
    }
    if (t != t1) throw numerical_error("integrate_dopri5: max step count exceeded");
    return sol;
}

} // namespace switchctl
