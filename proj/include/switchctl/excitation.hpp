#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "switchctl/core.hpp"
#include "switchctl/grid.hpp"

namespace switchctl::excitation {

/** @brief Persistent-excitation parameters: every window of length T must carry mass ≥ mu. */
struct PEParams {
    double T;
    double mu;
    PEParams(double T_, double mu_) : T(T_), mu(mu_) {
        if (!(T > 0.0)) throw std::invalid_argument("PEParams: T must be positive");
        if (!(mu > 0.0 && mu <= T)) throw std::invalid_argument("PEParams: need 0 < mu <= T");
    }
};

struct PEReport {
    bool ok = false;
    double worst_start = 0.0;
    double worst_mass = 0.0;
};

/**
 * @brief Exact sliding-window check of ∫_t^{t+T} σ(s) ds ≥ μ on [0, horizon].
 *
 * For piecewise-constant σ the window mass is piecewise linear in the window
 * start, with kinks only where the window ends cross breakpoints; minimizing
 * over the kink candidates {0, horizon−T} ∪ bp ∪ (bp − T) is therefore exact.
 */
inline PEReport is_pe(const PiecewiseConstant& sigma, const PEParams& params, double horizon) {
    if (horizon < params.T) throw std::invalid_argument("is_pe: horizon shorter than the window");
    if (sigma.start() > 0.0) throw std::invalid_argument("is_pe: signal must start at t <= 0");
    std::vector<double> candidates{0.0, horizon - params.T};
    for (double b : sigma.breakpoints()) {
        if (b >= 0.0 && b <= horizon - params.T) candidates.push_back(b);
        const double shifted = b - params.T;
        if (shifted >= 0.0 && shifted <= horizon - params.T) candidates.push_back(shifted);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    PEReport report;
    report.worst_mass = std::numeric_limits<double>::infinity();
    for (double s : candidates) {
        const double mass = sigma.integral(s, s + params.T);
        if (mass < report.worst_mass) {
            report.worst_mass = mass;
            report.worst_start = s;
        }
    }
    report.ok = report.worst_mass >= params.mu - 1e-12;
    return report;
}

/**
 * @brief The on/off damping signal σ(t) = Σ_k χ_{[2k−μ, 2k+μ]}(t) of the
 * non-decay counterexample, restricted to [0, horizon].
 */
inline PiecewiseConstant counterexample_signal(double mu, double horizon) {
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("counterexample_signal: need mu in (0,1)");
    if (!(horizon > 0.0)) throw std::invalid_argument("counterexample_signal: horizon must be positive");
    std::vector<double> bp{0.0};
    std::vector<double> val{1.0}; // window [−μ, μ] covers t = 0
    for (int k = 0;; ++k) {
        const double off = 2.0 * k + mu;      // window k ends
        const double on = 2.0 * (k + 1) - mu; // window k+1 begins
        if (off >= horizon) break;
        bp.push_back(off);
        val.push_back(0.0);
        if (on >= horizon) break;
        bp.push_back(on);
        val.push_back(1.0);
    }
    return PiecewiseConstant(std::move(bp), std::move(val));
}

/**
 * @brief Explicit 2-periodic solution of the intermittently damped wave
 * counterexample: v(t,x) = F(x+t) − F(t−x) with F the 2-periodic indicator
 * of [b', 1), b' = (1+b)/2.
 *
 * Satisfies the Dirichlet conditions exactly for every t and is supported
 * outside the damped region (0, b) whenever the damping is switched on.
 */
inline double counterexample_solution(double t, double x, double b) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("counterexample_solution: need b in (0,1)");
    const double bprime = 0.5 * (1.0 + b);
    const auto F = [bprime](double s) {
        double r = s - 2.0 * std::floor(s / 2.0); // in [0, 2)
        return (r >= bprime && r < 1.0) ? 1.0 : 0.0;
    };
    return F(x + t) - F(t - x);
}

/** @brief Damping coefficient d(x) ≥ 0 on (0,1). */
struct DampingProfile {
    std::function<double(double)> d;

    /** @brief Indicator damping d = χ_{(lo,hi)} (open interval). */
    static DampingProfile indicator(double lo, double hi) {
        if (!(0.0 <= lo && lo < hi && hi <= 1.0))
            throw std::invalid_argument("DampingProfile::indicator: need 0 <= lo < hi <= 1");
        return DampingProfile{[lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; }};
    }

    static DampingProfile constant(double value) {
        if (!(value >= 0.0))
            throw std::invalid_argument("DampingProfile::constant: damping must be nonnegative");
        return DampingProfile{[value](double) { return value; }};
    }
};

struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> energy;
};

/**
 * @brief Leapfrog simulation of v_tt = v_xx − σ(t) d(x)² v_t on (0,1) with
 * homogeneous Dirichlet data, at the unit CFL number Δt = Δx.
 *
 * The damping term is discretized semi-implicitly (time-averaged), which
 * keeps its contribution dissipative for every σ·d² ≥ 0.  Returns the energy
 * E(t) = ‖v_x‖² + ‖v_t‖² with cell-midpoint quadrature; the discrete
 * velocity is the centered difference, so one extra step past t_f is taken.
 */
inline EnergyTrace simulate_wave(const DampingProfile& damping, const PiecewiseConstant& sigma,
                                 const std::vector<double>& v0, const std::vector<double>& v1,
                                 double t_f, int N_x) {
    if (N_x < 2) throw std::invalid_argument("simulate_wave: need N_x >= 2");
    const auto nodes = static_cast<std::size_t>(N_x) + 1;
    if (v0.size() != nodes || v1.size() != nodes)
        throw std::invalid_argument("simulate_wave: initial data must live on the N_x+1 nodes");
    if (!(t_f > 0.0)) throw std::invalid_argument("simulate_wave: t_f must be positive");
    if (sigma.start() > 0.0) throw std::invalid_argument("simulate_wave: signal must start at t <= 0");

    const double dx = 1.0 / N_x;
    const double dt = dx;
    const auto steps = static_cast<std::size_t>(std::floor(t_f / dt + 1e-9));

    std::vector<double> dsq(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        const double di = damping.d(static_cast<double>(i) * dx);
        if (!(di >= 0.0)) throw std::invalid_argument("simulate_wave: damping must be nonnegative");
        dsq[i] = di * di;
    }

    std::vector<double> vm(v0), v(nodes), vp(nodes, 0.0), vt(nodes, 0.0);
    vm.front() = vm.back() = 0.0;

    // second-order start consistent with the leapfrog identity
    {
        const double s0 = sigma.value(0.0);
        v.front() = v.back() = 0.0;
        for (std::size_t i = 1; i + 1 < nodes; ++i) {
            const double lap = (vm[i + 1] - 2.0 * vm[i] + vm[i - 1]) / (dx * dx);
            v[i] = vm[i] + dt * v1[i] + 0.5 * dt * dt * (lap - s0 * dsq[i] * v1[i]);
        }
    }

    auto energy_of = [&](const std::vector<double>& u, const std::vector<double>& ut) {
        double grad = 0.0, kin = 0.0;
        for (std::size_t i = 0; i + 1 < nodes; ++i) {
            const double g = (u[i + 1] - u[i]) / dx;
            const double w = 0.5 * (ut[i] + ut[i + 1]);
            grad += g * g * dx;
            kin += w * w * dx;
        }
        return grad + kin;
    };

    EnergyTrace trace;
    trace.times.reserve(steps + 1);
    trace.energy.reserve(steps + 1);
    trace.times.push_back(0.0);
    trace.energy.push_back(energy_of(vm, v1));

    // advance; level n ranges over the computed middle level v = v^n
    for (std::size_t n = 1; n <= steps; ++n) {
        const double t_mid = static_cast<double>(n) * dt;
        const double s = sigma.value(t_mid);
        vp.front() = vp.back() = 0.0;
        for (std::size_t i = 1; i + 1 < nodes; ++i) {
            const double c = 0.5 * s * dsq[i] * dt;
            const double lap = v[i + 1] - 2.0 * v[i] + v[i - 1]; // Δt = Δx cancels the 1/dx²
            vp[i] = (2.0 * v[i] - vm[i] + lap + c * vm[i]) / (1.0 + c);
        }
        for (std::size_t i = 0; i < nodes; ++i) vt[i] = (vp[i] - vm[i]) / (2.0 * dt);
        trace.times.push_back(t_mid);
        trace.energy.push_back(energy_of(v, vt));
        vm.swap(v);
        v.swap(vp);
    }
    return trace;
}

/** @brief Node-sampled initial data (v, v_t) of the counterexample solution.
 *
 * The discrete velocity is the centered difference of the exact solution at
 * ±Δt, which makes the unit-CFL leapfrog reproduce the sampled exact solution
 * wherever the damping term vanishes along it.
 */
inline std::pair<std::vector<double>, std::vector<double>> counterexample_wave_data(double b,
                                                                                    int N_x) {
    if (N_x < 2) throw std::invalid_argument("counterexample_wave_data: need N_x >= 2");
    const auto nodes = static_cast<std::size_t>(N_x) + 1;
    const double dx = 1.0 / N_x;
    std::vector<double> v0(nodes), v1(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        const double x = static_cast<double>(i) * dx;
        v0[i] = counterexample_solution(0.0, x, b);
        v1[i] = (counterexample_solution(dx, x, b) - counterexample_solution(-dx, x, b)) /
                (2.0 * dx);
    }
    v0.front() = v0.back() = 0.0;
    v1.front() = v1.back() = 0.0;
    return {std::move(v0), std::move(v1)};
}

/**
 * @brief ∫_0^ϑ σ(t) ‖Bᵀ e^{At} y0‖² dt on a finite-dimensional surrogate.
 *
 * Composite Simpson per constant-σ piece, node count doubled until the
 * Richardson difference is below the 1e−8 target.
 */
inline double excitation_functional(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const PiecewiseConstant& sigma, const Eigen::VectorXd& y0,
                                    double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("excitation_functional: theta must be positive");
    if (A.rows() != A.cols() || A.rows() != y0.size() || B.rows() != A.rows())
        throw std::invalid_argument("excitation_functional: dimension mismatch");
    if (sigma.start() > 0.0)
        throw std::invalid_argument("excitation_functional: signal must start at t <= 0");

    const auto integrand = [&](double t) {
        const Eigen::MatrixXd expAt = (A * t).exp();
        return (B.transpose() * (expAt * y0)).squaredNorm();
    };

    // constant-σ pieces covering [0, theta]
    std::vector<std::pair<double, double>> pieces; // (t_lo, t_hi) with σ > 0
    std::vector<double> weights;
    {
        std::vector<double> cut{0.0};
        for (double b : sigma.breakpoints())
            if (b > 0.0 && b < theta) cut.push_back(b);
        cut.push_back(theta);
        std::sort(cut.begin(), cut.end());
        cut.erase(std::unique(cut.begin(), cut.end()), cut.end());
        for (std::size_t k = 0; k + 1 < cut.size(); ++k) {
            const double s = sigma.value(0.5 * (cut[k] + cut[k + 1]));
            if (s != 0.0) {
                pieces.emplace_back(cut[k], cut[k + 1]);
                weights.push_back(s);
            }
        }
    }

    double total = 0.0;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        const auto [lo, hi] = pieces[p];
        auto simpson = [&](std::size_t intervals) {
            const double h = (hi - lo) / static_cast<double>(intervals);
            double acc = integrand(lo) + integrand(hi);
            for (std::size_t i = 1; i < intervals; ++i)
                acc += integrand(lo + h * static_cast<double>(i)) * ((i % 2) ? 4.0 : 2.0);
            return acc * h / 3.0;
        };
        double prev = simpson(4);
        for (std::size_t n = 8; n <= (1u << 20); n *= 2) {
            const double cur = simpson(n);
            if (std::abs(cur - prev) <= 1e-8 * std::max(1.0, std::abs(cur))) {
                prev = cur;
                break;
            }
            prev = cur;
        }
        total += weights[p] * prev;
    }
    return total;
}

/**
 * @brief Minimal K with rank [B, AB, ..., A^K B] = dim, or nullopt if the
 * pair stays rank-deficient through K = dim−1.
 */
inline std::optional<int> kalman_index(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw std::invalid_argument("kalman_index: dimension mismatch");
    if (A.rows() > 50) throw std::invalid_argument("kalman_index: dense search limited to dim <= 50");
    const auto d = A.rows();
    const auto mcols = B.cols();
    Eigen::MatrixXd block(d, mcols * d);
    Eigen::MatrixXd power = B;
    for (Eigen::Index K = 0; K < d; ++K) {
        block.middleCols(K * mcols, mcols) = power;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
        qr.setThreshold(1e-10);
        qr.compute(block.leftCols((K + 1) * mcols));
        if (qr.rank() == d) return static_cast<int>(K);
        power = A * power;
    }
    return std::nullopt;
}

/** @brief Excitation window (a_n, b_n) with constant c_n > 0. */
struct ExcitationWindow {
    double a, b, c;
};

struct RarefiedDiagnostics {
    double sup_length = 0.0;
    std::vector<double> partial_sums;
    std::optional<std::size_t> flag_index; ///< first 1-based n with partial sum > threshold
    bool flagged = false;
};

/**
 * @brief Bookkeeping for rarefied excitation schedules: sup window length,
 * partial sums of c_n, and a divergence flag once the sums pass @p threshold.
 */
inline RarefiedDiagnostics rarefied_schedule(const std::vector<ExcitationWindow>& windows,
                                             double threshold) {
    if (windows.empty()) throw std::invalid_argument("rarefied_schedule: need at least one window");
    std::vector<ExcitationWindow> sorted(windows);
    std::sort(sorted.begin(), sorted.end(),
              [](const ExcitationWindow& u, const ExcitationWindow& w) { return u.a < w.a; });
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (!(sorted[k].b > sorted[k].a))
            throw std::invalid_argument("rarefied_schedule: window " + std::to_string(k + 1) +
                                        " is empty");
        if (!(sorted[k].c > 0.0))
            throw std::invalid_argument("rarefied_schedule: constants must be positive");
        if (k > 0 && sorted[k].a < sorted[k - 1].b)
            throw std::invalid_argument("rarefied_schedule: windows overlap");
    }
    RarefiedDiagnostics diag;
    double sum = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        diag.sup_length = std::max(diag.sup_length, windows[k].b - windows[k].a);
        sum += windows[k].c;
        diag.partial_sums.push_back(sum);
        if (!diag.flag_index && sum > threshold) diag.flag_index = k + 1;
    }
    diag.flagged = diag.flag_index.has_value();
    return diag;
}

} // namespace switchctl::excitation
