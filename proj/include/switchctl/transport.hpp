#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "switchctl/core.hpp"
#include "switchctl/signals.hpp"

namespace switchctl::transport {

/**
 * @brief One mode of a switched semilinear transport system
 * y_t + Λ(x) y_x = B y with reflecting boundary coupling.
 *
 * Λ is diagonal with entries lambda[i](x); the first m entries must be
 * negative (left-moving), the rest positive.  G_L maps the outgoing trace at
 * x=a to the incoming one, G_R likewise at x=b.  full_velocity optionally
 * carries a non-diagonal velocity matrix for the commutativity diagnostic of
 * the non-diagonal extension; the simulator itself stays diagonal.
 */
struct TransportMode {
    std::vector<std::function<double(double)>> lambda;
    Eigen::MatrixXd B;
    Eigen::MatrixXd G_L; ///< (n−m)×m
    Eigen::MatrixXd G_R; ///< m×(n−m)
    std::function<Eigen::MatrixXd(double)> full_velocity; ///< optional, diagnostics only
};

class TransportSystem {
public:
    TransportSystem(double a, double b, int n, int m, std::vector<TransportMode> modes)
        : a_(a), b_(b), n_(n), m_(m), modes_(std::move(modes)) {
        if (!(b_ > a_)) throw std::invalid_argument("TransportSystem: need b > a");
        if (n_ < 1 || m_ < 1 || m_ > n_)
            throw std::invalid_argument("TransportSystem: need 1 <= m <= n");
        if (modes_.empty()) throw std::invalid_argument("TransportSystem: need at least one mode");
        for (std::size_t j = 0; j < modes_.size(); ++j) {
            const auto& mode = modes_[j];
            const std::string tag = "TransportSystem mode " + std::to_string(j + 1);
            if (static_cast<int>(mode.lambda.size()) != n_)
                throw std::invalid_argument(tag + ": need n speed entries");
            if (mode.B.rows() != n_ || mode.B.cols() != n_)
                throw std::invalid_argument(tag + ": B must be n x n");
            if (mode.G_L.rows() != n_ - m_ || mode.G_L.cols() != m_)
                throw std::invalid_argument(tag + ": G_L must be (n-m) x m");
            if (mode.G_R.rows() != m_ || mode.G_R.cols() != n_ - m_)
                throw std::invalid_argument(tag + ": G_R must be m x (n-m)");
        }
    }

    /** @brief Convenience constructor for constant diagonal speeds. */
    static TransportMode constant_mode(const std::vector<double>& speeds, Eigen::MatrixXd B,
                                       Eigen::MatrixXd G_L, Eigen::MatrixXd G_R) {
        TransportMode mode;
        for (double s : speeds) mode.lambda.push_back([s](double) { return s; });
        mode.B = std::move(B);
        mode.G_L = std::move(G_L);
        mode.G_R = std::move(G_R);
        return mode;
    }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    int n() const noexcept { return n_; }
    int m() const noexcept { return m_; }
    std::size_t mode_count() const noexcept { return modes_.size(); }
    const TransportMode& mode(std::size_t j) const { return modes_.at(j); }

private:
    double a_, b_;
    int n_, m_;
    std::vector<TransportMode> modes_;
};

/** @brief State on the N_x+1 grid nodes of [a,b]; row i of y is component i. */
struct StateField {
    std::vector<double> x;
    Eigen::MatrixXd y; ///< n × (N_x+1)
    double time = 0.0;
};

/** @brief Sample per-component initial data onto the simulation grid. */
inline StateField sample_field(const TransportSystem& sys, int N_x,
                               const std::function<double(int component, double x)>& f) {
    if (N_x < 2) throw std::invalid_argument("sample_field: need N_x >= 2");
    StateField field;
    field.x.resize(static_cast<std::size_t>(N_x) + 1);
    field.y.resize(sys.n(), N_x + 1);
    const double dx = (sys.b() - sys.a()) / N_x;
    for (int i = 0; i <= N_x; ++i) {
        const double xi = sys.a() + i * dx;
        field.x[static_cast<std::size_t>(i)] = xi;
        for (int c = 0; c < sys.n(); ++c) field.y(c, i) = f(c, xi);
    }
    return field;
}

struct Trajectory {
    std::vector<double> x;
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> states;
    signals::SwitchingSignal sigma{std::vector<double>{0.0}, std::vector<int>{1}};
};

struct HyperbolicityReport {
    bool ok = true;
    int mode = 0;     ///< 1-based mode of the first violation
    double x = 0.0;   ///< sample location of the first violation
    std::string reason;
};

/**
 * @brief Check strict hyperbolicity λ_1 < ... < λ_m < 0 < λ_{m+1} < ... < λ_n
 * on sample_count uniformly spaced points of [a,b].
 */
inline HyperbolicityReport check_hyperbolicity(const TransportSystem& sys, int sample_count) {
    if (sample_count < 2) throw std::invalid_argument("check_hyperbolicity: need sample_count >= 2");
    HyperbolicityReport report;
    for (std::size_t j = 0; j < sys.mode_count(); ++j) {
        for (int s = 0; s < sample_count; ++s) {
            const double x =
                sys.a() + (sys.b() - sys.a()) * static_cast<double>(s) / (sample_count - 1);
            double prev = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < sys.n(); ++c) {
                const double lam = sys.mode(j).lambda[static_cast<std::size_t>(c)](x);
                const bool want_negative = c < sys.m();
                if (!(lam > prev) || (want_negative && !(lam < 0.0)) ||
                    (!want_negative && !(lam > 0.0))) {
                    report.ok = false;
                    report.mode = static_cast<int>(j) + 1;
                    report.x = x;
                    report.reason = "speed ordering violated at component " + std::to_string(c + 1);
                    return report;
                }
                prev = lam;
            }
        }
    }
    return report;
}

/** @brief Velocity matrices of all mode pairs commute at every sampled x. */
inline bool commutativity_check(const TransportSystem& sys, int sample_count) {
    if (sample_count < 1) throw std::invalid_argument("commutativity_check: need sample_count >= 1");
    auto matrix_at = [&](std::size_t j, double x) {
        const auto& mode = sys.mode(j);
        if (mode.full_velocity) return mode.full_velocity(x);
        Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(sys.n(), sys.n());
        for (int c = 0; c < sys.n(); ++c) lam(c, c) = mode.lambda[static_cast<std::size_t>(c)](x);
        return lam;
    };
    for (std::size_t j = 0; j < sys.mode_count(); ++j)
        for (std::size_t jp = j + 1; jp < sys.mode_count(); ++jp)
            for (int s = 0; s < sample_count; ++s) {
                const double x = (sample_count == 1)
                                     ? sys.a()
                                     : sys.a() + (sys.b() - sys.a()) * static_cast<double>(s) /
                                                     (sample_count - 1);
                const Eigen::MatrixXd A = matrix_at(j, x), B = matrix_at(jp, x);
                const double scale = 1.0 + A.cwiseAbs().maxCoeff() * B.cwiseAbs().maxCoeff();
                if (((A * B - B * A).cwiseAbs().maxCoeff()) > 1e-12 * scale) return false;
            }
    return true;
}

namespace detail {

/** Power iteration for the spectral radius of a nonnegative matrix.
 *  Shifted by +I so antidiagonal spectra (±r pairs) converge as well. */
inline double nonnegative_spectral_radius(const Eigen::MatrixXd& M, double tol = 1e-12) {
    const auto n = M.rows();
    if (n == 0) return 0.0;
    Eigen::MatrixXd shifted = M + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    double estimate = 0.0;
    for (int iter = 0; iter < 1000000; ++iter) {
        Eigen::VectorXd y = shifted * x;
        const double norm = y.cwiseAbs().maxCoeff();
        if (norm == 0.0) return 0.0;
        y /= norm;
        if (iter > 0 && std::abs(norm - estimate) <= tol * std::max(1.0, norm)) return norm - 1.0;
        estimate = norm;
        x.swap(y);
    }
    throw numerical_error("nonnegative_spectral_radius: power method did not converge");
}

} // namespace detail

struct PairRadius {
    int j = 0;       ///< mode of G_L (1-based)
    int jp = 0;      ///< mode of G_R (1-based)
    double rho = 0.0;
    double product = 0.0; ///< |G_R||G_L| in the scalar case, rho² otherwise
};

/**
 * @brief Stability certificate: max over ordered mode pairs (j, j') of the
 * spectral radius of [0 |G_R^{j'}|; |G_L^{j}| 0].
 *
 * The scalar reflection case m = n−m = 1 uses the closed form
 * ρ = sqrt(|G_R^{j'}|·|G_L^{j}|); `product` reports |G_R||G_L| itself, the
 * quantity usually quoted alongside such certificates.  ‖B^j‖_∞ is reported
 * for the smallness assessment that the certificate leaves to the caller.
 */
struct StabilityCertificate {
    double rho_max = 0.0;
    bool passes = false;
    double product_max = 0.0;
    std::vector<PairRadius> pairs;
    std::vector<double> b_inf_norms;
};

inline StabilityCertificate spectral_radius_condition(const TransportSystem& sys) {
    StabilityCertificate cert;
    const int m = sys.m(), n = sys.n();
    for (std::size_t j = 0; j < sys.mode_count(); ++j)
        cert.b_inf_norms.push_back(sys.mode(j).B.cwiseAbs().rowwise().sum().maxCoeff());
    for (std::size_t j = 0; j < sys.mode_count(); ++j) {
        for (std::size_t jp = 0; jp < sys.mode_count(); ++jp) {
            PairRadius row;
            row.j = static_cast<int>(j) + 1;
            row.jp = static_cast<int>(jp) + 1;
            const Eigen::MatrixXd GL = sys.mode(j).G_L.cwiseAbs();
            const Eigen::MatrixXd GR = sys.mode(jp).G_R.cwiseAbs();
            if (m == 1 && n - m == 1) {
                row.product = GR(0, 0) * GL(0, 0);
                row.rho = std::sqrt(row.product);
            } else {
                Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
                M.topRightCorner(m, n - m) = GR;
                M.bottomLeftCorner(n - m, m) = GL;
                row.rho = detail::nonnegative_spectral_radius(M);
                row.product = row.rho * row.rho;
            }
            cert.rho_max = std::max(cert.rho_max, row.rho);
            cert.product_max = std::max(cert.product_max, row.product);
            cert.pairs.push_back(row);
        }
    }
    cert.passes = cert.rho_max < 1.0;
    return cert;
}

/**
 * @brief Two-step (Richtmyer) Lax–Friedrichs simulation of
 * y_t + Λ^{σ(t)}(x) y_x = B^{σ(t)} y with reflecting boundary closure.
 *
 * Interior update: half-step states at cell midpoints, then a full leapfrog
 * step; boundary nodes use first-order one-sided (upwind) updates for the
 * outgoing components, after which the incoming traces are imposed as
 * y_II(a) = G_L y_I(a) and y_I(b) = G_R y_II(b).  Switching times are snapped
 * exactly onto simulation steps by shortening the step.
 */
inline Trajectory simulate(const TransportSystem& sys, const signals::SwitchingSignal& sigma,
                           const StateField& y0, double t_f, int N_x, double cfl) {
    if (N_x < 2) throw std::invalid_argument("simulate: need N_x >= 2");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("simulate: need cfl in (0,1]");
    if (!(t_f > 0.0)) throw std::invalid_argument("simulate: need t_f > 0");
    if (sigma.start() > 0.0)
        throw std::invalid_argument("simulate: switching signal undefined at t = 0");
    const auto hyp = check_hyperbolicity(sys, 2 * N_x + 1);
    if (!hyp.ok)
        throw std::invalid_argument("simulate: system is not strictly hyperbolic (" + hyp.reason +
                                    ")");
    if (y0.y.rows() != sys.n() || y0.y.cols() != N_x + 1)
        throw std::invalid_argument("simulate: initial field does not match the grid");

    const int n = sys.n(), m = sys.m();
    const double dx = (sys.b() - sys.a()) / N_x;

    // precompute speeds at the nodes and midpoints for every mode
    std::vector<Eigen::MatrixXd> lam_node(sys.mode_count(), Eigen::MatrixXd(n, N_x + 1));
    std::vector<Eigen::MatrixXd> lam_mid(sys.mode_count(), Eigen::MatrixXd(n, N_x));
    double lam_max = 0.0;
    for (std::size_t j = 0; j < sys.mode_count(); ++j)
        for (int c = 0; c < n; ++c) {
            const auto& lam = sys.mode(j).lambda[static_cast<std::size_t>(c)];
            for (int i = 0; i <= N_x; ++i) {
                lam_node[j](c, i) = lam(sys.a() + i * dx);
                lam_max = std::max(lam_max, std::abs(lam_node[j](c, i)));
            }
            for (int i = 0; i < N_x; ++i) {
                lam_mid[j](c, i) = lam(sys.a() + (i + 0.5) * dx);
                lam_max = std::max(lam_max, std::abs(lam_mid[j](c, i)));
            }
        }
    const double dt_base = cfl * dx / lam_max;

    // segment the horizon at the switching times
    std::vector<double> seg{0.0};
    for (double tau : sigma.switch_times())
        if (tau > 0.0 && tau < t_f && tau > seg.back()) seg.push_back(tau);
    seg.push_back(t_f);

    Trajectory traj;
    traj.x = y0.x;
    traj.sigma = sigma;
    traj.times.push_back(0.0);
    traj.states.push_back(y0.y);

    Eigen::MatrixXd y = y0.y, half(n, N_x), ynew(n, N_x + 1);
    Eigen::VectorXd avg(n), source(n); // hoisted: no per-cell allocations in the hot loop
    for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
        const double s0 = seg[s], s1 = seg[s + 1];
        const std::size_t j = static_cast<std::size_t>(sigma.mode_at(0.5 * (s0 + s1)) - 1);
        if (j >= sys.mode_count())
            throw std::invalid_argument("simulate: signal uses mode outside the system");
        const auto& mode = sys.mode(j);
        const auto steps = static_cast<std::size_t>(std::ceil((s1 - s0) / dt_base - 1e-9));
        const double h = (s1 - s0) / static_cast<double>(steps);
        for (std::size_t step = 0; step < steps; ++step) {
            const double t = s0 + h * static_cast<double>(step);
            // half step at midpoints
            for (int i = 0; i < N_x; ++i) {
                avg = 0.5 * (y.col(i) + y.col(i + 1));
                source.noalias() = mode.B * avg;
                for (int c = 0; c < n; ++c)
                    half(c, i) = avg(c) -
                                 (h / (2.0 * dx)) * lam_mid[j](c, i) * (y(c, i + 1) - y(c, i)) +
                                 0.5 * h * source(c);
            }
            // full step at interior nodes
            for (int i = 1; i < N_x; ++i) {
                avg = 0.5 * (half.col(i - 1) + half.col(i));
                source.noalias() = mode.B * avg;
                for (int c = 0; c < n; ++c)
                    ynew(c, i) = y(c, i) -
                                 (h / dx) * lam_node[j](c, i) * (half(c, i) - half(c, i - 1)) +
                                 h * source(c);
            }
            // one-sided updates for the outgoing boundary components
            source.noalias() = mode.B * y.col(0);
            for (int c = 0; c < m; ++c) // λ_c < 0: outgoing at x=a
                ynew(c, 0) = y(c, 0) - (h / dx) * lam_node[j](c, 0) * (y(c, 1) - y(c, 0)) +
                             h * source(c);
            source.noalias() = mode.B * y.col(N_x);
            for (int c = m; c < n; ++c) // λ_c > 0: outgoing at x=b
                ynew(c, N_x) = y(c, N_x) -
                               (h / dx) * lam_node[j](c, N_x) * (y(c, N_x) - y(c, N_x - 1)) +
                               h * source(c);
            // incoming traces from the reflection matrices
            ynew.col(0).tail(n - m) = mode.G_L * ynew.col(0).head(m);
            ynew.col(N_x).head(m) = mode.G_R * ynew.col(N_x).tail(n - m);

            y.swap(ynew);
            const double t_next = (step + 1 == steps) ? s1 : t + h;
            traj.times.push_back(t_next);
            traj.states.push_back(y);
            if (!y.allFinite()) throw numerical_error("simulate: state became non-finite");
        }
    }
    return traj;
}

/** @brief (t, ‖y(t)‖_∞) per stored snapshot. */
inline std::vector<std::pair<double, double>> sup_norm_series(const Trajectory& traj) {
    std::vector<std::pair<double, double>> out;
    out.reserve(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        out.emplace_back(traj.times[k],
                         traj.states[k].size() ? traj.states[k].cwiseAbs().maxCoeff() : 0.0);
    return out;
}

struct DecayFit {
    double K_fit = 1.0;
    double mu_fit = 0.0;
    double residual = 0.0; ///< RMS of log-envelope minus fitted line
};

/**
 * @brief Least-squares exponential envelope fit ‖y(t)‖ ≈ K·e^{−μt}·y0_norm.
 *
 * Fits a line to the log of the running-maximum envelope (max over the
 * suffix), so oscillating decay profiles are fitted on their peaks;
 * K_fit = exp(intercept)/y0_norm is clamped to ≥ 1.
 */
inline DecayFit fit_decay(const std::vector<std::pair<double, double>>& series,
                          double y0_norm = 1.0) {
    if (series.size() < 3) throw std::invalid_argument("fit_decay: need at least 3 samples");
    if (!(y0_norm > 0.0)) throw std::invalid_argument("fit_decay: y0_norm must be positive");
    std::vector<double> env(series.size());
    double running = -std::numeric_limits<double>::infinity();
    for (std::size_t k = series.size(); k-- > 0;) {
        if (!(series[k].second > 0.0))
            throw std::invalid_argument("fit_decay: series values must be positive");
        running = std::max(running, series[k].second);
        env[k] = running;
    }
    double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
    const auto n = static_cast<double>(series.size());
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double t = series[k].first, v = std::log(env[k]);
        st += t;
        sv += v;
        stt += t * t;
        stv += t * v;
    }
    const double denom = n * stt - st * st;
    if (denom <= 0.0) throw std::invalid_argument("fit_decay: degenerate time samples");
    const double slope = (n * stv - st * sv) / denom;
    const double intercept = (sv - slope * st) / n;
    DecayFit fit;
    fit.mu_fit = -slope;
    fit.K_fit = std::max(std::exp(intercept) / y0_norm, 1.0);
    double ss = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double r = std::log(env[k]) - (intercept + slope * series[k].first);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

/**
 * @brief Envelope K·e^{−μt} (y0_norm = 1) guaranteed to dominate every sample
 * of every series: slope from a pooled envelope fit, intercept lifted by the
 * worst residual.
 */
inline DecayFit dominating_envelope(const std::vector<std::vector<std::pair<double, double>>>& all) {
    std::vector<std::pair<double, double>> pooled;
    for (const auto& series : all) {
        if (series.size() < 3)
            throw std::invalid_argument("dominating_envelope: need at least 3 samples per series");
        std::vector<double> env(series.size());
        double running = -std::numeric_limits<double>::infinity();
        for (std::size_t k = series.size(); k-- > 0;) {
            if (!(series[k].second > 0.0))
                throw std::invalid_argument("dominating_envelope: series values must be positive");
            running = std::max(running, series[k].second);
            env[k] = running;
        }
        for (std::size_t k = 0; k < series.size(); ++k)
            pooled.emplace_back(series[k].first, env[k]);
    }
    if (pooled.size() < 3) throw std::invalid_argument("dominating_envelope: no samples");
    double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
    const auto n = static_cast<double>(pooled.size());
    for (const auto& [t, v] : pooled) {
        const double lv = std::log(v);
        st += t;
        sv += lv;
        stt += t * t;
        stv += t * lv;
    }
    const double denom = n * stt - st * st;
    if (denom <= 0.0) throw std::invalid_argument("dominating_envelope: degenerate time samples");
    const double slope = (n * stv - st * sv) / denom;
    double intercept = (sv - slope * st) / n;
    double lift = 0.0;
    for (const auto& series : all)
        for (const auto& [t, v] : series)
            lift = std::max(lift, std::log(v) - (intercept + slope * t));
    intercept += lift;
    DecayFit fit;
    fit.mu_fit = -slope;
    fit.K_fit = std::exp(intercept);
    fit.residual = lift;
    return fit;
}

} // namespace switchctl::transport
