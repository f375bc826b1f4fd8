#pragma once

// Randomized switched-system instances for the gradient test suites.
//
// Construction choices that matter for the checks downstream:
//  - reset maps come from per-mode affine charts T_i(y) = M_i y + m_i as
//    g(i,j) = T_j ∘ T_i⁻¹, so the composition rule holds by construction and
//    g(i,i) is the identity;
//  - switching costs are state-dependent (quadratic in y, linear in τ), which
//    exercises the chain-rule term that state-independent costs would hide;
//  - perturbations f(y) = C y + ε ⊙ sin(y) are smooth with bounded
//    derivatives, keeping finite differences trustworthy.

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "switchctl/hybrid.hpp"
#include "switchctl/rng.hpp"

namespace testsupport {

struct RandomHybridInstance {
    switchctl::hybrid::HybridSystem sys;
    switchctl::hybrid::SwitchSchedule schedule;
    Eigen::VectorXd y0;
};

inline Eigen::MatrixXd random_matrix(switchctl::Rng& rng, int rows, int cols, double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

inline Eigen::VectorXd random_vector(switchctl::Rng& rng, int n, double scale) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
    return v;
}

inline RandomHybridInstance make_random_instance(switchctl::Rng& rng, int max_switches = 4) {
    namespace hyb = switchctl::hybrid;
    const int d = 2 + static_cast<int>(rng.uniform_index(7)); // 2..8
    const int n_modes = 2 + static_cast<int>(rng.uniform_index(2)); // 2..3
    const double t_f = 1.0;

    std::vector<hyb::Mode> modes;
    for (int j = 0; j < n_modes; ++j) {
        hyb::Mode mode;
        mode.A = random_matrix(rng, d, d, 0.8 / std::sqrt(static_cast<double>(d)));
        const Eigen::MatrixXd C = random_matrix(rng, d, d, 0.3 / std::sqrt(static_cast<double>(d)));
        const Eigen::VectorXd eps = random_vector(rng, d, 0.2);
        mode.f = [C, eps](double, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
            out = C * y + eps.cwiseProduct(y.array().sin().matrix());
        };
        mode.f_jacobian = [C, eps](double, const Eigen::VectorXd& y, Eigen::MatrixXd& out) {
            out = C;
            out.diagonal() += eps.cwiseProduct(y.array().cos().matrix());
        };
        modes.push_back(std::move(mode));
    }
    hyb::HybridSystem sys(d, std::move(modes));

    // affine charts -> resets satisfying the composition rule exactly
    std::vector<Eigen::MatrixXd> chart_m;
    std::vector<Eigen::VectorXd> chart_b;
    for (int j = 0; j < n_modes; ++j) {
        chart_m.push_back(Eigen::MatrixXd::Identity(d, d) +
                          random_matrix(rng, d, d, 0.1 / std::sqrt(static_cast<double>(d))));
        chart_b.push_back(random_vector(rng, d, 0.1));
    }
    for (int i = 0; i < n_modes; ++i) {
        const Eigen::MatrixXd mi_inv = chart_m[static_cast<std::size_t>(i)].inverse();
        for (int j = 0; j < n_modes; ++j) {
            if (i == j) continue;
            const Eigen::MatrixXd gj = chart_m[static_cast<std::size_t>(j)] * mi_inv;
            const Eigen::VectorXd bj = chart_b[static_cast<std::size_t>(j)] -
                                       gj * chart_b[static_cast<std::size_t>(i)];
            hyb::ResetMap reset;
            reset.g = [gj, bj](const Eigen::VectorXd& y) { return (gj * y + bj).eval(); };
            reset.jacobian = [gj](const Eigen::VectorXd&) { return gj; };
            sys.set_reset(i, j, std::move(reset));

            const Eigen::MatrixXd s = random_matrix(rng, d, d, 0.1);
            const Eigen::MatrixXd w_quad = s + s.transpose();
            const Eigen::VectorXd w_lin = random_vector(rng, d, 0.1);
            const double rho = 0.1 * rng.normal();
            hyb::SwitchCost cost;
            cost.value = [w_quad, w_lin, rho](double tau, const Eigen::VectorXd& y) {
                return 0.5 * y.dot(w_quad * y) + w_lin.dot(y) + rho * tau;
            };
            cost.d_tau = [rho](double, const Eigen::VectorXd&) { return rho; };
            cost.d_y = [w_quad, w_lin](double, const Eigen::VectorXd& y) {
                return (w_quad * y + w_lin).eval();
            };
            sys.set_switch_cost(i, j, std::move(cost));
        }
    }

    hyb::RunningCost running;
    running.value = [](double, const Eigen::VectorXd& y) { return 0.5 * y.squaredNorm(); };
    running.gradient = [](double, const Eigen::VectorXd& y) { return y; };
    sys.set_running_cost(std::move(running));

    // separated interior switch times and a non-repeating mode word
    const int n_switch = 1 + static_cast<int>(rng.uniform_index(
                                 static_cast<std::size_t>(max_switches)));
    std::vector<double> interior;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        interior.clear();
        for (int k = 0; k < n_switch; ++k) interior.push_back(rng.uniform(0.1, 0.9));
        std::sort(interior.begin(), interior.end());
        bool ok = true;
        for (int k = 0; k + 1 < n_switch; ++k)
            if (interior[static_cast<std::size_t>(k) + 1] - interior[static_cast<std::size_t>(k)] <
                0.05)
                ok = false;
        if (ok) break;
        interior.clear();
    }
    if (interior.empty()) interior.push_back(0.5);

    std::vector<int> word{static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_modes)))};
    for (std::size_t k = 0; k < interior.size(); ++k) {
        const int step = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_modes - 1)));
        word.push_back((word.back() + step) % n_modes);
    }
    std::vector<double> times{0.0};
    times.insert(times.end(), interior.begin(), interior.end());
    times.push_back(t_f);

    return RandomHybridInstance{std::move(sys),
                                hyb::SwitchSchedule(std::move(word), std::move(times)),
                                random_vector(rng, d, 1.0 / std::sqrt(static_cast<double>(d)))};
}

} // namespace testsupport
