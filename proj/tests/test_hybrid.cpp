#include <catch2/catch_amalgamated.hpp>

#include <switchctl/hybrid.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <vector>

using namespace switchctl;
using namespace switchctl::hybrid;

namespace {

Mode linear_mode(Eigen::MatrixXd A) { return Mode{std::move(A), nullptr, nullptr}; }

RunningCost quadratic_cost() {
    return RunningCost{
        [](double, const Eigen::VectorXd& y) { return 0.5 * y.squaredNorm(); },
        [](double, const Eigen::VectorXd& y) { return Eigen::VectorXd(y); },
    };
}

Eigen::MatrixXd damped_rotation() {
    Eigen::MatrixXd A(2, 2);
    A << 0.0, 1.0, -2.0, -0.1;
    return A;
}

} // namespace

TEST_CASE("single linear arc matches the matrix exponential") {
    const Eigen::MatrixXd A = damped_rotation();
    HybridSystem sys(2, {linear_mode(A)});
    Eigen::VectorXd y0(2);
    y0 << 1.0, -0.5;
    const double t_f = 1.3;

    const SwitchSchedule schedule({0}, {0.0, t_f});
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0);

    const Eigen::VectorXd exact = (A * t_f).exp() * y0;
    REQUIRE((traj.y_final - exact).norm() < 1e-8);
    REQUIRE(traj.switching_cost == 0.0);
    REQUIRE(traj.running_cost == 0.0);
    REQUIRE(traj.total_cost == 0.0);

    // Dense interpolation agrees with the exponential at interior times too.
    for (double t : {0.2, 0.61, 1.1}) {
        const Eigen::VectorXd mid = traj.state(0, t);
        REQUIRE((mid - ((A * t).exp() * y0).eval()).norm() < 1e-7);
    }
}

TEST_CASE("a switch into the same mode is invisible") {
    const Eigen::MatrixXd A = damped_rotation();
    HybridSystem sys(2, {linear_mode(A)});
    sys.set_running_cost(quadratic_cost());
    Eigen::VectorXd y0(2);
    y0 << 0.8, 0.3;
    const double t_f = 1.3;

    const HybridTrajectory base = simulate_hybrid(sys, SwitchSchedule({0}, {0.0, t_f}), y0);
    for (double tau : {0.3, 0.65, 1.0}) {
        const HybridTrajectory split =
            simulate_hybrid(sys, SwitchSchedule({0, 0}, {0.0, tau, t_f}), y0);
        REQUIRE((split.y_final - base.y_final).norm() < 1e-8);
        REQUIRE(split.total_cost == Catch::Approx(base.total_cost).margin(1e-8));
        REQUIRE(split.switching_cost == 0.0);
    }
}

TEST_CASE("resets are applied exactly at the switch") {
    Eigen::MatrixXd A0 = damped_rotation();
    Eigen::MatrixXd A1(2, 2);
    A1 << -0.4, 0.0, 0.0, -0.9;
    HybridSystem sys(2, {linear_mode(A0), linear_mode(A1)});

    Eigen::MatrixXd M(2, 2);
    M << 0.0, 1.0, 1.0, 0.0;
    Eigen::VectorXd shift(2);
    shift << 0.1, -0.2;
    sys.set_reset(0, 1,
                  ResetMap{[M, shift](const Eigen::VectorXd& y) { return (M * y + shift).eval(); },
                           [M](const Eigen::VectorXd&) { return M; }});

    Eigen::VectorXd y0(2);
    y0 << 1.0, 0.25;
    const SwitchSchedule schedule({0, 1}, {0.0, 0.6, 1.4});
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0);

    REQUIRE(traj.pre_jump.size() == 1);
    REQUIRE((traj.post_jump[0] - (M * traj.pre_jump[0] + shift)).norm() < 1e-14);
    // The second arc starts from the post-jump state.
    REQUIRE((traj.state(1, 0.6) - traj.post_jump[0]).norm() < 1e-10);
}

TEST_CASE("adjoint jump rule: p- = g_y^T p+ - l_y") {
    Eigen::MatrixXd A0 = damped_rotation();
    Eigen::MatrixXd A1(2, 2);
    A1 << -0.4, 0.2, 0.0, -0.9;
    HybridSystem sys(2, {linear_mode(A0), linear_mode(A1)});
    sys.set_running_cost(quadratic_cost());

    Eigen::MatrixXd M(2, 2);
    M << 1.0, 0.3, -0.2, 0.8;
    sys.set_reset(0, 1, ResetMap{[M](const Eigen::VectorXd& y) { return (M * y).eval(); },
                                 [M](const Eigen::VectorXd&) { return M; }});
    const double c = 0.37;
    sys.set_switch_cost(0, 1,
                        SwitchCost{[c](double, const Eigen::VectorXd& y) { return c * y[0]; },
                                   [](double, const Eigen::VectorXd&) { return 0.0; },
                                   [c](double, const Eigen::VectorXd& y) {
                                       Eigen::VectorXd g = Eigen::VectorXd::Zero(y.size());
                                       g[0] = c;
                                       return g;
                                   }});

    Eigen::VectorXd y0(2);
    y0 << 1.0, -0.3;
    const SwitchSchedule schedule({0, 1}, {0.0, 0.7, 1.5});
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0);
    const HybridAdjoint adj = adjoint_hybrid(sys, schedule, traj);

    REQUIRE(adj.p_plus.size() == 1);
    Eigen::VectorXd l_y = Eigen::VectorXd::Zero(2);
    l_y[0] = c;
    const Eigen::VectorXd expected = M.transpose() * adj.p_plus[0] - l_y;
    REQUIRE((adj.p_minus[0] - expected).norm() < 1e-12);
}

TEST_CASE("scalar adjoint matches the closed form") {
    // y' = a y, l = y^2 / 2, p' = -a p + y, p(T) = 0
    // => p(t) = y0 / (2a) * (e^{a t} - e^{a (2T - t)}).
    const double a = -0.8;
    const double y0v = 1.5;
    const double T = 1.0;

    Eigen::MatrixXd A(1, 1);
    A << a;
    HybridSystem sys(1, {linear_mode(A)});
    sys.set_running_cost(quadratic_cost());

    Eigen::VectorXd y0(1);
    y0 << y0v;
    const SwitchSchedule schedule({0}, {0.0, T});
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0);
    const HybridAdjoint adj = adjoint_hybrid(sys, schedule, traj);

    const auto exact = [&](double t) {
        return y0v / (2.0 * a) * (std::exp(a * t) - std::exp(a * (2.0 * T - t)));
    };
    for (double t : {0.0, 0.3, 0.75, 1.0}) {
        const double p = adj.arcs[0].eval(t)[0];
        REQUIRE(p == Catch::Approx(exact(t)).margin(1e-7));
    }
    REQUIRE(adj.p_start[0] == Catch::Approx(exact(0.0)).margin(1e-7));

    // The running cost itself has the closed form y0^2 (e^{2aT} - 1) / (4a).
    const double phi = y0v * y0v * (std::exp(2.0 * a * T) - 1.0) / (4.0 * a);
    REQUIRE(traj.total_cost == Catch::Approx(phi).margin(1e-8));
}

TEST_CASE("grouped stationarity conditions on a coincident switch block") {
    // Three switches share t = 0.5; pushing the block {1..2} left pays
    // (sum +1 > 0) and pushing {3..3} right pays (sum -1 < 0).
    const SwitchSchedule schedule({0, 1, 0, 1}, {0.0, 0.5, 0.5, 0.5, 1.0});
    GradientReport grads;
    grads.d_tau = {-1.0, 2.0, -1.0};

    const NecessaryConditionReport report = necessary_conditions(schedule, grads);
    REQUIRE(report.verdicts.size() == 3);
    REQUIRE_FALSE(report.satisfied);

    const auto& v1 = report.verdicts[0];
    REQUIRE(v1.a == 1);
    REQUIRE(v1.b == 3);
    REQUIRE(v1.left_applicable);
    REQUIRE(v1.left_sum == Catch::Approx(-1.0));
    REQUIRE(v1.left_ok);
    REQUIRE(v1.right_applicable);
    REQUIRE(v1.right_sum == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(v1.right_ok);

    const auto& v2 = report.verdicts[1];
    REQUIRE(v2.left_sum == Catch::Approx(1.0));
    REQUIRE_FALSE(v2.left_ok);
    REQUIRE(v2.right_sum == Catch::Approx(1.0));
    REQUIRE(v2.right_ok);

    const auto& v3 = report.verdicts[2];
    REQUIRE(v3.left_sum == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(v3.left_ok);
    REQUIRE(v3.right_sum == Catch::Approx(-1.0));
    REQUIRE_FALSE(v3.right_ok);
}

TEST_CASE("isolated near-zero gradients satisfy the conditions") {
    const SwitchSchedule schedule({0, 1, 0}, {0.0, 0.3, 0.7, 1.0});
    GradientReport grads;
    grads.d_tau = {0.0, 5e-9};
    const NecessaryConditionReport report = necessary_conditions(schedule, grads, 1e-8);
    REQUIRE(report.satisfied);
    for (const auto& v : report.verdicts) {
        REQUIRE(v.a == v.b);
        REQUIRE(v.left_ok);
        REQUIRE(v.right_ok);
    }
}

TEST_CASE("mode insertion refuses inconsistent reset charts") {
    Eigen::MatrixXd A = damped_rotation();
    HybridSystem sys(2, {linear_mode(A), linear_mode(0.5 * A)});
    sys.set_running_cost(quadratic_cost());
    // g(0,1) shifts but g(1,0) is left at the identity, so the round trip
    // 0 -> 1 -> 0 is not the identity chart g(0,0).
    sys.set_reset(0, 1,
                  ResetMap{[](const Eigen::VectorXd& y) {
                               return (y + Eigen::VectorXd::Ones(y.size())).eval();
                           },
                           [](const Eigen::VectorXd& y) {
                               return Eigen::MatrixXd::Identity(y.size(), y.size()).eval();
                           }});

    Eigen::VectorXd y0(2);
    y0 << 0.6, -0.1;
    const SwitchSchedule schedule({0}, {0.0, 1.0});
    const HybridTrajectory traj = simulate_hybrid(sys, schedule, y0);
    REQUIRE_THROWS_AS(mode_insertion_gradient(sys, schedule, traj, 0.5, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(mode_insertion_gradient(sys, schedule, traj, 0.5, 7),
                      std::invalid_argument);

    // Restoring the inverse chart makes the insertion well posed again.
    sys.set_reset(1, 0,
                  ResetMap{[](const Eigen::VectorXd& y) {
                               return (y - Eigen::VectorXd::Ones(y.size())).eval();
                           },
                           [](const Eigen::VectorXd& y) {
                               return Eigen::MatrixXd::Identity(y.size(), y.size()).eval();
                           }});
    const double grad = mode_insertion_gradient(sys, schedule, traj, 0.5, 1);
    REQUIRE(std::isfinite(grad));
}

TEST_CASE("expand_schedule inserts a zero-length interval") {
    const SwitchSchedule schedule({0, 1}, {0.0, 0.4, 1.0});
    const SwitchSchedule grown = expand_schedule(schedule, 0.7, 0);
    REQUIRE(grown.modes == std::vector<int>{0, 1, 0, 1});
    REQUIRE(grown.times == std::vector<double>{0.0, 0.4, 0.7, 0.7, 1.0});
}

TEST_CASE("project_ordered performs isotonic regression then clips") {
    using vec = std::vector<double>;
    REQUIRE(project_ordered({3.0, 1.0, 2.0}, 0.0, 10.0) == vec{2.0, 2.0, 2.0});
    REQUIRE(project_ordered({1.2, 0.2}, 0.0, 1.0) == vec{0.7, 0.7});
    REQUIRE(project_ordered({-1.0, 0.5, 2.0}, 0.0, 1.0) == vec{0.0, 0.5, 1.0});
    REQUIRE(project_ordered({5.0, 1.0}, 0.0, 1.0) == vec{1.0, 1.0});
    REQUIRE(project_ordered({}, 0.0, 1.0).empty());

    // Pool-adjacent-violators always yields an ordered result within bounds.
    const vec out = project_ordered({0.9, 0.1, 0.5, 0.4, 0.8, -0.2}, 0.0, 1.0);
    for (std::size_t i = 0; i + 1 < out.size(); ++i) REQUIRE(out[i] <= out[i + 1]);
    for (double v : out) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("optimize_schedule descends monotonically") {
    const int d = 6;
    HybridSystem sys(d, {linear_mode(unstable_transport(d, 1.0, 0.8)),
                         linear_mode(diffusion(d, 0.15))});
    sys.set_running_cost(quadratic_cost());

    Eigen::VectorXd y0(d);
    for (int i = 0; i < d; ++i) y0[i] = std::sin(std::numbers::pi * (i + 0.5) / d);

    const SwitchSchedule start({0, 1}, {0.0, 0.7, 1.0});
    OptimizeOptions opts;
    opts.max_outer = 3;
    opts.insertion_grid = 8;
    const OptimizeReport report = optimize_schedule(sys, start, y0, opts);

    REQUIRE_FALSE(report.phi_history.empty());
    for (std::size_t i = 0; i + 1 < report.phi_history.size(); ++i)
        REQUIRE(report.phi_history[i + 1] <= report.phi_history[i] + 1e-12);
    REQUIRE(report.phi == Catch::Approx(report.phi_history.back()));
    REQUIRE_FALSE(report.stopping_reason.empty());

    // The reported objective is reproducible from the reported schedule.
    const SwitchSchedule final_schedule(report.modes, report.times);
    const HybridTrajectory check = simulate_hybrid(sys, final_schedule, y0);
    REQUIRE(check.total_cost == Catch::Approx(report.phi).margin(1e-8));

    // Starting from the unstable mode, descent should not end worse than the
    // all-diffusion schedule it can reach by driving tau to zero.
    const HybridTrajectory all_diffusion =
        simulate_hybrid(sys, SwitchSchedule({0, 1}, {0.0, 0.0, 1.0}), y0);
    REQUIRE(report.phi <= all_diffusion.total_cost + 1e-8);
}

TEST_CASE("optimize_schedule leaves a stationary schedule alone") {
    const int d = 5;
    HybridSystem sys(d, {linear_mode(diffusion(d, 0.2)),
                         linear_mode(unstable_transport(d, 1.0, 1.5))});
    sys.set_running_cost(quadratic_cost());

    Eigen::VectorXd y0 = Eigen::VectorXd::Ones(d);
    const SwitchSchedule start({0}, {0.0, 1.0});
    OptimizeOptions opts;
    opts.max_outer = 2;
    opts.insertion_grid = 6;
    const OptimizeReport report = optimize_schedule(sys, start, y0, opts);

    // Pure diffusion beats any insertion of the amplifying mode, so the
    // schedule survives unchanged.
    REQUIRE(report.modes == std::vector<int>{0});
    REQUIRE(report.times == std::vector<double>{0.0, 1.0});
}

TEST_CASE("schedule validation rejects malformed inputs") {
    REQUIRE_THROWS_AS(SwitchSchedule({0, 1}, {0.0, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(SwitchSchedule({0, 1}, {0.0, 0.8, 0.5}), std::invalid_argument);
    REQUIRE_NOTHROW(SwitchSchedule({0, 1, 0}, {0.0, 0.5, 0.5, 1.0}));

    HybridSystem sys(2, {linear_mode(damped_rotation())});
    const SwitchSchedule bad_mode({0, 1}, {0.0, 0.5, 1.0});
    REQUIRE_THROWS_AS(bad_mode.validate_against(sys), std::invalid_argument);
    Eigen::VectorXd wrong(3);
    wrong << 1.0, 2.0, 3.0;
    REQUIRE_THROWS_AS(simulate_hybrid(sys, SwitchSchedule({0}, {0.0, 1.0}), wrong),
                      std::invalid_argument);
}

TEST_CASE("discretization factories have the advertised structure") {
    const int d = 5;
    const double c = 1.0, gamma = 0.7;
    const Eigen::MatrixXd T = unstable_transport(d, c, gamma);
    // Row sums equal gamma: constants are amplified at rate gamma.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
    REQUIRE((T * ones - gamma * ones).norm() < 1e-12);
    REQUIRE(T(0, d - 1) == Catch::Approx(c * d));
    REQUIRE(T(0, 0) == Catch::Approx(-c * d + gamma));
    REQUIRE_THROWS_AS(unstable_transport(1, 1.0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(unstable_transport(4, 0.0, 0.5), std::invalid_argument);

    const double nu = 0.1;
    const Eigen::MatrixXd D = diffusion(d, nu);
    REQUIRE((D - D.transpose()).norm() == 0.0);
    const double w = nu * (d + 1) * (d + 1);
    REQUIRE(D(0, 0) == Catch::Approx(-2.0 * w));
    REQUIRE(D(0, 1) == Catch::Approx(w));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    REQUIRE(es.eigenvalues().maxCoeff() < 0.0);
    REQUIRE_THROWS_AS(diffusion(3, -0.1), std::invalid_argument);
}
