// Finite-difference oracles for the switched-system gradients.
//
// The reference derivatives below come from the forward solver only (central
// differences of the cost in the switching times; one-sided differences of
// the expanded cost for insertions), frozen before the adjoint-based
// gradients were written.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support/random_hybrid.hpp"
#include "switchctl/hybrid.hpp"
#include "switchctl/rng.hpp"

namespace hyb = switchctl::hybrid;
using switchctl::OdeOptions;
using switchctl::Rng;

namespace {

OdeOptions tight_tolerances() {
    OdeOptions opt;
    opt.rtol = 1e-12;
    opt.atol = 1e-14;
    return opt;
}

double phi_with_time(const testsupport::RandomHybridInstance& inst, std::size_t k, double tau,
                     const OdeOptions& opt) {
    std::vector<double> times = inst.schedule.times;
    times[k + 1] = tau;
    return hyb::evaluate_cost(inst.sys, hyb::SwitchSchedule(inst.schedule.modes, times), inst.y0,
                              opt);
}

} // namespace

TEST_CASE("switch-time gradient matches central differences on 20 random instances",
          "[hybrid][oracle]") {
    const OdeOptions opt = tight_tolerances();
    const double h = 1e-5;
    Rng rng(771253); // fixed: the instances are part of the test contract

    int meaningful_probes = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = testsupport::make_random_instance(rng);
        const auto traj = hyb::simulate_hybrid(inst.sys, inst.schedule, inst.y0, opt);
        REQUIRE_FALSE(traj.truncated);
        const auto adj = hyb::adjoint_hybrid(inst.sys, inst.schedule, traj, opt);
        const auto grads = hyb::switch_time_gradient(inst.sys, inst.schedule, traj, adj);

        for (std::size_t k = 0; k < inst.schedule.switch_count(); ++k) {
            const double tau = inst.schedule.times[k + 1];
            const double fd =
                (phi_with_time(inst, k, tau + h, opt) - phi_with_time(inst, k, tau - h, opt)) /
                (2.0 * h);
            const double denom = std::max(std::abs(fd), 0.1);
            const double rel = std::abs(grads.d_tau[k] - fd) / denom;
            INFO("trial=" << trial << " k=" << k << " fd=" << fd << " adj=" << grads.d_tau[k]);
            REQUIRE(rel <= 1e-5);
            if (std::abs(fd) >= 0.1) ++meaningful_probes;
        }
    }
    // the ensemble must actually exercise the formula, not compare zeros
    REQUIRE(meaningful_probes >= 20);
}

TEST_CASE("mode-insertion gradient matches one-sided differences on 10 random instances",
          "[hybrid][oracle]") {
    const OdeOptions opt = tight_tolerances();
    const double h = 1e-4;
    Rng rng(445019);

    int meaningful_probes = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = testsupport::make_random_instance(rng, 2);
        const auto traj = hyb::simulate_hybrid(inst.sys, inst.schedule, inst.y0, opt);
        REQUIRE_FALSE(traj.truncated);

        // candidate insertion point away from existing switches
        double t_hat = 0.0;
        for (int attempt = 0; attempt < 100; ++attempt) {
            t_hat = rng.uniform(0.1, 0.9);
            bool clear = true;
            for (std::size_t k = 1; k + 1 < inst.schedule.times.size(); ++k)
                if (std::abs(t_hat - inst.schedule.times[k]) < 0.05) clear = false;
            if (clear) break;
        }
        const std::size_t m = [&] {
            std::size_t n = 0;
            while (n + 1 < inst.schedule.modes.size() && inst.schedule.times[n + 1] <= t_hat) ++n;
            return n;
        }();
        const int active = inst.schedule.modes[m];
        const int j_hat = (active + 1) % inst.sys.mode_count();

        const double g = hyb::mode_insertion_gradient(inst.sys, inst.schedule, traj, t_hat, j_hat, opt);

        const auto expanded = hyb::expand_schedule(inst.schedule, t_hat, j_hat);
        auto expanded_cost = [&](double closing) {
            std::vector<double> times = expanded.times;
            times[m + 2] = closing;
            return hyb::evaluate_cost(inst.sys, hyb::SwitchSchedule(expanded.modes, times),
                                      inst.y0, opt);
        };
        const double fd = (expanded_cost(t_hat + h) - expanded_cost(t_hat)) / h;
        const double denom = std::max(std::abs(fd), 0.1);
        const double rel = std::abs(g - fd) / denom;
        INFO("trial=" << trial << " t_hat=" << t_hat << " j_hat=" << j_hat << " fd=" << fd
                      << " insertion=" << g);
        REQUIRE(rel <= 1e-3);
        if (std::abs(fd) >= 0.1) ++meaningful_probes;
    }
    REQUIRE(meaningful_probes >= 5);
}

TEST_CASE("inserting the active mode is a zero-gradient no-op", "[hybrid][oracle]") {
    const OdeOptions opt = tight_tolerances();
    Rng rng(330117);
    const auto inst = testsupport::make_random_instance(rng, 2);
    const auto traj = hyb::simulate_hybrid(inst.sys, inst.schedule, inst.y0, opt);
    REQUIRE_FALSE(traj.truncated);
    const double t_hat = 0.5 * (inst.schedule.times[0] + inst.schedule.times[1]);
    const int active = inst.schedule.modes[0];
    const double g = hyb::mode_insertion_gradient(inst.sys, inst.schedule, traj, t_hat, active, opt);
    REQUIRE(std::abs(g) <= 1e-8);
}
