#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "switchctl/csv.hpp"
#include "switchctl/grid.hpp"
#include "switchctl/rng.hpp"

namespace switchctl::signals {

/** @brief Finite mode set with labels 1..count. */
struct ModeSet {
    explicit ModeSet(int count_) : count(count_) {
        if (count < 1) throw std::invalid_argument("ModeSet: count must be >= 1");
    }
    int count;
};

/**
 * @brief Relaxed control: per grid cell a convex-combination vector
 * β ∈ [0,1]^M with Σ_j β_j = 1 (checked to 1e−12 on construction).
 */
class RelaxedControl {
public:
    RelaxedControl(TimeGrid grid, std::vector<std::vector<double>> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.cells())
            throw std::invalid_argument("RelaxedControl: need one value vector per grid cell");
        if (values_.empty() || values_.front().empty())
            throw std::invalid_argument("RelaxedControl: empty control");
        const std::size_t M = values_.front().size();
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (values_[k].size() != M)
                throw std::invalid_argument("RelaxedControl: inconsistent mode count at cell " +
                                            std::to_string(k));
            double sum = 0.0;
            for (double b : values_[k]) {
                if (b < -1e-12 || b > 1.0 + 1e-12)
                    throw std::invalid_argument("RelaxedControl: component outside [0,1] at cell " +
                                                std::to_string(k));
                sum += b;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("RelaxedControl: cell " + std::to_string(k) +
                                            " does not sum to 1");
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t modes() const noexcept { return values_.front().size(); }
    std::size_t cells() const noexcept { return values_.size(); }
    /** @brief β_j on cell k (0-based j). */
    double value(std::size_t cell, std::size_t j) const { return values_.at(cell).at(j); }
    const std::vector<std::vector<double>>& values() const noexcept { return values_; }

private:
    TimeGrid grid_;
    std::vector<std::vector<double>> values_;
};

/** @brief Binary control: exactly one active mode per cell (stored 0-based). */
class BinaryControl {
public:
    BinaryControl(TimeGrid grid, std::vector<int> active, int mode_count)
        : grid_(std::move(grid)), active_(std::move(active)), modes_(mode_count) {
        if (modes_ < 1) throw std::invalid_argument("BinaryControl: mode count must be >= 1");
        if (active_.size() != grid_.cells())
            throw std::invalid_argument("BinaryControl: need one active mode per grid cell");
        for (int a : active_)
            if (a < 0 || a >= modes_)
                throw std::invalid_argument("BinaryControl: active mode out of range");
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t modes() const noexcept { return static_cast<std::size_t>(modes_); }
    std::size_t cells() const noexcept { return active_.size(); }
    int active(std::size_t cell) const { return active_.at(cell); }
    double value(std::size_t cell, std::size_t j) const {
        return active_.at(cell) == static_cast<int>(j) ? 1.0 : 0.0;
    }

    /** @brief View as a (vertex-valued) RelaxedControl. */
    RelaxedControl relax() const {
        std::vector<std::vector<double>> vals(cells(), std::vector<double>(modes(), 0.0));
        for (std::size_t k = 0; k < cells(); ++k) vals[k][static_cast<std::size_t>(active_[k])] = 1.0;
        return RelaxedControl(grid_, std::move(vals));
    }

private:
    TimeGrid grid_;
    std::vector<int> active_;
    int modes_;
};

/**
 * @brief Switching signal σ: mode j_k (1-based label) on [τ_k, τ_{k+1}).
 *
 * Switch times are nondecreasing; zero-length intervals are legal (they model
 * instantaneous pass-throughs with resets) and can be removed with
 * normalized().  The final mode persists beyond the last switch time.
 */
class SwitchingSignal {
public:
    SwitchingSignal(std::vector<double> switch_times, std::vector<int> modes)
        : times_(std::move(switch_times)), modes_(std::move(modes)) {
        if (times_.empty() || times_.size() != modes_.size())
            throw std::invalid_argument("SwitchingSignal: need one mode per switch time");
        for (std::size_t k = 0; k + 1 < times_.size(); ++k)
            if (times_[k] > times_[k + 1])
                throw std::invalid_argument("SwitchingSignal: switch times must be nondecreasing");
        for (int m : modes_)
            if (m < 1) throw std::invalid_argument("SwitchingSignal: mode labels are 1-based");
    }

    const std::vector<double>& switch_times() const noexcept { return times_; }
    const std::vector<int>& modes() const noexcept { return modes_; }
    double start() const noexcept { return times_.front(); }

    /** @brief Active mode at time t (right-continuous; last mode persists). */
    int mode_at(double t) const {
        if (t < times_.front())
            throw std::invalid_argument("SwitchingSignal::mode_at: time before signal start");
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        return modes_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    /** @brief Equivalent signal with empty intervals and repeated modes merged away. */
    SwitchingSignal normalized() const {
        std::vector<double> ts;
        std::vector<int> ms;
        for (std::size_t k = 0; k < times_.size(); ++k) {
            const bool empty = (k + 1 < times_.size()) && (times_[k + 1] == times_[k]);
            if (empty) continue;
            if (!ms.empty() && ms.back() == modes_[k]) continue;
            ts.push_back(times_[k]);
            ms.push_back(modes_[k]);
        }
        if (ts.empty()) { // every interval empty: keep the final state
            ts.push_back(times_.back());
            ms.push_back(modes_.back());
        }
        return SwitchingSignal(std::move(ts), std::move(ms));
    }

private:
    std::vector<double> times_;
    std::vector<int> modes_;
};

/** @brief M×M transition counts; entry (i,j), 1-based, counts switches i → j. */
class SwitchCountMatrix {
public:
    explicit SwitchCountMatrix(int mode_count)
        : modes_(mode_count), counts_(static_cast<std::size_t>(mode_count) * mode_count, 0) {
        if (mode_count < 1) throw std::invalid_argument("SwitchCountMatrix: mode count must be >= 1");
    }

    int modes() const noexcept { return modes_; }
    int at(int from, int to) const { return counts_[index(from, to)]; }
    int& at(int from, int to) { return counts_[index(from, to)]; }

    /** @brief Uniform limits matrix (every off-diagonal entry = limit). */
    static SwitchCountMatrix uniform_limits(int mode_count, int limit) {
        if (limit < 0) throw std::invalid_argument("SwitchCountMatrix: limits must be nonnegative");
        SwitchCountMatrix m(mode_count);
        for (int i = 1; i <= mode_count; ++i)
            for (int j = 1; j <= mode_count; ++j)
                if (i != j) m.at(i, j) = limit;
        return m;
    }

private:
    std::size_t index(int from, int to) const {
        if (from < 1 || from > modes_ || to < 1 || to > modes_)
            throw std::invalid_argument("SwitchCountMatrix: index out of range");
        return static_cast<std::size_t>(from - 1) * modes_ + (to - 1);
    }

    int modes_;
    std::vector<int> counts_;
};

/**
 * @brief Sum-up rounding: per cell activate the mode with the largest
 * accumulated deficit p̂_{j,k} = ∫_0^{t_{k+1}} β_j dτ − Σ_{l<k} α_{j,l} Δt_l,
 * ties broken by the smallest mode index.
 */
inline BinaryControl sum_up_round(const RelaxedControl& beta) {
    const std::size_t M = beta.modes(), n = beta.cells();
    std::vector<double> beta_integral(M, 0.0); // ∫_0^{t_{k+1}} β_j
    std::vector<double> alpha_integral(M, 0.0); // Σ_{l<k} α_{j,l} Δt_l
    std::vector<int> active(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const double dt = beta.grid().dt(k);
        for (std::size_t j = 0; j < M; ++j) beta_integral[j] += beta.value(k, j) * dt;
        std::size_t winner = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < M; ++j) {
            const double deficit = beta_integral[j] - alpha_integral[j];
            if (deficit > best) { // strict: ties keep the smallest index
                best = deficit;
                winner = j;
            }
        }
        active[k] = static_cast<int>(winner);
        alpha_integral[winner] += dt;
    }
    return BinaryControl(beta.grid(), std::move(active), static_cast<int>(M));
}

/** @brief Signal reading of a binary control, equal neighbouring modes merged. */
inline SwitchingSignal to_switching_signal(const BinaryControl& alpha) {
    std::vector<double> ts{alpha.grid().t0()};
    std::vector<int> ms{alpha.active(0) + 1};
    for (std::size_t k = 1; k < alpha.cells(); ++k) {
        const int mode = alpha.active(k) + 1;
        if (mode != ms.back()) {
            ts.push_back(alpha.grid().node(k));
            ms.push_back(mode);
        }
    }
    return SwitchingSignal(std::move(ts), std::move(ms));
}

/**
 * @brief max_{j, grid nodes t} |∫_0^t (α_j − β_j) dτ|, computed exactly.
 *
 * The integrand is piecewise constant, so the running integral is piecewise
 * linear and its extrema sit on grid nodes; no quadrature is involved.
 */
inline double integrated_deviation(const BinaryControl& alpha, const RelaxedControl& beta) {
    if (alpha.grid() != beta.grid())
        throw std::invalid_argument("integrated_deviation: controls live on different grids");
    if (alpha.modes() != beta.modes())
        throw std::invalid_argument("integrated_deviation: controls have different mode counts");
    const std::size_t M = beta.modes();
    std::vector<double> running(M, 0.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < beta.cells(); ++k) {
        const double dt = beta.grid().dt(k);
        for (std::size_t j = 0; j < M; ++j) {
            running[j] += (alpha.value(k, j) - beta.value(k, j)) * dt;
            worst = std::max(worst, std::abs(running[j]));
        }
    }
    return worst;
}

/** @brief Count ordered transitions between consecutive distinct modes. */
inline SwitchCountMatrix count_switches(const SwitchingSignal& sigma) {
    int max_mode = 1;
    for (int m : sigma.modes()) max_mode = std::max(max_mode, m);
    SwitchCountMatrix counts(max_mode);
    for (std::size_t k = 0; k + 1 < sigma.modes().size(); ++k) {
        const int from = sigma.modes()[k], to = sigma.modes()[k + 1];
        if (from != to) counts.at(from, to) += 1;
    }
    return counts;
}

namespace detail {

/** Exact branch-and-bound state shared by both constrained_round phases. */
struct RoundSearch {
    const RelaxedControl* beta;
    const SwitchCountMatrix* limits;
    std::size_t M, n;
    std::vector<double> dt;

    std::vector<int> choice;      // current partial assignment
    std::vector<double> running;  // ∫ (α_j − β_j) so far
    std::vector<int> used;        // transition counts consumed so far
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<int> best_choice;
    bool lexicographic_phase = false;
    double lex_cutoff = 0.0;

    int used_at(int from, int to) const {
        return used[static_cast<std::size_t>(from - 1) * M + (to - 1)];
    }
    int& used_at(int from, int to) {
        return used[static_cast<std::size_t>(from - 1) * M + (to - 1)];
    }

    void dfs(std::size_t k, double prefix_max) {
        if (k == n) {
            if (lexicographic_phase) {
                best_choice = choice; // first hit in lexicographic order wins
                best_value = prefix_max;
            } else if (prefix_max < best_value) {
                best_value = prefix_max;
                best_choice = choice;
            }
            return;
        }
        // candidate modes, either greedily (value phase) or by label (lex phase)
        std::vector<std::pair<double, int>> order;
        order.reserve(M);
        for (std::size_t j = 0; j < M; ++j) {
            if (k > 0) {
                const int from = choice[k - 1] + 1, to = static_cast<int>(j) + 1;
                if (from != to && used_at(from, to) + 1 > limits->at(from, to)) continue;
            }
            double local = prefix_max;
            for (std::size_t i = 0; i < M; ++i) {
                const double step = ((i == j ? 1.0 : 0.0) - beta->value(k, i)) * dt[k];
                local = std::max(local, std::abs(running[i] + step));
            }
            order.emplace_back(local, static_cast<int>(j));
        }
        if (!lexicographic_phase)
            std::stable_sort(order.begin(), order.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [local, j] : order) {
            if (lexicographic_phase) {
                if (local > lex_cutoff) continue;
                if (!best_choice.empty()) return; // already found the lex-smallest optimum
            } else if (local >= best_value) {
                break; // children are sorted: the rest only get worse
            }
            choice[k] = j;
            int* slot = nullptr;
            if (k > 0 && choice[k - 1] != j) {
                slot = &used_at(choice[k - 1] + 1, j + 1);
                ++(*slot);
            }
            for (std::size_t i = 0; i < M; ++i)
                running[i] += ((static_cast<int>(i) == j ? 1.0 : 0.0) - beta->value(k, i)) * dt[k];
            dfs(k + 1, local);
            for (std::size_t i = 0; i < M; ++i)
                running[i] -= ((static_cast<int>(i) == j ? 1.0 : 0.0) - beta->value(k, i)) * dt[k];
            if (slot) --(*slot);
            if (lexicographic_phase && !best_choice.empty()) return;
        }
    }
};

} // namespace detail

/**
 * @brief Exact minimizer of the max integrated deviation subject to
 * per-transition switch-count limits.
 *
 * Exhaustive branch-and-bound over per-cell mode choices with the running
 * deviation as (monotone) pruning bound, then a second lexicographic pass so
 * the returned optimum is the lex-smallest mode sequence.  Worst case is
 * exponential; the documented limit is ~20 cells.
 */
inline BinaryControl constrained_round(const RelaxedControl& beta, const SwitchCountMatrix& limits) {
    if (limits.modes() != static_cast<int>(beta.modes()))
        throw std::invalid_argument("constrained_round: limits matrix has wrong mode count");
    for (int i = 1; i <= limits.modes(); ++i)
        for (int j = 1; j <= limits.modes(); ++j)
            if (limits.at(i, j) < 0)
                throw std::invalid_argument("constrained_round: limits must be nonnegative");
    if (beta.cells() > 20)
        throw std::invalid_argument("constrained_round: exact search is limited to 20 cells");

    detail::RoundSearch search;
    search.beta = &beta;
    search.limits = &limits;
    search.M = beta.modes();
    search.n = beta.cells();
    search.dt.resize(search.n);
    for (std::size_t k = 0; k < search.n; ++k) search.dt[k] = beta.grid().dt(k);
    search.choice.assign(search.n, 0);
    search.running.assign(search.M, 0.0);
    search.used.assign(search.M * search.M, 0);

    search.dfs(0, 0.0); // phase A: optimal value
    const double value = search.best_value;

    search.lexicographic_phase = true;
    search.lex_cutoff = value * (1.0 + 1e-12) + 1e-15;
    search.best_choice.clear();
    search.choice.assign(search.n, 0);
    search.running.assign(search.M, 0.0);
    search.used.assign(search.M * search.M, 0);
    search.dfs(0, 0.0); // phase B: lex-smallest sequence attaining that value

    return BinaryControl(beta.grid(), std::move(search.best_choice),
                         static_cast<int>(beta.modes()));
}

/** @brief CSV serialization: one row per cell, columns t_start, t_end, beta_1..beta_M. */
inline std::string control_csv(const RelaxedControl& c) {
    std::vector<std::string> header{"t_start", "t_end"};
    for (std::size_t j = 1; j <= c.modes(); ++j) header.push_back("beta_" + std::to_string(j));
    CsvWriter w(std::move(header));
    for (std::size_t k = 0; k < c.cells(); ++k) {
        std::vector<double> row{c.grid().node(k), c.grid().node(k + 1)};
        for (std::size_t j = 0; j < c.modes(); ++j) row.push_back(c.value(k, j));
        w.append_numeric_row(row);
    }
    return w.str();
}

inline std::string control_csv(const BinaryControl& c) { return control_csv(c.relax()); }

/** @brief Random mode-dwell signal: dwell times uniform in [dwell_min, dwell_max]. */
inline SwitchingSignal random_signal(Rng& rng, int mode_count, double t_f, double dwell_min,
                                     double dwell_max) {
    if (mode_count < 1) throw std::invalid_argument("random_signal: mode count must be >= 1");
    if (!(0.0 < dwell_min && dwell_min <= dwell_max))
        throw std::invalid_argument("random_signal: need 0 < dwell_min <= dwell_max");
    std::vector<double> ts;
    std::vector<int> ms;
    double t = 0.0;
    int mode = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mode_count)));
    while (t < t_f) {
        ts.push_back(t);
        ms.push_back(mode);
        t += rng.uniform(dwell_min, dwell_max);
        if (mode_count > 1) {
            int next = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mode_count - 1)));
            if (next >= mode) ++next; // skip the current mode
            mode = next;
        }
    }
    return SwitchingSignal(std::move(ts), std::move(ms));
}

} // namespace switchctl::signals
