#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace switchctl {

/**
 * @brief Strictly increasing sequence of time nodes t_0 < t_1 < ... < t_n.
 *
 * A grid with n+1 nodes has n cells; cell k spans [t_k, t_{k+1}).  All
 * integrals of piecewise-constant functions over such grids are computed
 * exactly as sums of cell areas, never by quadrature.
 */
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.size() < 2)
            throw std::invalid_argument("TimeGrid: need at least two nodes");
        for (std::size_t k = 0; k + 1 < nodes_.size(); ++k)
            if (!(nodes_[k] < nodes_[k + 1]))
                throw std::invalid_argument("TimeGrid: nodes must be strictly increasing (node " +
                                            std::to_string(k + 1) + ")");
    }

    /** @brief Uniform grid with @p cells cells on [t0, t1]. */
    static TimeGrid uniform(double t0, double t1, std::size_t cells) {
        if (cells == 0) throw std::invalid_argument("TimeGrid::uniform: cells must be >= 1");
        if (!(t1 > t0)) throw std::invalid_argument("TimeGrid::uniform: need t1 > t0");
        std::vector<double> nodes(cells + 1);
        for (std::size_t k = 0; k <= cells; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(cells);
            nodes[k] = t0 + s * (t1 - t0);
        }
        nodes.back() = t1; // guard against round-off at the right end
        return TimeGrid(std::move(nodes));
    }

    const std::vector<double>& nodes() const noexcept { return nodes_; }
    std::size_t cells() const noexcept { return nodes_.size() - 1; }
    double node(std::size_t k) const { return nodes_.at(k); }
    double t0() const noexcept { return nodes_.front(); }
    double tf() const noexcept { return nodes_.back(); }
    double dt(std::size_t k) const { return nodes_.at(k + 1) - nodes_.at(k); }

    /** @brief Largest cell width, the Δt of the (M−1)·Δt deviation bound. */
    double max_dt() const {
        double m = 0.0;
        for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) m = std::max(m, nodes_[k + 1] - nodes_[k]);
        return m;
    }

    /** @brief Index of the cell containing t; the final node maps to the last cell. */
    std::size_t cell_of(double t) const {
        if (t < nodes_.front() || t > nodes_.back())
            throw std::invalid_argument("TimeGrid::cell_of: time outside grid");
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
        std::size_t idx = static_cast<std::size_t>(it - nodes_.begin());
        if (idx == 0) return 0;
        if (idx >= nodes_.size()) return cells() - 1;
        return idx - 1;
    }

    /** @brief Grid with every cell halved. */
    TimeGrid refined() const {
        std::vector<double> out;
        out.reserve(2 * cells() + 1);
        for (std::size_t k = 0; k < cells(); ++k) {
            out.push_back(nodes_[k]);
            out.push_back(0.5 * (nodes_[k] + nodes_[k + 1]));
        }
        out.push_back(nodes_.back());
        return TimeGrid(std::move(out));
    }

    bool operator==(const TimeGrid& other) const noexcept { return nodes_ == other.nodes_; }
    bool operator!=(const TimeGrid& other) const noexcept { return !(*this == other); }

private:
    std::vector<double> nodes_;
};

/**
 * @brief Right-continuous piecewise-constant scalar signal on [0, ∞).
 *
 * value(t) = v_k for t in [b_k, b_{k+1}); beyond the last breakpoint the
 * final value persists.  Prefix integrals are exact (sums of rectangles),
 * which keeps sliding-window excitation checks free of quadrature error.
 */
class PiecewiseConstant {
public:
    PiecewiseConstant(std::vector<double> breakpoints, std::vector<double> values)
        : bp_(std::move(breakpoints)), val_(std::move(values)) {
        if (bp_.empty() || bp_.size() != val_.size())
            throw std::invalid_argument("PiecewiseConstant: need one value per breakpoint");
        for (std::size_t k = 0; k + 1 < bp_.size(); ++k)
            if (!(bp_[k] < bp_[k + 1]))
                throw std::invalid_argument("PiecewiseConstant: breakpoints must be strictly increasing");
    }

    /** @brief Constant signal of value v from t = start. */
    static PiecewiseConstant constant(double v, double start = 0.0) {
        return PiecewiseConstant({start}, {v});
    }

    double start() const noexcept { return bp_.front(); }
    const std::vector<double>& breakpoints() const noexcept { return bp_; }
    const std::vector<double>& values() const noexcept { return val_; }

    double value(double t) const {
        if (t < bp_.front())
            throw std::invalid_argument("PiecewiseConstant::value: time before signal start");
        auto it = std::upper_bound(bp_.begin(), bp_.end(), t);
        return val_[static_cast<std::size_t>(it - bp_.begin()) - 1];
    }

    /** @brief Exact ∫_{start}^{t} of the signal. */
    double integral(double t) const {
        if (t < bp_.front())
            throw std::invalid_argument("PiecewiseConstant::integral: time before signal start");
        double acc = 0.0;
        for (std::size_t k = 0; k < bp_.size(); ++k) {
            const double lo = bp_[k];
            const double hi = (k + 1 < bp_.size()) ? std::min(bp_[k + 1], t) : t;
            if (hi <= lo) break;
            acc += val_[k] * (hi - lo);
        }
        return acc;
    }

    /** @brief Exact ∫_{t0}^{t1} of the signal. */
    double integral(double t0, double t1) const { return integral(t1) - integral(t0); }

private:
    std::vector<double> bp_;
    std::vector<double> val_;
};

} // namespace switchctl
