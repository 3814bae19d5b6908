#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "mgtwin/dataset.hpp"
#include "mgtwin/errors.hpp"
#include "mgtwin/schema.hpp"

namespace mgtwin {

/// Seconds to a sample count (at least one).
inline Eigen::Index window_samples(double seconds, double dt) {
    return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(seconds / dt)));
}

/// Inclusive prefix sums in long double; sums[n] = x[0] + ... + x[n-1].
template <typename Derived>
std::vector<long double> prefix_sums(const Eigen::DenseBase<Derived>& x) {
    std::vector<long double> sums(static_cast<std::size_t>(x.size()) + 1, 0.0L);
    for (Eigen::Index n = 0; n < x.size(); ++n)
        sums[n + 1] = sums[n] + static_cast<long double>(x.derived().coeff(n));
    return sums;
}

/// Centered window [lo, hi) of `width` samples around n, clipped to [0, size).
inline std::pair<Eigen::Index, Eigen::Index> centered_window(Eigen::Index n, Eigen::Index width,
                                                             Eigen::Index size) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, n - width / 2);
    const Eigen::Index hi = std::min<Eigen::Index>(size, n - width / 2 + width);
    return {lo, hi};
}

// ---- system-level aggregates ------------------------------------------------

template <typename Derived>
Eigen::VectorXd channel_sum(const Eigen::DenseBase<Derived>& block) {
    return block.rowwise().sum();
}

struct PowerTotals {
    Eigen::VectorXd p_total;
    Eigen::VectorXd q_total;
};

inline PowerTotals totals(const DatasetMatrix& m) {
    const auto& s = m.storage();
    return {channel_sum(s.middleCols(col::p_dg1, kNumDgs)),
            channel_sum(s.middleCols(col::q_dg1, kNumDgs))};
}

inline Eigen::VectorXd f_mean(const DatasetMatrix& m) {
    return m.storage().middleCols(col::f_dg1, kNumDgs).rowwise().sum() / double(kNumDgs);
}

/// sqrt((a^2 + b^2 + c^2) / 3), elementwise.
template <typename A, typename B, typename C>
auto vpcc_proxy(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b,
                const Eigen::ArrayBase<C>& c) {
    return ((a.square() + b.square() + c.square()) / 3.0).sqrt();
}

/// (a + b + c) / 3, elementwise.
template <typename A, typename B, typename C>
auto zero_sequence(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b,
                   const Eigen::ArrayBase<C>& c) {
    return (a + b + c) / 3.0;
}

inline Eigen::VectorXd vpcc_proxy(const DatasetMatrix& m) {
    const auto& s = m.storage();
    return vpcc_proxy(s.col(col::v(0)).array(), s.col(col::v(1)).array(),
                      s.col(col::v(2)).array()).matrix();
}

/// Same proxy over the three PCC currents.
inline Eigen::VectorXd ipcc_proxy(const DatasetMatrix& m) {
    const auto& s = m.storage();
    return vpcc_proxy(s.col(col::i(0)).array(), s.col(col::i(1)).array(),
                      s.col(col::i(2)).array()).matrix();
}

inline Eigen::VectorXd zero_sequence_current(const DatasetMatrix& m) {
    const auto& s = m.storage();
    return zero_sequence(s.col(col::i(0)).array(), s.col(col::i(1)).array(),
                         s.col(col::i(2)).array()).matrix();
}

// ---- sliding-window operators ------------------------------------------------

/// Centered moving average; windows shrink at the series ends.
template <typename Derived>
Eigen::VectorXd moving_average(const Eigen::DenseBase<Derived>& x, Eigen::Index width) {
    const Eigen::Index size = x.size();
    const auto sums = prefix_sums(x);
    Eigen::VectorXd out(size);
    for (Eigen::Index n = 0; n < size; ++n) {
        const auto [lo, hi] = centered_window(n, width, size);
        out[n] = static_cast<double>((sums[hi] - sums[lo]) / static_cast<long double>(hi - lo));
    }
    return out;
}

/// Centered sliding root-mean-square; windows shrink at the series ends.
template <typename Derived>
Eigen::VectorXd rms_envelope(const Eigen::DenseBase<Derived>& x, Eigen::Index width) {
    const Eigen::Index size = x.size();
    std::vector<long double> sums(static_cast<std::size_t>(size) + 1, 0.0L);
    for (Eigen::Index n = 0; n < size; ++n) {
        const long double v = x.derived().coeff(n);
        sums[n + 1] = sums[n] + v * v;
    }
    Eigen::VectorXd out(size);
    for (Eigen::Index n = 0; n < size; ++n) {
        const auto [lo, hi] = centered_window(n, width, size);
        const long double ms = (sums[hi] - sums[lo]) / static_cast<long double>(hi - lo);
        out[n] = static_cast<double>(std::sqrt(std::max(0.0L, ms)));
    }
    return out;
}

/// Derivative per second of the moving-average-smoothed series: centered
/// differences inside, one-sided at the ends.
template <typename Derived>
Eigen::VectorXd slope(const Eigen::DenseBase<Derived>& x, Eigen::Index smooth_width, double dt) {
    const Eigen::VectorXd y = moving_average(x, smooth_width);
    const Eigen::Index size = y.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size);
    if (size < 2) return out;
    out[0] = (y[1] - y[0]) / dt;
    out[size - 1] = (y[size - 1] - y[size - 2]) / dt;
    for (Eigen::Index n = 1; n + 1 < size; ++n) out[n] = (y[n + 1] - y[n - 1]) / (2.0 * dt);
    return out;
}

/// max_i |R_i - mean(R)| / mean(R) over sliding per-phase rms R_i.
/// Throws DegenerateWindow where the mean rms falls below `floor`.
template <typename A, typename B, typename C>
Eigen::VectorXd voltage_unbalance(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                                  const Eigen::DenseBase<C>& c, Eigen::Index width,
                                  double floor = 1e-9) {
    const Eigen::VectorXd ra = rms_envelope(a, width);
    const Eigen::VectorXd rb = rms_envelope(b, width);
    const Eigen::VectorXd rc = rms_envelope(c, width);
    Eigen::VectorXd out(ra.size());
    for (Eigen::Index n = 0; n < ra.size(); ++n) {
        const double mean = (ra[n] + rb[n] + rc[n]) / 3.0;
        if (!(mean >= floor))
            throw Error(ErrorKind::DegenerateWindow,
                        "mean phase rms below floor at sample " + std::to_string(n));
        const double dev = std::max({std::abs(ra[n] - mean), std::abs(rb[n] - mean),
                                     std::abs(rc[n] - mean)});
        out[n] = dev / mean;
    }
    return out;
}

inline Eigen::VectorXd voltage_unbalance(const DatasetMatrix& m, Eigen::Index width,
                                         double floor = 1e-9) {
    const auto& s = m.storage();
    return voltage_unbalance(s.col(col::v(0)), s.col(col::v(1)), s.col(col::v(2)), width, floor);
}

} // namespace mgtwin
