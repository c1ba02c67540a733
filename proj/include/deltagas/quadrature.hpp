#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <sstream>
#include <vector>

#include "deltagas/errors.hpp"
#include "deltagas/parallel.hpp"

namespace deltagas {

using cplx = std::complex<double>;

enum class QuadratureRule { Trapezoid, GaussLegendre };

/// One integration axis: uniform nodes on [-half_width, half_width] (plus an
/// optional tiny stagger), evaluated on the contour shifted by i*imag_shift.
struct AxisSpec {
    double half_width = 0.0;
    int nodes = 0; // odd, >= 3
    double imag_shift = 0.0;
    double stagger = 0.0;
};

struct GridSpec {
    std::vector<AxisSpec> axes;
    QuadratureRule rule = QuadratureRule::Trapezoid;

    void validate() const {
        if (axes.empty()) throw invalid_argument("grid: need at least one axis");
        for (const auto& a : axes) {
            if (!(a.half_width > 0.0)) throw invalid_argument("grid: half_width must be positive");
            if (a.nodes < 3 || a.nodes % 2 == 0)
                throw invalid_argument("grid: nodes per axis must be odd and >= 3");
        }
    }
};

struct IntegralResult {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
    std::int64_t evaluations = 0;
};

/// Truncation radius for integrands damped by exp(-t q^2), with additive
/// margin n*|kappa| covering imaginary rapidity shifts up to kappa*n:
/// L = sqrt(log(1/tol)/t) + n*|kappa| + 1.
double truncation_radius(double t, double kappa, int n, double tol);

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

namespace detail {

struct GridSums {
    cplx full{0.0, 0.0};
    cplx half{0.0, 0.0};
    GridSums operator+(const GridSums& o) const { return {full + o.full, half + o.half}; }
    GridSums operator-(const GridSums& o) const { return {full - o.full, half - o.half}; }
};

struct AxisNodes {
    std::vector<cplx> coord;
    std::vector<double> weight;
};

inline AxisNodes build_axis(const AxisSpec& a) {
    AxisNodes out;
    const int n = a.nodes;
    const double h = 2.0 * a.half_width / (n - 1);
    out.coord.resize(static_cast<std::size_t>(n));
    out.weight.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        out.coord[static_cast<std::size_t>(k)] =
            cplx(-a.half_width + k * h + a.stagger, a.imag_shift);
        out.weight[static_cast<std::size_t>(k)] = (k == 0 || k == n - 1) ? 0.5 * h : h;
    }
    return out;
}

[[noreturn]] inline void report_bad_node(std::span<const cplx> q) {
    std::ostringstream os;
    os << "integrand non-finite at node (";
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (i) os << ", ";
        os << q[i].real();
        if (q[i].imag() != 0.0) os << (q[i].imag() > 0 ? "+" : "") << q[i].imag() << "i";
    }
    os << ")";
    throw numerical_failure(os.str());
}

/// Tensor trapezoid sweep; accumulates the full-grid sum and the sum over the
/// every-other-node subgrid in one pass.
template <class F>
IntegralResult trapezoid_sweep(const GridSpec& spec, F&& f) {
    const int dim = static_cast<int>(spec.axes.size());
    std::vector<AxisNodes> axes;
    axes.reserve(spec.axes.size());
    std::int64_t total = 1;
    for (const auto& a : spec.axes) {
        axes.push_back(build_axis(a));
        total *= a.nodes;
    }

    auto chunk_sum = [&](std::int64_t begin, std::int64_t end) -> GridSums {
        std::vector<int> idx(static_cast<std::size_t>(dim));
        std::vector<cplx> q(static_cast<std::size_t>(dim));
        std::int64_t rem = begin;
        for (int d = dim - 1; d >= 0; --d) {
            idx[static_cast<std::size_t>(d)] = static_cast<int>(rem % spec.axes[static_cast<std::size_t>(d)].nodes);
            rem /= spec.axes[static_cast<std::size_t>(d)].nodes;
        }
        KahanSum<cplx> full, half;
        for (std::int64_t i = begin; i < end; ++i) {
            double w = 1.0;
            bool even = true;
            for (int d = 0; d < dim; ++d) {
                const int k = idx[static_cast<std::size_t>(d)];
                q[static_cast<std::size_t>(d)] = axes[static_cast<std::size_t>(d)].coord[static_cast<std::size_t>(k)];
                w *= axes[static_cast<std::size_t>(d)].weight[static_cast<std::size_t>(k)];
                even = even && (k % 2 == 0);
            }
            const cplx v = f(std::span<const int>(idx), std::span<const cplx>(q));
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                report_bad_node(std::span<const cplx>(q));
            full.add(w * v);
            if (even) {
                double wh = 1.0;
                for (int d = 0; d < dim; ++d) {
                    const int k = idx[static_cast<std::size_t>(d)];
                    const int n = spec.axes[static_cast<std::size_t>(d)].nodes;
                    const double h2 = 4.0 * spec.axes[static_cast<std::size_t>(d)].half_width / (n - 1);
                    wh *= (k == 0 || k == n - 1) ? 0.5 * h2 : h2;
                }
                half.add(wh * v);
            }
            // odometer
            for (int d = dim - 1; d >= 0; --d) {
                if (++idx[static_cast<std::size_t>(d)] < spec.axes[static_cast<std::size_t>(d)].nodes) break;
                idx[static_cast<std::size_t>(d)] = 0;
            }
        }
        return {full.value(), half.value()};
    };

    const GridSums sums = deterministic_reduce<GridSums>(total, chunk_sum);
    return {sums.full, std::abs(sums.full - sums.half), total};
}

template <class F>
cplx gauss_sweep(const std::vector<AxisSpec>& axes_spec, F&& f) {
    const int dim = static_cast<int>(axes_spec.size());
    std::vector<AxisNodes> axes(static_cast<std::size_t>(dim));
    std::int64_t total = 1;
    for (int d = 0; d < dim; ++d) {
        const auto& a = axes_spec[static_cast<std::size_t>(d)];
        std::vector<double> xs, ws;
        gauss_legendre(a.nodes, xs, ws);
        auto& ax = axes[static_cast<std::size_t>(d)];
        ax.coord.resize(static_cast<std::size_t>(a.nodes));
        ax.weight.resize(static_cast<std::size_t>(a.nodes));
        for (int k = 0; k < a.nodes; ++k) {
            ax.coord[static_cast<std::size_t>(k)] =
                cplx(a.half_width * xs[static_cast<std::size_t>(k)] + a.stagger, a.imag_shift);
            ax.weight[static_cast<std::size_t>(k)] = a.half_width * ws[static_cast<std::size_t>(k)];
        }
        total *= a.nodes;
    }
    auto chunk_sum = [&](std::int64_t begin, std::int64_t end) -> cplx {
        std::vector<int> idx(static_cast<std::size_t>(dim));
        std::vector<cplx> q(static_cast<std::size_t>(dim));
        std::int64_t rem = begin;
        for (int d = dim - 1; d >= 0; --d) {
            idx[static_cast<std::size_t>(d)] = static_cast<int>(rem % axes[static_cast<std::size_t>(d)].coord.size());
            rem /= static_cast<std::int64_t>(axes[static_cast<std::size_t>(d)].coord.size());
        }
        KahanSum<cplx> sum;
        for (std::int64_t i = begin; i < end; ++i) {
            double w = 1.0;
            for (int d = 0; d < dim; ++d) {
                const int k = idx[static_cast<std::size_t>(d)];
                q[static_cast<std::size_t>(d)] = axes[static_cast<std::size_t>(d)].coord[static_cast<std::size_t>(k)];
                w *= axes[static_cast<std::size_t>(d)].weight[static_cast<std::size_t>(k)];
            }
            const cplx v = f(std::span<const int>(idx), std::span<const cplx>(q));
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                report_bad_node(std::span<const cplx>(q));
            sum.add(w * v);
            for (int d = dim - 1; d >= 0; --d) {
                if (++idx[static_cast<std::size_t>(d)] < static_cast<int>(axes[static_cast<std::size_t>(d)].coord.size())) break;
                idx[static_cast<std::size_t>(d)] = 0;
            }
        }
        return sum.value();
    };
    return deterministic_reduce<cplx>(total, chunk_sum);
}

} // namespace detail

/// Integrates f over the grid; f sees the per-axis node indices and the
/// (possibly contour-shifted) complex coordinates. Deterministic for a fixed
/// spec regardless of thread count.
template <class F>
IntegralResult integrate_indexed(const GridSpec& spec, F&& f) {
    spec.validate();
    if (spec.rule == QuadratureRule::Trapezoid) {
        return detail::trapezoid_sweep(spec, std::forward<F>(f));
    }
    // Gauss-Legendre: error estimate compares against a half-resolution rule.
    const cplx fine = detail::gauss_sweep(spec.axes, f);
    std::vector<AxisSpec> coarse = spec.axes;
    std::int64_t total = 1, ctotal = 1;
    for (auto& a : coarse) {
        total *= a.nodes;
        a.nodes = (a.nodes + 1) / 2;
        if (a.nodes % 2 == 0) ++a.nodes;
        if (a.nodes < 3) a.nodes = 3;
        ctotal *= a.nodes;
    }
    const cplx rough = detail::gauss_sweep(coarse, f);
    return {fine, std::abs(fine - rough), total + ctotal};
}

template <class F>
IntegralResult integrate(const GridSpec& spec, F&& f) {
    return integrate_indexed(spec, [&f](std::span<const int>, std::span<const cplx> q) { return f(q); });
}

} // namespace deltagas
