#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace deltagas {

/// Monte Carlo settings for the bridge-sampling estimator. bandwidth < 0
/// selects the default 0.05*sqrt(t).
struct McConfig {
    std::int64_t paths = 100000;
    int steps = 2048;
    double bandwidth = -1.0;
    std::uint64_t seed = 1;
    bool antithetic = false;
};

struct McResult {
    double estimate = 0.0;   // bandwidth-extrapolated
    double std_error = 0.0;
    double mean_h = 0.0;     // plain estimates at h, h/2, h/4 (diagnostics)
    double mean_h2 = 0.0;
    double mean_h4 = 0.0;
    std::int64_t paths = 0;
};

/// Relative-coordinate solver settings. Negative entries select defaults
/// (du = 2e-3, dt = t/4096, domain auto-sized).
struct PdeConfig {
    double du = -1.0;
    double dt = -1.0;
    double domain = -1.0;
    double tolerance = 5e-4; // numerical-failure above this error estimate
};

/// Symmetrized free kernel (1/n!) sum_sigma prod_j p_t(x_j - y_sigma(j)),
/// p_t(u) = exp(-u^2/4t)/sqrt(4 pi t).
double free_propagator(std::span<const double> x, std::span<const double> y, double t);

/// Heat kernel p_t of the one-body generator -d^2/dx^2.
double heat_kernel(double u, double t);

/// Two-body propagator from a Crank-Nicolson solve of the relative
/// coordinate on the half line with the contact (Robin) condition
/// (d_u + kappa/2) g = 0 at u = 0, composed with the free center-of-mass
/// kernel and the 1/2! bookkeeping that reproduces free_propagator at kappa=0.
/// err_out, when given, receives the step-halving error estimate.
double pde_propagator_n2(std::span<const double> x, std::span<const double> y, double t,
                         double kappa, const PdeConfig& cfg = {}, double* err_out = nullptr);

/// Bridge-sampling estimator of E[exp(2 kappa X)] p_t(x-y) for distinguishable
/// particles, X the summed mollified pair occupation times. Deterministic for
/// a fixed seed; returns the linear-in-h extrapolation from h/2 and h/4.
McResult feynman_kac_mc(std::span<const double> x, std::span<const double> y, double t,
                        double kappa, const McConfig& cfg = {});

/// Bosonic comparison target: (1/n!) sum over permuted endpoint assignments.
McResult feynman_kac_mc_symmetrized(std::span<const double> x, std::span<const double> y,
                                    double t, double kappa, const McConfig& cfg = {});

} // namespace deltagas
