#include "deltagas/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "deltagas/combinatorics.hpp"
#include "deltagas/errors.hpp"
#include "deltagas/parallel.hpp"
#include "rng.hpp"

namespace deltagas {

namespace {

void validate_config(std::span<const double> x, std::span<const double> y, double t) {
    if (x.size() != y.size() || x.empty())
        throw invalid_argument("oracle: x and y must have equal positive length");
    if (!(t > 0.0)) throw invalid_argument("oracle: t must be positive");
    for (std::size_t j = 1; j < x.size(); ++j) {
        if (x[j] < x[j - 1]) throw invalid_argument("oracle: x must be weakly increasing");
        if (y[j] < y[j - 1]) throw invalid_argument("oracle: y must be weakly increasing");
    }
}

} // namespace

double heat_kernel(double u, double t) {
    return std::exp(-u * u / (4.0 * t)) / std::sqrt(4.0 * M_PI * t);
}

double free_propagator(std::span<const double> x, std::span<const double> y, double t) {
    validate_config(x, y, t);
    const int n = static_cast<int>(x.size());
    if (n > kEnumerationCap) throw resource_limit("free_propagator: n exceeds enumeration cap");
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);
    double sum = 0.0, fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    do {
        double term = 1.0;
        for (int j = 0; j < n; ++j)
            term *= heat_kernel(x[static_cast<std::size_t>(j)] -
                                    y[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)] - 1)],
                                t);
        sum += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / fact;
}

namespace {

// Crank-Nicolson (Rannacher-started) solve of g_t = 2 g_uu on (0, U) with
// (d_u + kappa/2) g = 0 at u = 0 and g(U) = 0, delta data at u0; returns g(u1).
double relative_kernel(double u0, double u1, double t, double kappa, double du, double dtau,
                       double domain) {
    // put u0 on a grid node
    double h = du;
    int j0 = 0;
    if (u0 > 0.0) {
        j0 = std::max(1, static_cast<int>(std::lround(u0 / du)));
        h = u0 / j0;
    }
    const int N = static_cast<int>(std::ceil(domain / h)); // nodes 0..N, g[N] = 0 fixed
    std::vector<double> g(static_cast<std::size_t>(N) + 1, 0.0);
    g[static_cast<std::size_t>(j0)] = (j0 == 0 ? 2.0 : 1.0) / h;

    const int steps = std::max(4, static_cast<int>(std::lround(t / dtau)));
    const double dt = t / steps;
    const double lam = 2.0 / (h * h); // diffusion coefficient 2

    std::vector<double> dl(static_cast<std::size_t>(N), 0.0), dm(static_cast<std::size_t>(N), 0.0),
        dup(static_cast<std::size_t>(N), 0.0), rhs(static_cast<std::size_t>(N), 0.0);

    auto apply_A = [&](const std::vector<double>& v, int row) -> double {
        if (row == 0) return lam * (2.0 * v[1] + (h * kappa - 2.0) * v[0]);
        return lam * (v[static_cast<std::size_t>(row - 1)] - 2.0 * v[static_cast<std::size_t>(row)] +
                      v[static_cast<std::size_t>(row + 1)]);
    };

    auto step = [&](double theta, double tau) {
        for (int r = 0; r < N; ++r) {
            rhs[static_cast<std::size_t>(r)] =
                g[static_cast<std::size_t>(r)] + (1.0 - theta) * tau * apply_A(g, r);
            if (r == 0) {
                dm[0] = 1.0 - theta * tau * lam * (h * kappa - 2.0);
                dup[0] = -theta * tau * lam * 2.0;
                dl[0] = 0.0;
            } else {
                dl[static_cast<std::size_t>(r)] = -theta * tau * lam;
                dm[static_cast<std::size_t>(r)] = 1.0 + 2.0 * theta * tau * lam;
                dup[static_cast<std::size_t>(r)] = -theta * tau * lam;
            }
        }
        for (int r = 1; r < N; ++r) {
            const double w = dl[static_cast<std::size_t>(r)] / dm[static_cast<std::size_t>(r - 1)];
            dm[static_cast<std::size_t>(r)] -= w * dup[static_cast<std::size_t>(r - 1)];
            rhs[static_cast<std::size_t>(r)] -= w * rhs[static_cast<std::size_t>(r - 1)];
        }
        g[static_cast<std::size_t>(N - 1)] =
            rhs[static_cast<std::size_t>(N - 1)] / dm[static_cast<std::size_t>(N - 1)];
        for (int r = N - 2; r >= 0; --r)
            g[static_cast<std::size_t>(r)] =
                (rhs[static_cast<std::size_t>(r)] -
                 dup[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(r + 1)]) /
                dm[static_cast<std::size_t>(r)];
    };

    // Rannacher start: four implicit half steps smooth the delta data
    int remaining = steps;
    for (int i = 0; i < 2 && remaining > 0; ++i, --remaining) {
        step(1.0, 0.5 * dt);
        step(1.0, 0.5 * dt);
    }
    for (; remaining > 0; --remaining) step(0.5, dt);

    // cubic interpolation at u1
    const double pos = u1 / h;
    int base = static_cast<int>(std::floor(pos)) - 1;
    base = std::clamp(base, 0, std::max(0, N - 3));
    double value = 0.0;
    for (int i = 0; i < 4; ++i) {
        double li = 1.0;
        for (int m = 0; m < 4; ++m) {
            if (m == i) continue;
            li *= (pos - (base + m)) / static_cast<double>(i - m);
        }
        value += li * g[static_cast<std::size_t>(std::min(base + i, N))];
    }
    return value;
}

} // namespace

double pde_propagator_n2(std::span<const double> x, std::span<const double> y, double t,
                         double kappa, const PdeConfig& cfg, double* err_out) {
    validate_config(x, y, t);
    if (x.size() != 2) throw invalid_argument("pde_propagator_n2: needs exactly two particles");

    const double u0 = y[1] - y[0];
    const double u1 = x[1] - x[0];
    const double dR = 0.5 * (x[0] + x[1]) - 0.5 * (y[0] + y[1]);

    const double du = cfg.du > 0.0 ? cfg.du : 2e-3;
    const double dtau = cfg.dt > 0.0 ? cfg.dt : t / 4096.0;
    const double domain = cfg.domain > 0.0 ? cfg.domain : 12.0 * std::sqrt(t) + u0 + u1 + 2.0;

    // snapping u0 onto the lattice can make the halved grid coincide with the
    // fine one; no error estimate is possible there
    if (u0 > 0.0 &&
        std::max(1L, std::lround(u0 / du)) == std::max(1L, std::lround(u0 / (2.0 * du))))
        throw numerical_failure("pde_propagator_n2: grid too coarse to refine against");

    const double fine = relative_kernel(u0, u1, t, kappa, du, dtau, domain);
    const double coarse = relative_kernel(u0, u1, t, kappa, 2.0 * du, 2.0 * dtau, domain);
    const double extrap = (4.0 * fine - coarse) / 3.0;
    const double err = std::abs(fine - coarse) / 3.0;
    if (err > cfg.tolerance * std::max(std::abs(extrap), 1e-12))
        throw numerical_failure("pde_propagator_n2: grid too coarse for requested tolerance");

    const double com = std::exp(-dR * dR / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
    if (err_out) *err_out = com * 0.5 * err;
    return com * 0.5 * extrap;
}

namespace {

struct McAcc {
    double sum_v = 0.0, sum_vv = 0.0;
    double sum_h = 0.0, sum_h2 = 0.0, sum_h4 = 0.0;
    McAcc operator+(const McAcc& o) const {
        return {sum_v + o.sum_v, sum_vv + o.sum_vv, sum_h + o.sum_h, sum_h2 + o.sum_h2,
                sum_h4 + o.sum_h4};
    }
    McAcc operator-(const McAcc& o) const {
        return {sum_v - o.sum_v, sum_vv - o.sum_vv, sum_h - o.sum_h, sum_h2 - o.sum_h2,
                sum_h4 - o.sum_h4};
    }
};

} // namespace

McResult feynman_kac_mc(std::span<const double> x, std::span<const double> y, double t,
                        double kappa, const McConfig& cfg) {
    if (x.size() != y.size() || x.empty())
        throw invalid_argument("feynman_kac_mc: x and y must have equal positive length");
    if (!(t > 0.0)) throw invalid_argument("feynman_kac_mc: t must be positive");
    if (cfg.paths < 1 || cfg.steps < 2) throw invalid_argument("feynman_kac_mc: bad config");

    const int n = static_cast<int>(x.size());
    const int K = cfg.steps;
    const double h = cfg.bandwidth > 0.0 ? cfg.bandwidth : 0.05 * std::sqrt(t);
    const double dt = t / K;
    const int npairs = n * (n - 1) / 2;

    const std::int64_t samples = cfg.antithetic ? (cfg.paths + 1) / 2 : cfg.paths;

    auto run_sample = [&](std::int64_t index) -> McAcc {
        const std::uint64_t stream_seed = detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(index));
        const int reps = cfg.antithetic ? 2 : 1;
        double vv[2] = {0.0, 0.0};
        double wh[2][3] = {{0, 0, 0}, {0, 0, 0}};
        std::vector<double> b(static_cast<std::size_t>(n));
        std::vector<double> occ(static_cast<std::size_t>(npairs) * 3);
        for (int rep = 0; rep < reps; ++rep) {
            detail::SplitMix64 stream(stream_seed); // identical draws, mirrored for the second rep
            const double sign = (rep == 0) ? 1.0 : -1.0;
            std::copy(x.begin(), x.end(), b.begin());
            std::fill(occ.begin(), occ.end(), 0.0);
            bool spare_valid = false;
            double spare = 0.0;
            auto normal = [&]() {
                if (spare_valid) {
                    spare_valid = false;
                    return spare;
                }
                const auto p = detail::normal_pair(stream);
                spare = p.b;
                spare_valid = true;
                return p.a;
            };
            auto accumulate = [&](double weight) {
                int pair = 0;
                for (int j = 0; j < n; ++j)
                    for (int k = j + 1; k < n; ++k, ++pair) {
                        const double d =
                            std::abs(b[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(k)]);
                        if (d <= h) {
                            occ[static_cast<std::size_t>(pair * 3 + 0)] += weight;
                            if (d <= 0.5 * h) {
                                occ[static_cast<std::size_t>(pair * 3 + 1)] += weight;
                                if (d <= 0.25 * h) occ[static_cast<std::size_t>(pair * 3 + 2)] += weight;
                            }
                        }
                    }
            };
            accumulate(0.5);
            for (int m = 0; m < K; ++m) {
                const double remain = t - m * dt;
                const double sd = std::sqrt(2.0 * dt * std::max(0.0, remain - dt) / remain);
                for (int j = 0; j < n; ++j) {
                    const double drift =
                        (y[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]) * dt / remain;
                    b[static_cast<std::size_t>(j)] += drift + sign * sd * normal();
                }
                accumulate(m == K - 1 ? 0.5 : 1.0);
            }
            double X[3] = {0.0, 0.0, 0.0};
            for (int pair = 0; pair < npairs; ++pair)
                for (int i = 0; i < 3; ++i)
                    X[i] += occ[static_cast<std::size_t>(pair * 3 + i)] * dt /
                            (2.0 * h / static_cast<double>(1 << i));
            for (int i = 0; i < 3; ++i) wh[rep][i] = std::exp(2.0 * kappa * X[i]);
            vv[rep] = 2.0 * wh[rep][2] - wh[rep][1]; // linear-in-h extrapolation
        }
        McAcc acc;
        const double inv = 1.0 / reps;
        for (int rep = 0; rep < reps; ++rep) {
            acc.sum_v += vv[rep] * inv;
            acc.sum_h += wh[rep][0] * inv;
            acc.sum_h2 += wh[rep][1] * inv;
            acc.sum_h4 += wh[rep][2] * inv;
        }
        acc.sum_vv = acc.sum_v * acc.sum_v;
        return acc;
    };

    const McAcc total = deterministic_reduce<McAcc>(samples, [&](std::int64_t lo, std::int64_t hi) {
        KahanSum<McAcc> acc;
        for (std::int64_t i = lo; i < hi; ++i) acc.add(run_sample(i));
        return acc.value();
    });

    double kernel = 1.0;
    for (int j = 0; j < n; ++j)
        kernel *= heat_kernel(x[static_cast<std::size_t>(j)] - y[static_cast<std::size_t>(j)], t);

    const double N = static_cast<double>(samples);
    const double mean = total.sum_v / N;
    const double var = std::max(0.0, (total.sum_vv - N * mean * mean) / std::max(1.0, N - 1.0));

    McResult out;
    out.estimate = mean * kernel;
    out.std_error = std::sqrt(var / N) * kernel;
    out.mean_h = total.sum_h / N * kernel;
    out.mean_h2 = total.sum_h2 / N * kernel;
    out.mean_h4 = total.sum_h4 / N * kernel;
    out.paths = samples * (cfg.antithetic ? 2 : 1);
    return out;
}

McResult feynman_kac_mc_symmetrized(std::span<const double> x, std::span<const double> y,
                                    double t, double kappa, const McConfig& cfg) {
    validate_config(x, y, t);
    const int n = static_cast<int>(x.size());
    if (n > 5) throw resource_limit("feynman_kac_mc_symmetrized: n exceeds cap 5");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;

    McResult out;
    double var_sum = 0.0;
    std::uint64_t run = 0;
    do {
        std::vector<double> ys(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            ys[static_cast<std::size_t>(j)] =
                y[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)] - 1)];
        McConfig sub = cfg;
        sub.seed = detail::mix_seed(cfg.seed, 0xabcdULL + run);
        const McResult r = feynman_kac_mc(x, ys, t, kappa, sub);
        out.estimate += r.estimate;
        out.mean_h += r.mean_h;
        out.mean_h2 += r.mean_h2;
        out.mean_h4 += r.mean_h4;
        var_sum += r.std_error * r.std_error;
        out.paths += r.paths;
        ++run;
    } while (std::next_permutation(perm.begin(), perm.end()));

    out.estimate /= fact;
    out.mean_h /= fact;
    out.mean_h2 /= fact;
    out.mean_h4 /= fact;
    out.std_error = std::sqrt(var_sum) / fact;
    return out;
}

} // namespace deltagas
