#include "deltagas/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deltagas/bethe.hpp"
#include "deltagas/combinatorics.hpp"
#include "deltagas/errors.hpp"
#include "deltagas/parallel.hpp"
#include "detmath.hpp"

namespace deltagas {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kRotationKappa = 0.15; // below this, two-body terms use rotated coordinates

// accuracy model, calibrated against grid-refinement studies: truncation error
// ~ exp(-t L^2), Gaussian sampling error ~ exp(-pi^2/(t n h^2)), pole aliasing
// ~ 0.2 exp(-2 pi d / h) for a singularity at distance d off the contour
double trunc_exponent(double tol) { return std::log(1.0 / tol) + 6.0; }
double gauss_log(double tol) { return std::log(1.0 / tol) + 4.6; }
double alias_log(double tol) { return std::log(1.0 / tol) + 2.0; }

double factorial_d(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

// ---------------------------------------------------------------------------
// grid planning: one spacing h shared by all axes of a term (so momentum
// differences live on a lattice), per-axis radii from the Gaussian decay rate
// t*n_j plus the analytic-shift margin.
// ---------------------------------------------------------------------------

struct AxisBudget {
    std::vector<int> cluster_sizes; // Gaussian decay t*n_j per axis
    std::vector<double> shift_margin; // |imaginary rapidity| covered by the radius
    double pole_distance = 0.0;       // nearest true singularity off the contour (0: none)
    double phase_coeff = 0.0;         // largest |phase slope| in any axis
};

int default_floor(int m) {
    if (m <= 2) return 129;
    if (m == 3) return 65;
    if (m == 4) return 41;
    return 0;
}

std::int64_t node_budget(int m) {
    if (m == 1) return 400001;
    if (m == 2) return 67000000; // ~8192^2
    if (m == 3) return 1100000000;
    if (m == 4) return 12000000;
    return 40000000; // m >= 5: shared budget, zero-point only
}

GridSpec plan_grid(double t, const AxisBudget& ab, const GridOverrides& g, bool stagger) {
    const int m = static_cast<int>(ab.cluster_sizes.size());
    const double tol = std::clamp(g.tol, 1e-12, 1e-3);

    int nmax = 1;
    for (int s : ab.cluster_sizes) nmax = std::max(nmax, s);

    std::vector<double> radius(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        radius[static_cast<std::size_t>(j)] =
            std::sqrt(trunc_exponent(tol) / (t * ab.cluster_sizes[static_cast<std::size_t>(j)])) +
            ab.shift_margin[static_cast<std::size_t>(j)] + 1.0;

    double h;
    if (g.nodes > 0) {
        // fixed node count: one shared radius so the lattice stays aligned
        double L = g.half_width > 0.0 ? g.half_width
                                      : *std::max_element(radius.begin(), radius.end());
        int nodes = g.nodes | 1;
        if (nodes < 3) nodes = 3;
        GridSpec spec;
        for (int j = 0; j < m; ++j)
            spec.axes.push_back({L, nodes, 0.0, stagger ? 1e-9 * (j + 1) : 0.0});
        return spec;
    }

    const double h_gauss =
        2.0 * M_PI / (ab.phase_coeff + 2.0 * std::sqrt(t * nmax * gauss_log(tol)));
    h = h_gauss;
    if (ab.pole_distance > 0.0)
        h = std::min(h, 2.0 * M_PI * ab.pole_distance / alias_log(tol));

    // floors from the default node counts, then the per-dimension budget
    for (int pass = 0; pass < 8; ++pass) {
        std::int64_t total = 1;
        bool over = false;
        for (int j = 0; j < m && !over; ++j) {
            int K = static_cast<int>(std::ceil(radius[static_cast<std::size_t>(j)] / h));
            K = std::max(K, (default_floor(m) - 1) / 2);
            total *= 2 * static_cast<std::int64_t>(K) + 1;
            if (total > node_budget(m)) over = true;
        }
        if (!over) break;
        h *= 1.35;
    }

    GridSpec spec;
    for (int j = 0; j < m; ++j) {
        int K = static_cast<int>(std::ceil(radius[static_cast<std::size_t>(j)] / h));
        K = std::max(K, (default_floor(m) - 1) / 2);
        spec.axes.push_back({K * h, 2 * K + 1, 0.0, stagger ? 1e-9 * (j + 1) : 0.0});
    }
    return spec;
}

// node coordinates of one axis (real parts)
std::vector<double> axis_nodes(const AxisSpec& a) {
    std::vector<double> u(static_cast<std::size_t>(a.nodes));
    const double h = 2.0 * a.half_width / (a.nodes - 1);
    for (int k = 0; k < a.nodes; ++k)
        u[static_cast<std::size_t>(k)] = -a.half_width + k * h + a.stagger;
    return u;
}

// real part of q_j(k_j) - q_k(k_k) for a diff-table index d = k_j - k_k
double diff_value(const AxisSpec& aj, const AxisSpec& ak, int d) {
    const double h = 2.0 * aj.half_width / (aj.nodes - 1);
    return d * h + (ak.half_width - aj.half_width) + (aj.stagger - ak.stagger);
}

// multiplicity factor for the sorted-sector fold: number of distinct
// permutations of the index tuple
double fold_multiplicity(std::span<const int> idx) {
    const int m = static_cast<int>(idx.size());
    double mult = factorial_d(m);
    int run = 1;
    for (int j = 1; j < m; ++j) {
        if (idx[static_cast<std::size_t>(j)] == idx[static_cast<std::size_t>(j - 1)]) {
            ++run;
        } else {
            mult /= factorial_d(run);
            run = 1;
        }
    }
    mult /= factorial_d(run);
    return mult;
}

bool is_sorted_idx(std::span<const int> idx) {
    for (std::size_t j = 1; j < idx.size(); ++j)
        if (idx[j] < idx[j - 1]) return false;
    return true;
}

// compiled permutation data: 0-based inverse and a flat list of pair ids
struct CompiledPerm {
    std::vector<int> inv;      // inv[a] = sigma^-1(a+1) - 1
    std::vector<int> pair_ids; // factor table ids to multiply
};

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

void validate_configs(const PropagatorQuery& q) {
    if (q.x.size() != q.y.size() || q.x.empty())
        throw invalid_argument("propagator: x and y must have equal positive length");
    if (!(q.t > 0.0)) throw invalid_argument("propagator: t must be positive");
    for (std::size_t j = 1; j < q.x.size(); ++j) {
        if (q.x[j] < q.x[j - 1])
            throw invalid_argument("propagator: x must lie in the ordered sector (weakly increasing)");
        if (q.y[j] < q.y[j - 1])
            throw invalid_argument("propagator: y must lie in the ordered sector (weakly increasing)");
    }
}

void require_cap(const PropagatorQuery& q, int cap, const char* who) {
    if (static_cast<int>(q.x.size()) > cap)
        throw resource_limit(std::string(who) + ": n exceeds cap " + std::to_string(cap));
}

// ---------------------------------------------------------------------------
// rotated two-body sweep: q1 = (v-u)/sqrt2, q2 = (v+u)/sqrt2. Used for small
// couplings where the pair scattering pole sits close to the real axis; the
// pole lives in u only, so only the u axis needs the fine spacing.
// ---------------------------------------------------------------------------

template <class F>
IntegralResult integrate_pair_rotated(double t, double kappa, double pole_scale,
                                      double phase_coeff, double tol_in, F&& f) {
    const double tol = std::clamp(tol_in, 1e-12, 1e-3);
    const double radius = std::sqrt(trunc_exponent(tol) / t) + 1.0;
    const double du = 2.0 * M_PI * (std::abs(kappa) * pole_scale / std::sqrt(2.0)) / alias_log(tol);
    const double dv = 2.0 * M_PI / (phase_coeff + 2.0 * std::sqrt(t * gauss_log(tol)));
    const int Ku = static_cast<int>(std::ceil(radius / std::min(du, dv)));
    const int Kv = static_cast<int>(std::ceil(radius / dv));

    GridSpec spec;
    spec.axes.push_back({Ku * std::min(du, dv), 2 * Ku + 1, 0.0, 0.0});
    spec.axes.push_back({Kv * dv, 2 * Kv + 1, 0.0, 0.0});
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    return integrate_indexed(spec, [&](std::span<const int>, std::span<const cplx> uv) {
        const double u = uv[0].real(), v = uv[1].real();
        return f((v - u) * inv_sqrt2, (v + u) * inv_sqrt2);
    });
}

// ---------------------------------------------------------------------------
// repulsive contour-integral evaluator (sum over all permutations)
// ---------------------------------------------------------------------------

PropagatorResult tw_impl(const PropagatorQuery& q) {
    const int n = static_cast<int>(q.x.size());
    const double kappa = q.kappa, t = q.t;
    PropagatorResult out;
    out.method = Method::TwRepulsive;

    const double pref = 1.0 / (factorial_d(n) * std::pow(2.0 * M_PI, n));

    if (n == 2 && kappa < 0.0 && std::abs(kappa) < kRotationKappa && q.grid.nodes == 0) {
        const double x1 = q.x[0], x2 = q.x[1], y1 = q.y[0], y2 = q.y[1];
        const double pc = 2.0 * (max_abs(q.x) + max_abs(q.y));
        auto f = [&](double q1, double q2) {
            const cplx d(q2 - q1, 0.0);
            const cplx swap = (d - kI * kappa) / (d + kI * kappa);
            const cplx phases_id = std::exp(kI * (q1 * (x1 - y1) + q2 * (x2 - y2)));
            const cplx phases_sw = std::exp(kI * (q2 * (x1 - y2) + q1 * (x2 - y1)));
            return std::exp(-t * (q1 * q1 + q2 * q2)) * (phases_id + swap * phases_sw);
        };
        const auto r = integrate_pair_rotated(t, kappa, 1.0, pc, q.grid.tol, f);
        out.value = pref * r.value;
        out.error_estimate = pref * r.error_estimate;
        out.evaluations = r.evaluations;
        out.terms.push_back({{n}, out.value, out.error_estimate});
        out.imag_residue = std::abs(out.value.imag());
        return out;
    }

    AxisBudget ab;
    ab.cluster_sizes.assign(static_cast<std::size_t>(n), 1);
    ab.shift_margin.assign(static_cast<std::size_t>(n), 0.0);
    ab.pole_distance = kappa == 0.0 ? 0.0 : std::abs(kappa);
    ab.phase_coeff = max_abs(q.x) + max_abs(q.y);
    const GridSpec spec = plan_grid(t, ab, q.grid, false);

    const auto u = axis_nodes(spec.axes[0]); // all axes identical here
    const int N = spec.axes[0].nodes;

    // phase tables ph[m][p][k] = exp(i u_k (x_p - y_m)); gaussian g[k]
    std::vector<cplx> ph(static_cast<std::size_t>(n * n * N));
    std::vector<double> gauss(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        gauss[static_cast<std::size_t>(k)] = std::exp(-t * u[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(k)]);
        for (int m = 0; m < n; ++m)
            for (int p = 0; p < n; ++p)
                ph[static_cast<std::size_t>((m * n + p) * N + k)] =
                    std::exp(kI * u[static_cast<std::size_t>(k)] *
                             (q.x[static_cast<std::size_t>(p)] - q.y[static_cast<std::size_t>(m)]));
    }
    // scattering table s[d + N - 1] = (delta - i kappa)/(delta + i kappa)
    std::vector<cplx> scat(static_cast<std::size_t>(2 * N - 1), cplx(1.0, 0.0));
    if (kappa != 0.0)
        for (int d = -(N - 1); d <= N - 1; ++d) {
            const double delta = diff_value(spec.axes[0], spec.axes[0], d);
            scat[static_cast<std::size_t>(d + N - 1)] = cplx(delta, -kappa) / cplx(delta, kappa);
        }

    // compile permutations: phases need sigma^-1, factors need ordered pairs
    // a > b with sigma^-1(a) < sigma^-1(b)
    std::vector<CompiledPerm> perms;
    {
        std::vector<int> p(static_cast<std::size_t>(n));
        std::iota(p.begin(), p.end(), 1);
        do {
            CompiledPerm cp;
            const auto inv = invert_permutation(p);
            cp.inv.resize(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) cp.inv[static_cast<std::size_t>(a)] = inv[static_cast<std::size_t>(a)] - 1;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    if (a > b && cp.inv[static_cast<std::size_t>(a)] < cp.inv[static_cast<std::size_t>(b)])
                        cp.pair_ids.push_back(a * n + b);
            perms.push_back(std::move(cp));
        } while (std::next_permutation(p.begin(), p.end()));
    }

    auto integrand = [&](std::span<const int> idx, std::span<const cplx>) -> cplx {
        cplx sum = 0.0;
        for (const auto& cp : perms) {
            cplx term = 1.0;
            for (int m = 0; m < n; ++m)
                term *= ph[static_cast<std::size_t>((m * n + cp.inv[static_cast<std::size_t>(m)]) * N +
                                                    idx[static_cast<std::size_t>(m)])];
            for (int pid : cp.pair_ids)
                term *= scat[static_cast<std::size_t>(idx[static_cast<std::size_t>(pid / n)] -
                                                      idx[static_cast<std::size_t>(pid % n)] + N - 1)];
            sum += term;
        }
        double g = 1.0;
        for (int m = 0; m < n; ++m) g *= gauss[static_cast<std::size_t>(idx[static_cast<std::size_t>(m)])];
        return sum * g;
    };

    const auto r = integrate_indexed(spec, integrand);
    out.value = pref * r.value;
    out.error_estimate = pref * r.error_estimate;
    out.evaluations = r.evaluations;
    out.imag_residue = std::abs(out.value.imag());
    out.terms.push_back({{n}, out.value, out.error_estimate});
    return out;
}

// ---------------------------------------------------------------------------
// eigenfunction-expansion evaluators. The repulsive one integrates over n real
// momenta; the attractive one sums over compositions with one momentum per
// cluster. Both share the structure sum_sigma (phases) (cross factors).
// ---------------------------------------------------------------------------

// per-composition sweep for the attractive expansion; also used for the
// repulsive case through the all-singleton composition with kappa < 0
IntegralResult eigen_term(const PropagatorQuery& q, const ClusterComposition& c) {
    const int n = c.n();
    const int M = c.cluster_count();
    const double kappa = q.kappa, t = q.t;
    const auto& parts = c.parts();

    // a denominator with vanishing imaginary offset needs staggered axes
    bool stagger = false;
    double min_pole = std::numeric_limits<double>::infinity();
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            const int j = c.cluster_of(a), k = c.cluster_of(b);
            if (j >= k) continue;
            const double off = c.rank(a) - c.rank(b) -
                               0.5 * (parts[static_cast<std::size_t>(j)] - parts[static_cast<std::size_t>(k)]) - 1.0;
            if (std::abs(off) < 1e-12) stagger = true;
        }
    for (int j = 0; j < M; ++j)
        for (int k = j + 1; k < M; ++k)
            min_pole = std::min(min_pole,
                                0.5 * std::abs(kappa) *
                                    (parts[static_cast<std::size_t>(j)] + parts[static_cast<std::size_t>(k)]));

    AxisBudget ab;
    ab.cluster_sizes = parts;
    ab.shift_margin.assign(static_cast<std::size_t>(M), 0.0);
    ab.pole_distance = (M >= 2 && kappa != 0.0) ? min_pole : 0.0;
    double pc = 0.0;
    for (int j = 0; j < M; ++j)
        pc = std::max(pc, parts[static_cast<std::size_t>(j)] * (max_abs(q.x) + max_abs(q.y)));
    ab.phase_coeff = pc;
    const GridSpec spec = plan_grid(t, ab, q.grid, stagger);

    std::vector<std::vector<double>> u;
    for (const auto& ax : spec.axes) u.push_back(axis_nodes(ax));

    // phase tables px/py[a][p][k], gaussian ga[j][k], factor tables per cross pair
    const int maxN = spec.axes[0].nodes; // axes share h; node counts may differ per axis
    std::vector<int> nodes(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) nodes[static_cast<std::size_t>(j)] = spec.axes[static_cast<std::size_t>(j)].nodes;
    (void)maxN;

    std::vector<std::vector<cplx>> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
    for (int a = 1; a <= n; ++a) {
        const int j = c.cluster_of(a);
        const double nj = parts[static_cast<std::size_t>(j)];
        const double shift = kappa * (c.rank(a) - nj / 2.0 - 0.5); // imaginary rapidity
        const int Nj = nodes[static_cast<std::size_t>(j)];
        auto& tx = px[static_cast<std::size_t>(a - 1)];
        auto& ty = py[static_cast<std::size_t>(a - 1)];
        tx.resize(static_cast<std::size_t>(n * Nj));
        ty.resize(static_cast<std::size_t>(n * Nj));
        for (int p = 0; p < n; ++p)
            for (int k = 0; k < Nj; ++k) {
                const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                tx[static_cast<std::size_t>(p * Nj + k)] =
                    std::exp(kI * uk * q.x[static_cast<std::size_t>(p)]) *
                    std::exp(-shift * q.x[static_cast<std::size_t>(p)]);
                ty[static_cast<std::size_t>(p * Nj + k)] =
                    std::exp(kI * uk * q.y[static_cast<std::size_t>(p)]) *
                    std::exp(-shift * q.y[static_cast<std::size_t>(p)]);
            }
    }

    std::vector<std::vector<double>> ga(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        const double nj = parts[static_cast<std::size_t>(j)];
        const double grow = t * kappa * kappa / 12.0 * (nj * nj * nj - nj);
        auto& row = ga[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)]));
        for (int k = 0; k < nodes[static_cast<std::size_t>(j)]; ++k) {
            const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(k)] = std::exp(-t * nj * uk * uk + grow);
        }
    }

    // cross-pair factor tables, one per ordered (a,b) with cluster(a) < cluster(b)
    std::vector<std::vector<cplx>> scat(static_cast<std::size_t>(n * n));
    std::vector<int> pair_axis_j(static_cast<std::size_t>(n * n), -1), pair_axis_k(static_cast<std::size_t>(n * n), -1);
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            const int j = c.cluster_of(a), k = c.cluster_of(b);
            if (j >= k) continue;
            const double nj = parts[static_cast<std::size_t>(j)], nk = parts[static_cast<std::size_t>(k)];
            const double off = kappa * (c.rank(a) - nj / 2.0 - (c.rank(b) - nk / 2.0));
            const int Nj = nodes[static_cast<std::size_t>(j)], Nk = nodes[static_cast<std::size_t>(k)];
            auto& tbl = scat[static_cast<std::size_t>((a - 1) * n + (b - 1))];
            tbl.resize(static_cast<std::size_t>(Nj + Nk - 1));
            for (int d = -(Nk - 1); d <= Nj - 1; ++d) {
                const double delta = diff_value(spec.axes[static_cast<std::size_t>(j)],
                                                spec.axes[static_cast<std::size_t>(k)], d);
                tbl[static_cast<std::size_t>(d + Nk - 1)] =
                    kappa == 0.0 ? cplx(1.0, 0.0)
                                 : cplx(delta, off + kappa) / cplx(delta, off - kappa);
            }
            pair_axis_j[static_cast<std::size_t>((a - 1) * n + (b - 1))] = j;
            pair_axis_k[static_cast<std::size_t>((a - 1) * n + (b - 1))] = k;
        }

    // compiled increasing-class permutations
    std::vector<CompiledPerm> perms;
    for (const auto& sigma :
         enumerate_restricted_permutations(c, PermutationClassKind::IncreasingWithinBlocks)) {
        CompiledPerm cp;
        const auto inv = invert_permutation(sigma);
        cp.inv.resize(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) cp.inv[static_cast<std::size_t>(a)] = inv[static_cast<std::size_t>(a)] - 1;
        for (int a = 1; a <= n; ++a)
            for (int b = 1; b <= n; ++b) {
                if (c.cluster_of(a) >= c.cluster_of(b)) continue;
                if (cp.inv[static_cast<std::size_t>(a - 1)] > cp.inv[static_cast<std::size_t>(b - 1)])
                    cp.pair_ids.push_back((a - 1) * n + (b - 1));
            }
        perms.push_back(std::move(cp));
    }

    std::vector<int> axis_of(static_cast<std::size_t>(n));
    for (int a = 1; a <= n; ++a) axis_of[static_cast<std::size_t>(a - 1)] = c.cluster_of(a);

    const bool fold = (M == n) && !stagger && M >= 2; // all-singleton: symmetric integrand

    auto integrand = [&](std::span<const int> idx, std::span<const cplx>) -> cplx {
        double mult = 1.0;
        if (fold) {
            if (!is_sorted_idx(idx)) return cplx(0.0, 0.0);
            mult = fold_multiplicity(idx);
        }
        cplx sx = 0.0, sy = 0.0;
        for (const auto& cp : perms) {
            cplx tx = 1.0, ty = 1.0;
            for (int a = 0; a < n; ++a) {
                const int j = axis_of[static_cast<std::size_t>(a)];
                const int Nj = nodes[static_cast<std::size_t>(j)];
                const int k = idx[static_cast<std::size_t>(j)];
                tx *= px[static_cast<std::size_t>(a)][static_cast<std::size_t>(cp.inv[static_cast<std::size_t>(a)] * Nj + k)];
                ty *= py[static_cast<std::size_t>(a)][static_cast<std::size_t>(cp.inv[static_cast<std::size_t>(a)] * Nj + k)];
            }
            cplx fx = 1.0;
            for (int pid : cp.pair_ids) {
                const int j = pair_axis_j[static_cast<std::size_t>(pid)];
                const int k = pair_axis_k[static_cast<std::size_t>(pid)];
                const int Nk = nodes[static_cast<std::size_t>(k)];
                fx *= scat[static_cast<std::size_t>(pid)][static_cast<std::size_t>(
                    idx[static_cast<std::size_t>(j)] - idx[static_cast<std::size_t>(k)] + Nk - 1)];
            }
            sx += tx * fx;
            sy += ty * fx;
        }
        double g = 1.0;
        for (int j = 0; j < M; ++j)
            g *= ga[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        return sx * std::conj(sy) * (g * mult);
    };

    return integrate_indexed(spec, integrand);
}

PropagatorResult eigen_repulsive_impl(const PropagatorQuery& q) {
    const int n = static_cast<int>(q.x.size());
    PropagatorResult out;
    out.method = Method::EigenRepulsive;

    const double pref =
        1.0 / (factorial_d(n) * factorial_d(n) * std::pow(2.0 * M_PI, n));

    if (n == 2 && q.kappa < 0.0 && std::abs(q.kappa) < kRotationKappa && q.grid.nodes == 0) {
        const double t = q.t, kappa = q.kappa;
        const double x1 = q.x[0], x2 = q.x[1], y1 = q.y[0], y2 = q.y[1];
        const double pc = 2.0 * (max_abs(q.x) + max_abs(q.y));
        auto f = [&](double q1, double q2) {
            const cplx d(q1 - q2, 0.0);
            const cplx w = (d + kI * kappa) / (d - kI * kappa);
            const cplx psix = std::exp(kI * (q1 * x1 + q2 * x2)) + w * std::exp(kI * (q1 * x2 + q2 * x1));
            const cplx psiy = std::exp(kI * (q1 * y1 + q2 * y2)) + w * std::exp(kI * (q1 * y2 + q2 * y1));
            return psix * std::conj(psiy) * std::exp(-t * (q1 * q1 + q2 * q2));
        };
        const auto r = integrate_pair_rotated(t, kappa, 1.0, pc, q.grid.tol, f);
        out.value = pref * r.value;
        out.error_estimate = pref * r.error_estimate;
        out.evaluations = r.evaluations;
        out.terms.push_back({{n}, out.value, out.error_estimate});
        out.imag_residue = std::abs(out.value.imag());
        return out;
    }

    // all-singleton composition reuses the attractive sweep (the rapidity
    // shifts vanish and the factors reduce to the two-body phases); the sums
    // carry no 1/n!, so the prefactor supplies both normalizations
    std::vector<int> ones(static_cast<std::size_t>(n), 1);
    const ClusterComposition c(n, ones);
    const auto r = eigen_term(q, c);
    out.value = pref * r.value;
    out.error_estimate = pref * r.error_estimate;
    out.evaluations = r.evaluations;
    out.imag_residue = std::abs(out.value.imag());
    out.terms.push_back({ones, out.value, out.error_estimate});
    return out;
}

PropagatorResult eigen_attractive_impl(const PropagatorQuery& q) {
    const int n = static_cast<int>(q.x.size());
    PropagatorResult out;
    out.method = Method::EigenAttractive;

    KahanSum<cplx> total;
    double err = 0.0;
    for (const auto& c : enumerate_compositions(n)) {
        const int M = c.cluster_count();
        double pref = std::pow(q.kappa, n - M) / factorial_d(n) / factorial_d(M) /
                      std::pow(2.0 * M_PI, M);
        for (int nj : c.parts()) pref *= factorial_d(nj) * factorial_d(nj - 1);

        IntegralResult r;
        if (n == 2 && M == 2 && q.kappa < kRotationKappa && q.grid.nodes == 0) {
            const double t = q.t, kappa = q.kappa;
            const double x1 = q.x[0], x2 = q.x[1], y1 = q.y[0], y2 = q.y[1];
            const double pc = 2.0 * (max_abs(q.x) + max_abs(q.y));
            auto f = [&](double q1, double q2) {
                const cplx d(q1 - q2, 0.0);
                const cplx w = (d + kI * kappa) / (d - kI * kappa);
                const cplx psix = std::exp(kI * (q1 * x1 + q2 * x2)) + w * std::exp(kI * (q1 * x2 + q2 * x1));
                const cplx psiy = std::exp(kI * (q1 * y1 + q2 * y2)) + w * std::exp(kI * (q1 * y2 + q2 * y1));
                return psix * std::conj(psiy) * std::exp(-t * (q1 * q1 + q2 * q2));
            };
            r = integrate_pair_rotated(t, kappa, 1.0, pc, q.grid.tol, f);
        } else {
            r = eigen_term(q, c);
        }
        total.add(pref * r.value);
        err += std::abs(pref) * r.error_estimate;
        out.evaluations += r.evaluations;
        out.terms.push_back({c.parts(), pref * r.value, std::abs(pref) * r.error_estimate});
    }
    out.value = total.value();
    out.error_estimate = err;
    out.imag_residue = std::abs(out.value.imag());
    return out;
}

// ---------------------------------------------------------------------------
// attractive cluster expansion: double permutation-class sum
// ---------------------------------------------------------------------------

IntegralResult cluster_term(const PropagatorQuery& q, const ClusterComposition& c,
                            std::span<const double> mu) {
    const int n = c.n();
    const int M = c.cluster_count();
    const double kappa = q.kappa, t = q.t;
    const auto& parts = c.parts();

    bool stagger = false;
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            const int j = c.cluster_of(a), k = c.cluster_of(b);
            if (j == k) continue;
            const double off = mu[static_cast<std::size_t>(j)] + c.rank(a) -
                               mu[static_cast<std::size_t>(k)] - c.rank(b) - 1.0;
            if (std::abs(off) < 1e-12) stagger = true;
        }

    double min_pole = std::numeric_limits<double>::infinity();
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < M; ++k) {
            if (j == k) continue;
            min_pole = std::min(min_pole,
                                kappa * std::abs(mu[static_cast<std::size_t>(k)] +
                                                 parts[static_cast<std::size_t>(k)] -
                                                 mu[static_cast<std::size_t>(j)]));
        }

    AxisBudget ab;
    ab.cluster_sizes = parts;
    ab.shift_margin.resize(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        double cmax = 0.0;
        for (int s = 1; s <= parts[static_cast<std::size_t>(j)]; ++s)
            cmax = std::max(cmax, std::abs(kappa * (mu[static_cast<std::size_t>(j)] + s - 1.0)));
        ab.shift_margin[static_cast<std::size_t>(j)] = cmax;
    }
    ab.pole_distance = M >= 2 ? min_pole : 0.0;
    double pc = 0.0;
    for (int j = 0; j < M; ++j)
        pc = std::max(pc, parts[static_cast<std::size_t>(j)] * (max_abs(q.x) + max_abs(q.y)));
    ab.phase_coeff = pc;
    const GridSpec spec = plan_grid(t, ab, q.grid, stagger);

    std::vector<std::vector<double>> u;
    for (const auto& ax : spec.axes) u.push_back(axis_nodes(ax));
    std::vector<int> nodes(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) nodes[static_cast<std::size_t>(j)] = spec.axes[static_cast<std::size_t>(j)].nodes;

    // phases px[a][p][k] = exp(i xi_a x_p), py[a][p][k] = exp(-i xi_a y_p),
    // with xi_a = u + i kappa (mu_j + r(a) - 1)
    std::vector<std::vector<cplx>> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
    for (int a = 1; a <= n; ++a) {
        const int j = c.cluster_of(a);
        const double shift = kappa * (mu[static_cast<std::size_t>(j)] + c.rank(a) - 1.0);
        const int Nj = nodes[static_cast<std::size_t>(j)];
        auto& tx = px[static_cast<std::size_t>(a - 1)];
        auto& ty = py[static_cast<std::size_t>(a - 1)];
        tx.resize(static_cast<std::size_t>(n * Nj));
        ty.resize(static_cast<std::size_t>(n * Nj));
        for (int p = 0; p < n; ++p)
            for (int k = 0; k < Nj; ++k) {
                const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                tx[static_cast<std::size_t>(p * Nj + k)] =
                    std::exp(kI * uk * q.x[static_cast<std::size_t>(p)]) *
                    std::exp(-shift * q.x[static_cast<std::size_t>(p)]);
                ty[static_cast<std::size_t>(p * Nj + k)] =
                    std::exp(-kI * uk * q.y[static_cast<std::size_t>(p)]) *
                    std::exp(shift * q.y[static_cast<std::size_t>(p)]);
            }
    }

    // gaussian per axis: exp(-t sum_a xi_a^2) split into magnitude and phase
    std::vector<std::vector<cplx>> ga(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        const double nj = parts[static_cast<std::size_t>(j)];
        double sum_c = 0.0, sum_c2 = 0.0;
        for (int s = 1; s <= parts[static_cast<std::size_t>(j)]; ++s) {
            const double cs = kappa * (mu[static_cast<std::size_t>(j)] + s - 1.0);
            sum_c += cs;
            sum_c2 += cs * cs;
        }
        auto& row = ga[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)]));
        for (int k = 0; k < nodes[static_cast<std::size_t>(j)]; ++k) {
            const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(k)] =
                std::exp(-t * nj * uk * uk + t * sum_c2) *
                std::exp(cplx(0.0, -2.0 * t * uk * sum_c));
        }
    }

    // scattering tables per ordered cross pair (a,b), cluster(a) != cluster(b)
    std::vector<std::vector<cplx>> scat(static_cast<std::size_t>(n * n));
    std::vector<int> pair_axis_j(static_cast<std::size_t>(n * n), -1), pair_axis_k(static_cast<std::size_t>(n * n), -1);
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            const int j = c.cluster_of(a), k = c.cluster_of(b);
            if (j == k) continue;
            const double off = kappa * (mu[static_cast<std::size_t>(j)] + c.rank(a) -
                                        mu[static_cast<std::size_t>(k)] - c.rank(b));
            const int Nj = nodes[static_cast<std::size_t>(j)], Nk = nodes[static_cast<std::size_t>(k)];
            auto& tbl = scat[static_cast<std::size_t>((a - 1) * n + (b - 1))];
            tbl.resize(static_cast<std::size_t>(Nj + Nk - 1));
            for (int d = -(Nk - 1); d <= Nj - 1; ++d) {
                const double delta = diff_value(spec.axes[static_cast<std::size_t>(j)],
                                                spec.axes[static_cast<std::size_t>(k)], d);
                tbl[static_cast<std::size_t>(d + Nk - 1)] =
                    cplx(delta, off + kappa) / cplx(delta, off - kappa);
            }
            pair_axis_j[static_cast<std::size_t>((a - 1) * n + (b - 1))] = j;
            pair_axis_k[static_cast<std::size_t>((a - 1) * n + (b - 1))] = k;
        }

    // compiled permutation classes and the per-(sigma,tau) factor lists
    std::vector<std::vector<int>> sig_inv, tau_inv;
    for (const auto& s : enumerate_restricted_permutations(c, PermutationClassKind::IncreasingWithinBlocks)) {
        auto inv = invert_permutation(s);
        std::vector<int> iv(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) iv[static_cast<std::size_t>(a)] = inv[static_cast<std::size_t>(a)] - 1;
        sig_inv.push_back(std::move(iv));
    }
    for (const auto& s : enumerate_restricted_permutations(c, PermutationClassKind::DecreasingWithinBlocks)) {
        auto inv = invert_permutation(s);
        std::vector<int> iv(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) iv[static_cast<std::size_t>(a)] = inv[static_cast<std::size_t>(a)] - 1;
        tau_inv.push_back(std::move(iv));
    }
    const std::size_t ns = sig_inv.size(), nt = tau_inv.size();
    std::vector<std::vector<int>> pair_lists(ns * nt);
    for (std::size_t si = 0; si < ns; ++si)
        for (std::size_t ti = 0; ti < nt; ++ti) {
            auto& list = pair_lists[si * nt + ti];
            for (int a = 1; a <= n; ++a)
                for (int b = 1; b <= n; ++b) {
                    if (c.cluster_of(a) == c.cluster_of(b)) continue;
                    if (sig_inv[si][static_cast<std::size_t>(a - 1)] > sig_inv[si][static_cast<std::size_t>(b - 1)] &&
                        tau_inv[ti][static_cast<std::size_t>(a - 1)] < tau_inv[ti][static_cast<std::size_t>(b - 1)])
                        list.push_back((a - 1) * n + (b - 1));
                }
        }

    std::vector<int> axis_of(static_cast<std::size_t>(n));
    for (int a = 1; a <= n; ++a) axis_of[static_cast<std::size_t>(a - 1)] = c.cluster_of(a);

    const bool fold = (M == n) && !stagger && M >= 2;

    // stack scratch: the lambda is shared across worker threads
    auto integrand = [&](std::span<const int> idx, std::span<const cplx>) -> cplx {
        cplx pxs[24], pys[24];
        double mult = 1.0;
        if (fold) {
            if (!is_sorted_idx(idx)) return cplx(0.0, 0.0);
            mult = fold_multiplicity(idx);
        }
        for (std::size_t si = 0; si < ns; ++si) {
            cplx tx = 1.0;
            for (int a = 0; a < n; ++a) {
                const int j = axis_of[static_cast<std::size_t>(a)];
                tx *= px[static_cast<std::size_t>(a)][static_cast<std::size_t>(
                    sig_inv[si][static_cast<std::size_t>(a)] * nodes[static_cast<std::size_t>(j)] +
                    idx[static_cast<std::size_t>(j)])];
            }
            pxs[si] = tx;
        }
        for (std::size_t ti = 0; ti < nt; ++ti) {
            cplx ty = 1.0;
            for (int a = 0; a < n; ++a) {
                const int j = axis_of[static_cast<std::size_t>(a)];
                ty *= py[static_cast<std::size_t>(a)][static_cast<std::size_t>(
                    tau_inv[ti][static_cast<std::size_t>(a)] * nodes[static_cast<std::size_t>(j)] +
                    idx[static_cast<std::size_t>(j)])];
            }
            pys[ti] = ty;
        }
        cplx sum = 0.0;
        for (std::size_t si = 0; si < ns; ++si)
            for (std::size_t ti = 0; ti < nt; ++ti) {
                cplx f = pxs[si] * pys[ti];
                for (int pid : pair_lists[si * nt + ti]) {
                    const int j = pair_axis_j[static_cast<std::size_t>(pid)];
                    const int k = pair_axis_k[static_cast<std::size_t>(pid)];
                    f *= scat[static_cast<std::size_t>(pid)][static_cast<std::size_t>(
                        idx[static_cast<std::size_t>(j)] - idx[static_cast<std::size_t>(k)] +
                        nodes[static_cast<std::size_t>(k)] - 1)];
                }
                sum += f;
            }
        cplx g = mult;
        for (int j = 0; j < M; ++j)
            g *= ga[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        return sum * g;
    };

    return integrate_indexed(spec, integrand);
}

PropagatorResult cluster_expansion_impl(const PropagatorQuery& q) {
    const int n = static_cast<int>(q.x.size());
    PropagatorResult out;
    out.method = Method::ClusterExpansion;

    KahanSum<cplx> total;
    double err = 0.0;
    for (const auto& c : enumerate_compositions(n)) {
        const int M = c.cluster_count();
        std::vector<double> mu(static_cast<std::size_t>(M), 0.0);
        if (q.mu_choice == MuChoice::Symmetric) mu = symmetric_mu(c);

        double pref = std::pow(q.kappa, n - M) /
                      (factorial_d(n) * factorial_d(M) * std::pow(2.0 * M_PI, M));
        for (int nj : c.parts()) pref *= factorial_d(nj) * factorial_d(nj - 1);

        const IntegralResult r = cluster_term(q, c, mu);
        total.add(pref * r.value);
        err += std::abs(pref) * r.error_estimate;
        out.evaluations += r.evaluations;
        out.terms.push_back({c.parts(), pref * r.value, std::abs(pref) * r.error_estimate});
    }
    out.value = total.value();
    out.error_estimate = err;
    out.imag_residue = std::abs(out.value.imag());
    return out;
}

// ---------------------------------------------------------------------------
// partition form on shifted contours
// ---------------------------------------------------------------------------

std::vector<double> partition_eps(const PropagatorQuery& q, int M) {
    std::vector<double> eps(static_cast<std::size_t>(M));
    if (q.eps.empty()) {
        for (int j = 0; j < M; ++j) eps[static_cast<std::size_t>(j)] = (j + 1.0) / (M + 1.0);
        return eps;
    }
    if (static_cast<int>(q.eps.size()) < M)
        throw invalid_argument("partition form: eps must provide one entry per cluster");
    for (int j = 0; j < M; ++j) {
        eps[static_cast<std::size_t>(j)] = q.eps[static_cast<std::size_t>(j)];
        if (!(eps[static_cast<std::size_t>(j)] >= 0.0 && eps[static_cast<std::size_t>(j)] < 1.0))
            throw invalid_argument("partition form: eps entries must lie in [0,1)");
    }
    for (int j = 0; j < M; ++j)
        for (int k = j + 1; k < M; ++k)
            if (eps[static_cast<std::size_t>(j)] == eps[static_cast<std::size_t>(k)])
                throw invalid_argument("partition form: eps entries must be pairwise distinct");
    return eps;
}

IntegralResult partition_term(const PropagatorQuery& q, const ClusterPartition& p,
                              std::span<const double> eps) {
    const ClusterComposition& c = p.base;
    const int n = c.n();
    const int M = c.cluster_count();
    const double kappa = q.kappa, t = q.t;
    const auto& parts = c.parts();

    std::vector<int> block_of(static_cast<std::size_t>(n));
    std::vector<int> dr(static_cast<std::size_t>(n));
    for (int j = 0; j < M; ++j)
        for (int e : p.blocks[static_cast<std::size_t>(j)]) block_of[static_cast<std::size_t>(e - 1)] = j;
    for (int a = 1; a <= n; ++a) dr[static_cast<std::size_t>(a - 1)] = p.down_rank(a);

    double min_pole = std::numeric_limits<double>::infinity();
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < M; ++k) {
            if (j == k) continue;
            const double de = eps[static_cast<std::size_t>(j)] - eps[static_cast<std::size_t>(k)];
            const double dist = std::abs(de - std::round(de));
            min_pole = std::min(min_pole, kappa * dist);
        }

    AxisBudget ab;
    ab.cluster_sizes = parts;
    ab.shift_margin.resize(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        double cmax = 0.0;
        for (int a = 1; a <= n; ++a)
            if (block_of[static_cast<std::size_t>(a - 1)] == j)
                cmax = std::max(cmax, std::abs(kappa * (dr[static_cast<std::size_t>(a - 1)] -
                                                        eps[static_cast<std::size_t>(j)])));
        ab.shift_margin[static_cast<std::size_t>(j)] = cmax;
    }
    ab.pole_distance = M >= 2 ? min_pole : 0.0;
    double pc = 0.0;
    for (int j = 0; j < M; ++j)
        pc = std::max(pc, parts[static_cast<std::size_t>(j)] * (max_abs(q.x) + max_abs(q.y)));
    ab.phase_coeff = pc;
    const GridSpec spec = plan_grid(t, ab, q.grid, false);

    std::vector<std::vector<double>> u;
    for (const auto& ax : spec.axes) u.push_back(axis_nodes(ax));
    std::vector<int> nodes(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) nodes[static_cast<std::size_t>(j)] = spec.axes[static_cast<std::size_t>(j)].nodes;

    // zeta_a = u_j + i kappa (d(a) - eps_j)
    std::vector<std::vector<cplx>> px(static_cast<std::size_t>(n)); // [a][p*N+k]
    std::vector<std::vector<cplx>> pyc(static_cast<std::size_t>(n)); // [a][k], y index fixed
    for (int a = 1; a <= n; ++a) {
        const int j = block_of[static_cast<std::size_t>(a - 1)];
        const double shift = kappa * (dr[static_cast<std::size_t>(a - 1)] - eps[static_cast<std::size_t>(j)]);
        const int Nj = nodes[static_cast<std::size_t>(j)];
        auto& tx = px[static_cast<std::size_t>(a - 1)];
        auto& ty = pyc[static_cast<std::size_t>(a - 1)];
        tx.resize(static_cast<std::size_t>(n * Nj));
        ty.resize(static_cast<std::size_t>(Nj));
        for (int k = 0; k < Nj; ++k) {
            const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            for (int pp = 0; pp < n; ++pp)
                tx[static_cast<std::size_t>(pp * Nj + k)] =
                    std::exp(kI * uk * q.x[static_cast<std::size_t>(pp)]) *
                    std::exp(-shift * q.x[static_cast<std::size_t>(pp)]);
            ty[static_cast<std::size_t>(k)] = std::exp(-kI * uk * q.y[static_cast<std::size_t>(a - 1)]) *
                                              std::exp(shift * q.y[static_cast<std::size_t>(a - 1)]);
        }
    }

    std::vector<std::vector<cplx>> ga(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        double sum_c = 0.0, sum_c2 = 0.0;
        for (int a = 1; a <= n; ++a)
            if (block_of[static_cast<std::size_t>(a - 1)] == j) {
                const double cs = kappa * (dr[static_cast<std::size_t>(a - 1)] - eps[static_cast<std::size_t>(j)]);
                sum_c += cs;
                sum_c2 += cs * cs;
            }
        const double nj = parts[static_cast<std::size_t>(j)];
        auto& row = ga[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)]));
        for (int k = 0; k < nodes[static_cast<std::size_t>(j)]; ++k) {
            const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(k)] = std::exp(-t * nj * uk * uk + t * sum_c2) *
                                               std::exp(cplx(0.0, -2.0 * t * uk * sum_c));
        }
    }

    // factor tables for numeric pairs a < b in different blocks
    std::vector<std::vector<cplx>> scat(static_cast<std::size_t>(n * n));
    std::vector<int> pair_axis_j(static_cast<std::size_t>(n * n), -1), pair_axis_k(static_cast<std::size_t>(n * n), -1);
    for (int a = 1; a <= n; ++a)
        for (int b = a + 1; b <= n; ++b) {
            const int j = block_of[static_cast<std::size_t>(a - 1)], k = block_of[static_cast<std::size_t>(b - 1)];
            if (j == k) continue;
            const double off = kappa * ((dr[static_cast<std::size_t>(a - 1)] - eps[static_cast<std::size_t>(j)]) -
                                        (dr[static_cast<std::size_t>(b - 1)] - eps[static_cast<std::size_t>(k)]));
            const int Nj = nodes[static_cast<std::size_t>(j)], Nk = nodes[static_cast<std::size_t>(k)];
            auto& tbl = scat[static_cast<std::size_t>((a - 1) * n + (b - 1))];
            tbl.resize(static_cast<std::size_t>(Nj + Nk - 1));
            for (int d = -(Nk - 1); d <= Nj - 1; ++d) {
                const double delta = diff_value(spec.axes[static_cast<std::size_t>(j)],
                                                spec.axes[static_cast<std::size_t>(k)], d);
                tbl[static_cast<std::size_t>(d + Nk - 1)] =
                    cplx(delta, off + kappa) / cplx(delta, off - kappa);
            }
            pair_axis_j[static_cast<std::size_t>((a - 1) * n + (b - 1))] = j;
            pair_axis_k[static_cast<std::size_t>((a - 1) * n + (b - 1))] = k;
        }

    // all permutations with decreasing order inside every block
    std::vector<CompiledPerm> perms;
    {
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 1);
        do {
            const auto inv = invert_permutation(perm);
            bool ok = true;
            for (int a = 1; a <= n && ok; ++a)
                for (int b = a + 1; b <= n && ok; ++b)
                    if (block_of[static_cast<std::size_t>(a - 1)] == block_of[static_cast<std::size_t>(b - 1)])
                        ok = inv[static_cast<std::size_t>(a - 1)] > inv[static_cast<std::size_t>(b - 1)];
            if (!ok) continue;
            CompiledPerm cp;
            cp.inv.resize(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a) cp.inv[static_cast<std::size_t>(a)] = inv[static_cast<std::size_t>(a)] - 1;
            for (int a = 1; a <= n; ++a)
                for (int b = a + 1; b <= n; ++b) {
                    if (block_of[static_cast<std::size_t>(a - 1)] == block_of[static_cast<std::size_t>(b - 1)]) continue;
                    if (cp.inv[static_cast<std::size_t>(a - 1)] > cp.inv[static_cast<std::size_t>(b - 1)])
                        cp.pair_ids.push_back((a - 1) * n + (b - 1));
                }
            perms.push_back(std::move(cp));
        } while (std::next_permutation(perm.begin(), perm.end()));
    }

    auto integrand = [&](std::span<const int> idx, std::span<const cplx>) -> cplx {
        cplx ypart = 1.0;
        for (int a = 0; a < n; ++a) {
            const int j = block_of[static_cast<std::size_t>(a)];
            ypart *= pyc[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        }
        cplx sum = 0.0;
        for (const auto& cp : perms) {
            cplx term = 1.0;
            for (int a = 0; a < n; ++a) {
                const int j = block_of[static_cast<std::size_t>(a)];
                term *= px[static_cast<std::size_t>(a)][static_cast<std::size_t>(
                    cp.inv[static_cast<std::size_t>(a)] * nodes[static_cast<std::size_t>(j)] +
                    idx[static_cast<std::size_t>(j)])];
            }
            for (int pid : cp.pair_ids) {
                const int j = pair_axis_j[static_cast<std::size_t>(pid)];
                const int k = pair_axis_k[static_cast<std::size_t>(pid)];
                term *= scat[static_cast<std::size_t>(pid)][static_cast<std::size_t>(
                    idx[static_cast<std::size_t>(j)] - idx[static_cast<std::size_t>(k)] +
                    nodes[static_cast<std::size_t>(k)] - 1)];
            }
            sum += term;
        }
        cplx g = 1.0;
        for (int j = 0; j < M; ++j)
            g *= ga[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        return sum * ypart * g;
    };

    return integrate_indexed(spec, integrand);
}

PropagatorResult partition_form_impl(const PropagatorQuery& q) {
    const int n = static_cast<int>(q.x.size());
    PropagatorResult out;
    out.method = Method::PartitionForm;

    KahanSum<cplx> total;
    double err = 0.0;
    for (const auto& c : enumerate_compositions(n)) {
        // partitions are unordered, so each block-size multiset enters once;
        // reordered compositions would revisit the same partitions
        if (!std::is_sorted(c.parts().begin(), c.parts().end())) continue;
        const int M = c.cluster_count();
        const std::vector<double> eps = partition_eps(q, M);
        double pref = std::pow(q.kappa, n - M) / (factorial_d(n) * std::pow(2.0 * M_PI, M));
        for (int nj : c.parts()) pref *= factorial_d(nj) * factorial_d(nj - 1);

        cplx comp_value = 0.0;
        double comp_err = 0.0;
        for (const auto& p : enumerate_partitions(c)) {
            const IntegralResult r = partition_term(q, p, eps);
            comp_value += pref * r.value;
            comp_err += std::abs(pref) * r.error_estimate;
            out.evaluations += r.evaluations;
        }
        total.add(comp_value);
        err += comp_err;
        out.terms.push_back({c.parts(), comp_value, comp_err});
    }
    out.value = total.value();
    out.error_estimate = err;
    out.imag_residue = std::abs(out.value.imag());
    return out;
}

// ---------------------------------------------------------------------------
// zero-point determinant form
// ---------------------------------------------------------------------------

PropagatorResult zero_point_impl(int n, double t, double kappa, const GridOverrides& grid) {
    PropagatorResult out;
    out.method = Method::ZeroPoint;

    KahanSum<cplx> total;
    double err = 0.0;
    for (const auto& c : enumerate_compositions(n)) {
        const int M = c.cluster_count();
        const auto& parts = c.parts();
        const double pref =
            factorial_d(n) * std::pow(kappa, n) / (factorial_d(M) * std::pow(2.0 * M_PI, M));

        double min_pole = std::numeric_limits<double>::infinity();
        for (int j = 0; j < M; ++j)
            for (int k = j + 1; k < M; ++k)
                min_pole = std::min(min_pole,
                                    0.5 * kappa * (parts[static_cast<std::size_t>(j)] +
                                                   parts[static_cast<std::size_t>(k)]));
        AxisBudget ab;
        ab.cluster_sizes = parts;
        ab.shift_margin.assign(static_cast<std::size_t>(M), 0.0);
        ab.pole_distance = M >= 2 ? min_pole : 0.0;
        ab.phase_coeff = 0.0;
        const GridSpec spec = plan_grid(t, ab, grid, false);

        std::vector<std::vector<double>> u;
        for (const auto& ax : spec.axes) u.push_back(axis_nodes(ax));
        std::vector<int> nodes(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) nodes[static_cast<std::size_t>(j)] = spec.axes[static_cast<std::size_t>(j)].nodes;

        std::vector<std::vector<double>> ex(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) {
            const double nj = parts[static_cast<std::size_t>(j)];
            const double grow = t * kappa * kappa / 12.0 * (nj * nj * nj - nj);
            auto& row = ex[static_cast<std::size_t>(j)];
            row.resize(static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)]));
            for (int k = 0; k < nodes[static_cast<std::size_t>(j)]; ++k) {
                const double uk = u[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                row[static_cast<std::size_t>(k)] = std::exp(-t * nj * uk * uk + grow);
            }
        }

        // inverse denominators per ordered axis pair
        std::vector<std::vector<cplx>> dinv(static_cast<std::size_t>(M * M));
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k) {
                if (j == k) continue;
                const double c2 = 0.5 * kappa * (parts[static_cast<std::size_t>(j)] +
                                                 parts[static_cast<std::size_t>(k)]);
                const int Nj = nodes[static_cast<std::size_t>(j)], Nk = nodes[static_cast<std::size_t>(k)];
                auto& tbl = dinv[static_cast<std::size_t>(j * M + k)];
                tbl.resize(static_cast<std::size_t>(Nj + Nk - 1));
                for (int d = -(Nk - 1); d <= Nj - 1; ++d) {
                    const double delta = diff_value(spec.axes[static_cast<std::size_t>(j)],
                                                    spec.axes[static_cast<std::size_t>(k)], d);
                    tbl[static_cast<std::size_t>(d + Nk - 1)] = 1.0 / cplx(c2, -delta);
                }
            }

        const bool fold = (M == n) && M >= 2;
        std::vector<double> diag(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j)
            diag[static_cast<std::size_t>(j)] = 1.0 / (kappa * parts[static_cast<std::size_t>(j)]);

        auto integrand = [&](std::span<const int> idx, std::span<const cplx>) -> cplx {
            cplx mat[64]; // M <= 8; stack scratch, lambda runs on many threads
            double mult = 1.0;
            if (fold) {
                if (!is_sorted_idx(idx)) return cplx(0.0, 0.0);
                mult = fold_multiplicity(idx);
            }
            for (int j = 0; j < M; ++j) {
                const double ej = ex[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
                for (int k = 0; k < M; ++k) {
                    if (j == k) {
                        mat[j * M + k] = ej * diag[static_cast<std::size_t>(j)];
                    } else {
                        mat[j * M + k] =
                            ej * dinv[static_cast<std::size_t>(j * M + k)][static_cast<std::size_t>(
                                     idx[static_cast<std::size_t>(j)] - idx[static_cast<std::size_t>(k)] +
                                     nodes[static_cast<std::size_t>(k)] - 1)];
                    }
                }
            }
            return mult * detail::complex_det(mat, M);
        };

        const IntegralResult r = integrate_indexed(spec, integrand);
        total.add(pref * r.value);
        err += std::abs(pref) * r.error_estimate;
        out.evaluations += r.evaluations;
        out.terms.push_back({parts, pref * r.value, std::abs(pref) * r.error_estimate});
    }
    out.value = total.value();
    out.error_estimate = err;
    out.imag_residue = std::abs(out.value.imag());
    return out;
}

} // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::TwRepulsive: return "tw";
        case Method::EigenRepulsive: return "eigen";
        case Method::ClusterExpansion: return "thm1";
        case Method::EigenAttractive: return "thm2";
        case Method::PartitionForm: return "partition";
        case Method::ZeroPoint: return "zero";
    }
    return "?";
}

PropagatorResult propagator_tw_repulsive(const PropagatorQuery& q) {
    validate_configs(q);
    require_cap(q, 4, "tw");
    if (q.kappa > 0.0)
        throw invalid_argument("tw: requires kappa <= 0 (the contour formula only represents the propagator there)");
    return tw_impl(q);
}

PropagatorResult propagator_eigen_repulsive(const PropagatorQuery& q) {
    validate_configs(q);
    require_cap(q, 4, "eigen");
    if (q.kappa > 0.0) throw invalid_argument("eigen: requires kappa <= 0");
    return eigen_repulsive_impl(q);
}

PropagatorResult propagator_cluster_expansion(const PropagatorQuery& q) {
    validate_configs(q);
    require_cap(q, 4, "thm1");
    if (!(q.kappa > 0.0)) throw invalid_argument("thm1: requires kappa > 0");
    return cluster_expansion_impl(q);
}

PropagatorResult propagator_eigen_attractive(const PropagatorQuery& q) {
    validate_configs(q);
    require_cap(q, 4, "thm2");
    if (!(q.kappa > 0.0)) throw invalid_argument("thm2: requires kappa > 0");
    return eigen_attractive_impl(q);
}

PropagatorResult propagator_partition_form(const PropagatorQuery& q) {
    validate_configs(q);
    require_cap(q, 3, "partition");
    if (!(q.kappa > 0.0)) throw invalid_argument("partition: requires kappa > 0");
    return partition_form_impl(q);
}

PropagatorResult propagator_zero_point(int n, double t, double kappa, const GridOverrides& grid) {
    if (n < 1) throw invalid_argument("zero: n must be positive");
    if (n > 8) throw resource_limit("zero: n exceeds cap 8");
    if (!(t > 0.0)) throw invalid_argument("zero: t must be positive");
    if (!(kappa > 0.0)) throw invalid_argument("zero: requires kappa > 0");
    return zero_point_impl(n, t, kappa, grid);
}

PropagatorResult evaluate_propagator(const PropagatorQuery& q) {
    switch (q.method) {
        case Method::TwRepulsive: return propagator_tw_repulsive(q);
        case Method::EigenRepulsive: return propagator_eigen_repulsive(q);
        case Method::ClusterExpansion: return propagator_cluster_expansion(q);
        case Method::EigenAttractive: return propagator_eigen_attractive(q);
        case Method::PartitionForm: return propagator_partition_form(q);
        case Method::ZeroPoint: {
            validate_configs(q);
            for (double v : q.x)
                if (v != 0.0) throw invalid_argument("zero: requires x = y = 0");
            for (double v : q.y)
                if (v != 0.0) throw invalid_argument("zero: requires x = y = 0");
            return propagator_zero_point(static_cast<int>(q.x.size()), q.t, q.kappa, q.grid);
        }
    }
    throw invalid_argument("unknown method");
}

double decay_rate(int n, double kappa, Method method, std::span<const double> t_grid) {
    if (!(kappa > 0.0)) throw invalid_argument("decay_rate: requires kappa > 0");
    if (t_grid.size() < 4) throw invalid_argument("decay_rate: need at least 4 time points");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
            throw invalid_argument("decay_rate: time grid must be increasing");
        if (!(t_grid[i] >= 2.0 / (kappa * kappa)))
            throw invalid_argument("decay_rate: need t >= 2/kappa^2");
    }

    std::vector<double> ys(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        PropagatorQuery q;
        q.x.assign(static_cast<std::size_t>(n), 0.0);
        q.y.assign(static_cast<std::size_t>(n), 0.0);
        q.t = t_grid[i];
        q.kappa = kappa;
        q.method = method;
        const PropagatorResult r = evaluate_propagator(q);
        if (!(r.value.real() > 0.0))
            throw numerical_failure("decay_rate: propagator value not positive");
        // remove the universal 1/sqrt(t) momentum-integration prefactor
        ys[i] = -std::log(r.value.real() * std::sqrt(t_grid[i]));
    }

    double tbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        tbar += t_grid[i];
        ybar += ys[i];
    }
    tbar /= static_cast<double>(t_grid.size());
    ybar /= static_cast<double>(t_grid.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        num += (t_grid[i] - tbar) * (ys[i] - ybar);
        den += (t_grid[i] - tbar) * (t_grid[i] - tbar);
    }
    return num / den;
}

double completeness_integral(double kappa, double t, std::span<const double> y, int outer_nodes) {
    if (y.size() != 2) throw invalid_argument("completeness_integral: two-body only");
    if (!(t > 0.0)) throw invalid_argument("completeness_integral: t must be positive");
    if (outer_nodes < 5) throw invalid_argument("completeness_integral: outer grid too small");

    // the symmetric extension places kernel mass near every permutation of y,
    // so each axis must span all of y plus the diffusive width
    const double lo = *std::min_element(y.begin(), y.end()) - 6.0 * std::sqrt(t);
    const double hi = *std::max_element(y.begin(), y.end()) + 6.0 * std::sqrt(t);
    const int N = outer_nodes | 1;
    const double h = (hi - lo) / (N - 1);

    const Method method = kappa > 0.0 ? Method::EigenAttractive : Method::TwRepulsive;

    double total = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x1 = lo + i * h;
        const double wi = (i == 0 || i == N - 1) ? 0.5 : 1.0;
        for (int j = 0; j < N; ++j) {
            const double x2 = lo + j * h;
            const double wj = (j == 0 || j == N - 1) ? 0.5 : 1.0;
            PropagatorQuery q;
            q.x = {std::min(x1, x2), std::max(x1, x2)};
            q.y.assign(y.begin(), y.end());
            q.t = t;
            q.kappa = kappa;
            q.method = method;
            const PropagatorResult r = evaluate_propagator(q);
            total += wi * wj * h * h * r.value.real();
        }
    }
    return total;
}

} // namespace deltagas
