#include "deltagas/bethe.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "deltagas/errors.hpp"
#include "doctest.h"

using namespace deltagas;

namespace {

constexpr cplx I{0.0, 1.0};

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// independent direct expansion of the bound-state eigenfunction (string-shifted
// rapidities r(a) - n_j/2 - 1/2 in the phases, r(a) - n_j/2 in the factors)
cplx psi_attractive_direct(std::span<const double> x, const ClusterComposition& c,
                           std::span<const double> q, double kappa) {
    const int n = c.n();
    const int M = c.cluster_count();
    double fact_n = 1.0;
    for (int i = 2; i <= n; ++i) fact_n *= i;
    cplx pref = std::pow(cplx(kappa), 0.5 * (n - M)) / std::sqrt(fact_n);
    for (int nj : c.parts()) {
        double f1 = 1.0, f2 = 1.0;
        for (int i = 2; i <= nj; ++i) f1 *= i;
        for (int i = 2; i <= nj - 1; ++i) f2 *= i;
        pref *= std::sqrt(f1 * f2);
    }
    cplx sum = 0.0;
    for (const auto& sigma :
         enumerate_restricted_permutations(c, PermutationClassKind::IncreasingWithinBlocks)) {
        const auto inv = invert_permutation(sigma);
        cplx term = 1.0;
        for (int a = 1; a <= n; ++a) {
            const int j = c.cluster_of(a);
            const double nj = c.parts()[static_cast<std::size_t>(j)];
            const cplx arg = q[static_cast<std::size_t>(j)] + I * kappa * (c.rank(a) - nj / 2.0 - 0.5);
            term *= std::exp(I * arg * x[static_cast<std::size_t>(inv[static_cast<std::size_t>(a - 1)] - 1)]);
        }
        for (int a = 1; a <= n; ++a)
            for (int b = 1; b <= n; ++b) {
                const int j = c.cluster_of(a), k = c.cluster_of(b);
                if (j >= k) continue;
                if (inv[static_cast<std::size_t>(a - 1)] <= inv[static_cast<std::size_t>(b - 1)]) continue;
                const double nj = c.parts()[static_cast<std::size_t>(j)];
                const double nk = c.parts()[static_cast<std::size_t>(k)];
                const cplx za = q[static_cast<std::size_t>(j)] + I * kappa * (c.rank(a) - nj / 2.0);
                const cplx zb = q[static_cast<std::size_t>(k)] + I * kappa * (c.rank(b) - nk / 2.0);
                term *= (za - zb + I * kappa) / (za - zb - I * kappa);
            }
        sum += term;
    }
    return pref * sum;
}

// -sum_j d2/dx_j2 by central differences
cplx fd_laplacian(const std::function<cplx(std::span<const double>)>& psi,
                  std::span<const double> x, double h) {
    std::vector<double> xs(x.begin(), x.end());
    const cplx center = psi(xs);
    cplx acc = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double orig = xs[j];
        xs[j] = orig + h;
        const cplx up = psi(xs);
        xs[j] = orig - h;
        const cplx dn = psi(xs);
        xs[j] = orig;
        acc += (up - 2.0 * center + dn) / (h * h);
    }
    return -acc;
}

// one-sided second-order residual of (d_{j+1} - d_j + kappa) psi at x_{j+1} = x_j
cplx fd_boundary_residual(const std::function<cplx(std::span<const double>)>& psi,
                          std::span<const double> x, int j, double kappa, double h) {
    std::vector<double> xs(x.begin(), x.end());
    auto at = [&](int idx, double delta) {
        xs[static_cast<std::size_t>(idx)] += delta;
        const cplx v = psi(xs);
        xs[static_cast<std::size_t>(idx)] -= delta;
        return v;
    };
    const cplx f0 = psi(xs);
    // d/dx_{j+1} with forward steps, d/dx_j with backward steps
    const cplx dup = (-3.0 * f0 + 4.0 * at(j + 1, h) - at(j + 1, 2.0 * h)) / (2.0 * h);
    const cplx ddn = (3.0 * f0 - 4.0 * at(j, -h) + at(j, -2.0 * h)) / (2.0 * h);
    return dup - ddn + kappa * f0;
}

} // namespace

TEST_CASE("symmetrized plane-wave eigenfunction: basic values") {
    // n = 1: a plane wave for any kappa
    const std::vector<double> x1{0.4}, q1{1.3};
    CHECK(rel(psi_repulsive(x1, q1, -0.8), std::exp(I * 1.3 * 0.4)) < 1e-15);

    // kappa = 0: symmetrized plane wave
    const std::vector<double> x{-0.3, 0.5, 0.9}, q{0.7, -0.2, 1.4};
    cplx direct = 0.0;
    std::vector<int> perm{1, 2, 3};
    do {
        cplx term = 1.0;
        const auto inv = invert_permutation(perm);
        for (int j = 0; j < 3; ++j)
            term *= std::exp(I * q[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(inv[static_cast<std::size_t>(j)] - 1)]);
        direct += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    direct /= 6.0;
    CHECK(rel(psi_repulsive(x, q, 0.0), direct) < 1e-14);

    // n = 2 hand expansion
    const std::vector<double> x2{0.0, 1.0}, q2{1.0, -1.0};
    const double kappa = -1.0;
    const cplx swap_factor = (cplx(q2[0] - q2[1]) + I * kappa) / (cplx(q2[0] - q2[1]) - I * kappa);
    const cplx expected =
        0.5 * (std::exp(I * (q2[0] * x2[0] + q2[1] * x2[1])) +
               swap_factor * std::exp(I * (q2[0] * x2[1] + q2[1] * x2[0])));
    CHECK(rel(psi_repulsive(x2, q2, kappa), expected) < 1e-14);

    CHECK_THROWS_AS(psi_repulsive(x2, q1, -1.0), invalid_argument);
}

TEST_CASE("coinciding momenta are perturbed, value stays near the limit") {
    const std::vector<double> q{1.0, 1.0};
    const auto qp = perturb_coinciding_momenta(q);
    CHECK(qp[0] != qp[1]);
    const std::vector<double> x{0.1, 0.6};
    const cplx v = psi_repulsive(x, q, -1.0);
    CHECK(std::isfinite(v.real()));
    CHECK(std::abs(v) < 1e-6); // exact limit vanishes at coinciding momenta
}

TEST_CASE("energies") {
    CHECK(energy_repulsive(std::vector<double>{}) == 0.0);
    CHECK(energy_repulsive(std::vector<double>{1.0, 2.0}) == doctest::Approx(5.0));
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> q(4);
    for (auto& v : q) v = u(rng);
    double direct = 0.0;
    for (double v : q) direct += v * v;
    CHECK(energy_repulsive(q) == doctest::Approx(direct));

    const double kappa = 1.7;
    const BetheState pair{ClusterComposition(2, {2}), {0.0}, kappa};
    CHECK(energy_attractive(pair) == doctest::Approx(-kappa * kappa / 2.0));
    for (int n = 2; n <= 5; ++n) {
        const BetheState s{ClusterComposition(n, {n}), {0.0}, kappa};
        CHECK(energy_attractive(s) ==
              doctest::Approx(-kappa * kappa / 12.0 * (n * n * n - n)));
    }
    const BetheState singles{ClusterComposition(3, {1, 1, 1}), {0.4, -0.6, 1.1}, kappa};
    CHECK(energy_attractive(singles) == doctest::Approx(energy_repulsive(std::vector<double>{0.4, -0.6, 1.1})));
}

TEST_CASE("repulsive eigenfunction solves the interior equation and boundary condition") {
    const std::vector<double> x{-0.4, 0.1, 0.7};
    const std::vector<double> q{0.3, -0.8, 1.1};
    const double kappa = -0.9;
    auto psi = [&](std::span<const double> xx) { return psi_repulsive(xx, q, kappa); };
    const cplx hpsi = fd_laplacian(psi, x, 1e-4);
    const cplx val = psi(x);
    CHECK(std::abs(hpsi / val - energy_repulsive(q)) < 1e-5 * std::abs(energy_repulsive(q)));

    // boundary x_2 = x_3 approached from the interior
    const std::vector<double> xb{-0.4, 0.2, 0.2};
    const cplx resid = fd_boundary_residual(psi, xb, 1, kappa, 1e-5);
    CHECK(std::abs(resid) < 1e-4 * std::abs(kappa * psi(xb)));
}

TEST_CASE("bound-state eigenfunction: eigenvalue and boundary checks") {
    const ClusterComposition c(3, {2, 1});
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const BetheState state{c, {u(rng), u(rng)}, 1.0};
    auto psi = [&](std::span<const double> xx) { return psi_attractive(xx, state); };

    const std::vector<double> x{-0.5, 0.0, 0.6};
    const double e = energy_attractive(state);
    const cplx hpsi = fd_laplacian(psi, x, 1e-4);
    CHECK(std::abs(hpsi / psi(x) - e) < 1e-6 * std::abs(e));

    const std::vector<double> xb{-0.5, 0.1, 0.1};
    const cplx resid = fd_boundary_residual(psi, xb, 1, state.kappa, 1e-5);
    CHECK(std::abs(resid) < 1e-4 * std::abs(state.kappa * psi(xb)));
}

TEST_CASE("two-body bound state decays exponentially in the separation") {
    const BetheState s{ClusterComposition(2, {2}), {0.0}, 1.3};
    auto value = [&](double usep) {
        const std::vector<double> x{-usep / 2.0, usep / 2.0};
        return std::abs(psi_attractive(x, s));
    };
    const double r1 = value(1.0), r2 = value(2.0);
    CHECK(std::abs(std::log(r1 / r2) - s.kappa / 2.0) < 1e-10);
}

TEST_CASE("cluster function reductions") {
    // all singleton clusters: sqrt(n!) times the symmetrized plane-wave sum
    for (double kappa : {-0.7, 1.2}) {
        const ClusterComposition c(3, {1, 1, 1});
        const std::vector<double> x{-0.2, 0.3, 0.8}, qr{0.5, -1.0, 0.25};
        const std::vector<cplx> qc{qr[0], qr[1], qr[2]};
        const cplx phi = phi_cluster(x, c, qc, kappa);
        CHECK(rel(phi, std::sqrt(6.0) * psi_repulsive(x, qr, kappa)) < 1e-13);
    }

    // single cluster: one-term product formula
    {
        const int n = 3;
        const ClusterComposition c(n, {n});
        const std::vector<double> x{-0.6, -0.1, 0.9};
        const double kappa = 0.8;
        const cplx q0{0.4, -0.15};
        cplx direct = std::pow(cplx(kappa), 0.5 * (n - 1)) * std::sqrt(2.0); // sqrt((n-1)!)
        for (int a = 1; a <= n; ++a)
            direct *= std::exp(I * (q0 + I * kappa * (a - 1.0)) * x[static_cast<std::size_t>(a - 1)]);
        CHECK(rel(phi_cluster(x, c, std::vector<cplx>{q0}, kappa), direct) < 1e-13);
    }
}

TEST_CASE("string-shifted evaluation matches the direct bound-state expansion") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 2; n <= 4; ++n) {
        for (const auto& c : enumerate_compositions(n)) {
            std::vector<double> q(static_cast<std::size_t>(c.cluster_count()));
            for (auto& v : q) v = u(rng);
            std::vector<double> x(static_cast<std::size_t>(n));
            double acc = -0.8;
            for (auto& v : x) {
                v = acc;
                acc += 0.1 + 0.3 * (u(rng) + 1.0);
            }
            const BetheState state{c, q, 1.1};
            const cplx via_shift = psi_attractive(x, state);
            const cplx direct = psi_attractive_direct(x, c, q, state.kappa);
            CHECK(rel(via_shift, direct) < 1e-12);
        }
    }
}

TEST_CASE("all-singleton bound-state eigenfunction vs the repulsive one") {
    // the two normalizations differ by sqrt(n!)
    const std::vector<double> x{-0.2, 0.3, 0.8}, q{0.5, -1.0, 0.25};
    const double kappa = 0.9;
    const BetheState s{ClusterComposition(3, {1, 1, 1}), q, kappa};
    CHECK(rel(psi_attractive(x, s), std::sqrt(6.0) * psi_repulsive(x, q, kappa)) < 1e-13);
}

TEST_CASE("decreasing-class cluster function and the conjugation relation") {
    const double kappa = 1.4;
    // single cluster: one-term sum over the reversal
    {
        const int n = 3;
        const ClusterComposition c(n, {n});
        const std::vector<double> y{-0.7, 0.0, 0.5};
        const cplx q0{0.3, 0.0};
        cplx direct = std::pow(cplx(kappa), 0.5 * (n - 1)) * std::sqrt(2.0);
        // tau is the full reversal: tau^-1(a) = n + 1 - a
        for (int a = 1; a <= n; ++a)
            direct *= std::exp(-I * (q0 + I * kappa * (a - 1.0)) * y[static_cast<std::size_t>(n - a)]);
        CHECK(rel(phi_tilde(y, c, std::vector<cplx>{q0}, kappa), direct) < 1e-13);
    }

    // real momenta: phi_tilde(y;q) = conj(phi(y; q - i kappa (n_vec - 1)))
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& c : enumerate_compositions(3)) {
        const std::vector<double> y{-0.7, 0.1, 0.6};
        std::vector<cplx> q(static_cast<std::size_t>(c.cluster_count()));
        std::vector<cplx> qshift(q.size());
        for (std::size_t j = 0; j < q.size(); ++j) {
            q[j] = u(rng);
            qshift[j] = q[j] - I * kappa * (c.parts()[j] - 1.0);
        }
        const cplx lhs = phi_tilde(y, c, q, kappa);
        const cplx rhs = std::conj(phi_cluster(y, c, qshift, kappa));
        CHECK(rel(lhs, rhs) < 1e-12);
    }

    // all singletons: plain conjugate at the same momenta
    {
        const ClusterComposition c(3, {1, 1, 1});
        const std::vector<double> y{-0.4, 0.2, 0.9};
        const std::vector<cplx> q{0.6, -0.3, 1.0};
        CHECK(rel(phi_tilde(y, c, q, kappa), std::conj(phi_cluster(y, c, q, kappa))) < 1e-13);
    }
}

TEST_CASE("antisymmetrized-product identity") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_cplx = [&]() { return cplx(u(rng), u(rng)); };

    // f = 0: exact antisymmetrization
    {
        const std::vector<cplx> xi{{0.3, -0.2}, {1.1, 0.4}, {-0.7, 0.9}};
        const std::vector<cplx> f(9, cplx(0.0));
        CHECK(check_vandermonde_lemma(xi, f) < 1e-14);
    }
    // n = 2 by hand: (x1-x2+f) - (x2-x1+f) = 2(x1-x2)
    {
        const std::vector<cplx> xi{{0.5, 0.1}, {-0.3, 0.7}};
        std::vector<cplx> f(4, cplx(0.0));
        f[1] = cplx(2.3, -1.7);
        CHECK(check_vandermonde_lemma(xi, f) < 1e-14);
    }
    // 100 random draws, n in {2,3,4}
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 3;
        std::vector<cplx> xi(static_cast<std::size_t>(n));
        for (auto& v : xi) v = random_cplx();
        std::vector<cplx> f(static_cast<std::size_t>(n * n));
        for (auto& v : f) v = random_cplx();
        CHECK(check_vandermonde_lemma(xi, f) < 1e-10);
    }
    CHECK_THROWS_AS(check_vandermonde_lemma(std::vector<cplx>(7), std::vector<cplx>(49)),
                    resource_limit);
}

TEST_CASE("telescoping product identity") {
    // single-factor case collapses to (d^2 + kappa^2)/d^2
    CHECK(check_telescoping_identity(cplx(0.7, 0.3), 1, 1, 1.1) < 1e-13);
    CHECK(check_telescoping_identity(cplx(1.3, -0.4), 2, 1, 0.9) < 1e-13);

    std::mt19937 rng(53);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    int done = 0;
    while (done < 100) {
        const cplx dq(u(rng), u(rng));
        const int nj = 1 + static_cast<int>(std::abs(u(rng)) * 10.0) % 4;
        const int nk = 1 + static_cast<int>(std::abs(u(rng)) * 10.0) % 4;
        if (std::abs(dq) < 0.05) continue; // keep away from the genuine pole
        CHECK(check_telescoping_identity(dq, nj, nk, 0.8) < 1e-12);
        ++done;
    }
    CHECK_THROWS_AS(check_telescoping_identity(cplx(0.0, 0.0), 2, 1, 1.0), invalid_argument);
}

TEST_CASE("cluster determinant identity") {
    // M = 1: both sides are 1
    CHECK(check_cauchy_determinant(std::vector<double>{0.3}, {2}, 1.0) < 1e-14);

    // M = 2 hand check
    CHECK(check_cauchy_determinant(std::vector<double>{1.0, -1.0}, {1, 1}, 1.0) < 1e-13);

    std::mt19937 rng(67);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::vector<std::vector<int>> part_choices{{1, 1}, {2, 1}, {2, 1, 1}, {2, 2, 1}, {3, 1, 2}};
    int done = 0;
    while (done < 100) {
        const auto& parts = part_choices[static_cast<std::size_t>(done) % part_choices.size()];
        std::vector<double> q(parts.size());
        for (auto& v : q) v = u(rng);
        bool distinct = true;
        for (std::size_t a = 0; a < q.size(); ++a)
            for (std::size_t b = a + 1; b < q.size(); ++b)
                if (std::abs(q[a] - q[b]) < 0.05) distinct = false;
        if (!distinct) continue;
        CHECK(check_cauchy_determinant(q, parts, 0.7) < 1e-10);
        ++done;
    }
    CHECK_THROWS_AS(check_cauchy_determinant(std::vector<double>{0.1, 0.2}, {1, 1}, 0.0),
                    invalid_argument);
}

TEST_CASE("cluster-expansion integrand: one-body case and argument checks") {
    const ClusterComposition c(1, {1});
    const std::vector<double> mu{0.0}, x{0.3}, y{-0.2};
    const double kappa = 1.0, t = 0.8;
    const std::vector<cplx> q{cplx(0.9, 0.0)};
    const cplx xi = q[0]; // mu + r - 1 = 0
    const cplx expected = std::exp(-t * xi * xi) * std::exp(I * xi * (x[0] - y[0]));
    CHECK(rel(cluster_integrand(c, mu, kappa, x, y, t, q), expected) < 1e-14);

    CHECK_THROWS_AS(cluster_integrand(c, std::vector<double>{0.5}, kappa, x, y, t, q),
                    invalid_argument);
    CHECK_THROWS_AS(cluster_integrand(c, std::vector<double>{-1.0}, kappa, x, y, t, q),
                    invalid_argument);
}

TEST_CASE("cluster-expansion integrand is symmetric in singleton momenta") {
    const ClusterComposition c(3, {1, 1, 1});
    const std::vector<double> mu{0.0, 0.0, 0.0};
    const std::vector<double> x{-0.4, 0.2, 0.7}, y{-0.3, 0.1, 0.8};
    const double kappa = 0.9, t = 0.6;
    const std::vector<cplx> q{0.5, -0.7, 1.1};
    const cplx base = cluster_integrand(c, mu, kappa, x, y, t, q);
    const std::vector<cplx> swapped{q[1], q[2], q[0]};
    CHECK(rel(cluster_integrand(c, mu, kappa, x, y, t, swapped), base) < 1e-13);
}

TEST_CASE("apparent singularities of the cluster integrand") {
    const double t = 0.7, kappa = 1.0;

    // catalogue for n <= 3: zeros and simple poles only
    for (int n = 2; n <= 3; ++n) {
        std::vector<double> x, y;
        for (int i = 0; i < n; ++i) {
            x.push_back(-0.3 + 0.45 * i);
            y.push_back(-0.25 + 0.4 * i);
        }
        for (const auto& c : enumerate_compositions(n)) {
            if (c.cluster_count() < 2) continue;
            const auto mu = symmetric_mu(c);
            for (int j = 0; j < c.cluster_count(); ++j)
                for (int k = 0; k < c.cluster_count(); ++k) {
                    if (j == k) continue;
                    const int nj = c.parts()[static_cast<std::size_t>(j)];
                    const int nk = c.parts()[static_cast<std::size_t>(k)];
                    for (int g = -nj; g <= nk; ++g) {
                        const auto probe =
                            probe_integrand_singularity(c, mu, kappa, x, y, t, j, k, g);
                        CHECK(probe.verdict == expected_singularity(c, j, k, g));
                    }
                }
        }
    }

    // explicit cases: coinciding singleton momenta vanish; the end offsets
    // diverge like 1/h; equal-size clusters vanish at the matched coincidence
    {
        const ClusterComposition c(2, {1, 1});
        const std::vector<double> mu{0.0, 0.0};
        const std::vector<double> x{-0.3, 0.15}, y{-0.25, 0.15};
        const auto z = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 0);
        CHECK(z.verdict == SingularityVerdict::Vanishes);
        const auto p = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 1);
        CHECK(p.verdict == SingularityVerdict::SimplePole);
        CHECK(std::abs(p.limit) > 1e-8);
    }
    {
        const ClusterComposition c(3, {2, 1});
        const auto mu = symmetric_mu(c);
        const std::vector<double> x{-0.3, 0.15, 0.6}, y{-0.25, 0.15, 0.55};
        const auto p = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 1);
        CHECK(p.verdict == SingularityVerdict::SimplePole);
    }
    {
        // removable-but-finite apparent pole needs clusters of size >= 2 on both sides
        const ClusterComposition c(4, {2, 2});
        const auto mu = symmetric_mu(c);
        const std::vector<double> x{-0.4, -0.1, 0.2, 0.55}, y{-0.35, -0.05, 0.25, 0.6};
        const auto f = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 1);
        CHECK(f.verdict == SingularityVerdict::Finite);
        const auto z = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 0);
        CHECK(z.verdict == SingularityVerdict::Vanishes);
        const auto p = probe_integrand_singularity(c, mu, kappa, x, y, t, 0, 1, 2);
        CHECK(p.verdict == SingularityVerdict::SimplePole);
    }
}
