#include "deltagas/bethe.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "deltagas/errors.hpp"
#include "detmath.hpp"

namespace deltagas {

namespace {

constexpr cplx kI{0.0, 1.0};

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

int parity_sign(const std::vector<int>& p) {
    int inv = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j]) ++inv;
    return (inv % 2 == 0) ? 1 : -1;
}

cplx cluster_prefactor(const ClusterComposition& c, double kappa) {
    const int n = c.n();
    const int M = c.cluster_count();
    cplx pref = std::pow(cplx(kappa, 0.0), 0.5 * (n - M)) / std::sqrt(factorial(n));
    for (int nj : c.parts()) pref *= std::sqrt(factorial(nj) * factorial(nj - 1));
    return pref;
}

} // namespace

std::vector<double> perturb_coinciding_momenta(std::span<const double> q) {
    double scale = 1.0;
    for (double v : q) scale = std::max(scale, std::abs(v));
    bool collide = false;
    for (std::size_t j = 0; j < q.size() && !collide; ++j)
        for (std::size_t k = j + 1; k < q.size() && !collide; ++k)
            collide = std::abs(q[j] - q[k]) < 1e-12 * scale;
    std::vector<double> out(q.begin(), q.end());
    if (collide) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += static_cast<double>(j) * 1e-9 * scale;
        std::cerr << "deltagas: coinciding momenta perturbed by 1e-9*scale\n";
    }
    return out;
}

cplx psi_repulsive(std::span<const double> x, std::span<const double> q, double kappa) {
    const int n = static_cast<int>(x.size());
    if (q.size() != x.size()) throw invalid_argument("psi_repulsive: x and q length mismatch");
    if (n == 0) throw invalid_argument("psi_repulsive: empty configuration");
    if (n > kEnumerationCap) throw resource_limit("psi_repulsive: n exceeds enumeration cap");

    const std::vector<double> qs =
        (kappa == 0.0) ? std::vector<double>(q.begin(), q.end()) : perturb_coinciding_momenta(q);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
    cplx sum = 0.0;
    do {
        const std::vector<int> inv = invert_permutation(perm);
        cplx term = 1.0;
        for (int j = 0; j < n; ++j)
            term *= std::exp(kI * qs[static_cast<std::size_t>(j)] *
                             x[static_cast<std::size_t>(inv[static_cast<std::size_t>(j)] - 1)]);
        if (kappa != 0.0) {
            for (int j = 0; j < n; ++j)
                for (int k = j + 1; k < n; ++k)
                    if (inv[static_cast<std::size_t>(j)] > inv[static_cast<std::size_t>(k)]) {
                        const double d = qs[static_cast<std::size_t>(j)] - qs[static_cast<std::size_t>(k)];
                        term *= cplx(d, kappa) / cplx(d, -kappa);
                    }
        }
        sum += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / factorial(n);
}

double energy_repulsive(std::span<const double> q) {
    double e = 0.0;
    for (double v : q) e += v * v;
    return e;
}

double energy_attractive(const BetheState& state) {
    const auto& parts = state.composition.parts();
    if (state.momenta.size() != parts.size())
        throw invalid_argument("energy_attractive: momenta length mismatch");
    double e = 0.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        const double nj = parts[j];
        e += nj * state.momenta[j] * state.momenta[j] -
             state.kappa * state.kappa / 12.0 * (nj * nj * nj - nj);
    }
    return e;
}

cplx phi_cluster(std::span<const double> x, const ClusterComposition& c,
                 std::span<const cplx> q, double kappa) {
    const int n = c.n();
    const int M = c.cluster_count();
    if (static_cast<int>(x.size()) != n) throw invalid_argument("phi_cluster: x length mismatch");
    if (static_cast<int>(q.size()) != M) throw invalid_argument("phi_cluster: q length mismatch");

    std::vector<cplx> xi(static_cast<std::size_t>(n)), zeta(static_cast<std::size_t>(n));
    double scale = 1.0;
    for (int a = 1; a <= n; ++a) {
        const int j = c.cluster_of(a);
        xi[static_cast<std::size_t>(a - 1)] = q[static_cast<std::size_t>(j)] + kI * kappa * (c.rank(a) - 1.0);
        zeta[static_cast<std::size_t>(a - 1)] = q[static_cast<std::size_t>(j)] + kI * kappa * static_cast<double>(c.rank(a));
        scale = std::max(scale, std::abs(q[static_cast<std::size_t>(j)]));
    }

    cplx sum = 0.0;
    for (const auto& sigma : enumerate_restricted_permutations(c, PermutationClassKind::IncreasingWithinBlocks)) {
        const std::vector<int> inv = invert_permutation(sigma);
        cplx term = 1.0;
        for (int a = 1; a <= n; ++a)
            term *= std::exp(kI * xi[static_cast<std::size_t>(a - 1)] *
                             x[static_cast<std::size_t>(inv[static_cast<std::size_t>(a - 1)] - 1)]);
        for (int a = 1; a <= n; ++a)
            for (int b = 1; b <= n; ++b) {
                if (c.cluster_of(a) >= c.cluster_of(b)) continue; // ordered cluster pairs j < k
                if (inv[static_cast<std::size_t>(a - 1)] <= inv[static_cast<std::size_t>(b - 1)]) continue;
                const cplx d = zeta[static_cast<std::size_t>(a - 1)] - zeta[static_cast<std::size_t>(b - 1)];
                const cplx den = d - kI * kappa;
                if (std::abs(den) < 1e-13 * scale)
                    throw numerical_failure("phi_cluster: evaluation at a scattering pole");
                term *= (d + kI * kappa) / den;
            }
        sum += term;
    }
    return cluster_prefactor(c, kappa) * sum;
}

cplx phi_tilde(std::span<const double> y, const ClusterComposition& c,
               std::span<const cplx> q, double kappa) {
    const int n = c.n();
    const int M = c.cluster_count();
    if (static_cast<int>(y.size()) != n) throw invalid_argument("phi_tilde: y length mismatch");
    if (static_cast<int>(q.size()) != M) throw invalid_argument("phi_tilde: q length mismatch");

    std::vector<cplx> xi(static_cast<std::size_t>(n)), zeta(static_cast<std::size_t>(n));
    double scale = 1.0;
    for (int a = 1; a <= n; ++a) {
        const int j = c.cluster_of(a);
        xi[static_cast<std::size_t>(a - 1)] = q[static_cast<std::size_t>(j)] + kI * kappa * (c.rank(a) - 1.0);
        zeta[static_cast<std::size_t>(a - 1)] = q[static_cast<std::size_t>(j)] + kI * kappa * static_cast<double>(c.rank(a));
        scale = std::max(scale, std::abs(q[static_cast<std::size_t>(j)]));
    }

    cplx sum = 0.0;
    for (const auto& tau : enumerate_restricted_permutations(c, PermutationClassKind::DecreasingWithinBlocks)) {
        const std::vector<int> inv = invert_permutation(tau);
        cplx term = 1.0;
        for (int a = 1; a <= n; ++a)
            term *= std::exp(-kI * xi[static_cast<std::size_t>(a - 1)] *
                             y[static_cast<std::size_t>(inv[static_cast<std::size_t>(a - 1)] - 1)]);
        for (int a = 1; a <= n; ++a)
            for (int b = 1; b <= n; ++b) {
                if (c.cluster_of(a) >= c.cluster_of(b)) continue;
                if (inv[static_cast<std::size_t>(a - 1)] <= inv[static_cast<std::size_t>(b - 1)]) continue;
                const cplx d = zeta[static_cast<std::size_t>(a - 1)] - zeta[static_cast<std::size_t>(b - 1)];
                const cplx den = d + kI * kappa;
                if (std::abs(den) < 1e-13 * scale)
                    throw numerical_failure("phi_tilde: evaluation at a scattering pole");
                term *= (d - kI * kappa) / den;
            }
        sum += term;
    }
    return cluster_prefactor(c, kappa) * sum;
}

cplx psi_attractive(std::span<const double> x, const BetheState& state) {
    if (!(state.kappa > 0.0)) throw invalid_argument("psi_attractive: kappa must be positive");
    const auto& parts = state.composition.parts();
    if (state.momenta.size() != parts.size())
        throw invalid_argument("psi_attractive: momenta length mismatch");
    std::vector<cplx> qs(state.momenta.size());
    for (std::size_t j = 0; j < qs.size(); ++j)
        qs[j] = state.momenta[j] - kI * state.kappa * 0.5 * (parts[j] - 1.0);
    return phi_cluster(x, state.composition, qs, state.kappa);
}

double check_vandermonde_lemma(std::span<const cplx> xi, std::span<const cplx> f_offsets) {
    const int n = static_cast<int>(xi.size());
    if (n < 1 || n > 6) throw resource_limit("check_vandermonde_lemma: need 1 <= n <= 6");
    if (f_offsets.size() != xi.size() * xi.size())
        throw invalid_argument("check_vandermonde_lemma: f must be n x n");
    auto f = [&](int a, int b) { return f_offsets[static_cast<std::size_t>(a * n + b)]; };

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
    cplx lhs = 0.0;
    double scale = 0.0;
    do {
        cplx term = 1.0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                term *= xi[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)] - 1)] -
                            xi[static_cast<std::size_t>(perm[static_cast<std::size_t>(b)] - 1)] +
                        f(a, b);
        term *= static_cast<double>(parity_sign(perm));
        lhs += term;
        scale = std::max(scale, std::abs(term));
    } while (std::next_permutation(perm.begin(), perm.end()));

    cplx rhs = factorial(n);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            rhs *= xi[static_cast<std::size_t>(a)] - xi[static_cast<std::size_t>(b)];

    scale = std::max({scale, std::abs(rhs), 1e-300});
    return std::abs(lhs - rhs) / scale;
}

double check_telescoping_identity(cplx dq, int nj, int nk, double kappa) {
    if (nj < 1 || nk < 1) throw invalid_argument("check_telescoping_identity: cluster sizes must be >= 1");
    auto denom_ok = [&](cplx d) { return std::abs(d) > 1e-14 * (1.0 + std::abs(dq)); };

    cplx lhs = 1.0;
    for (int r = 1; r <= nj; ++r)
        for (int s = 1; s <= nk; ++s) {
            const cplx d1 = dq + kI * kappa * static_cast<double>(r - s);
            const cplx d2 = dq + kI * kappa * static_cast<double>(nj - nk - r + s);
            if (!denom_ok(d1) || !denom_ok(d2))
                throw invalid_argument("check_telescoping_identity: exact pole input");
            lhs *= (dq + kI * kappa * static_cast<double>(r - s - 1)) / d1;
            lhs *= (dq + kI * kappa * static_cast<double>(nj - nk - r + s + 1)) / d2;
        }

    const cplx den = dq * (dq + kI * kappa * static_cast<double>(nj - nk));
    if (!denom_ok(dq) || !denom_ok(dq + kI * kappa * static_cast<double>(nj - nk)))
        throw invalid_argument("check_telescoping_identity: exact pole input");
    const cplx rhs = (dq - kI * kappa * static_cast<double>(nk)) *
                     (dq + kI * kappa * static_cast<double>(nj)) / den;
    return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
}

double check_cauchy_determinant(std::span<const double> q, const std::vector<int>& parts,
                                double kappa) {
    const int M = static_cast<int>(parts.size());
    if (q.size() != parts.size()) throw invalid_argument("check_cauchy_determinant: size mismatch");
    if (M < 1 || M > 5) throw resource_limit("check_cauchy_determinant: need 1 <= M <= 5");
    if (kappa == 0.0) throw invalid_argument("check_cauchy_determinant: kappa must be nonzero");

    double lhs = 1.0, mid = 1.0;
    for (int j = 0; j < M; ++j)
        for (int k = j + 1; k < M; ++k) {
            const double d = q[static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(k)];
            const double njk = 0.5 * (parts[static_cast<std::size_t>(j)] - parts[static_cast<std::size_t>(k)]);
            for (int r = 1; r <= parts[static_cast<std::size_t>(j)]; ++r)
                for (int s = 1; s <= parts[static_cast<std::size_t>(k)]; ++s) {
                    const cplx num = cplx(d, kappa * (-njk + r - s));
                    const cplx den = cplx(d, kappa * (-njk + r - s - 1));
                    if (std::abs(den) < 1e-14 * (1.0 + std::abs(d)))
                        throw invalid_argument("check_cauchy_determinant: singular denominator");
                    lhs *= std::norm(num) / std::norm(den);
                }
            const cplx mnum = cplx(d, -kappa * njk);
            const cplx mden = cplx(d, -kappa * 0.5 *
                                          (parts[static_cast<std::size_t>(j)] + parts[static_cast<std::size_t>(k)]));
            mid *= std::norm(mnum) / std::norm(mden);
        }

    std::vector<cplx> mat(static_cast<std::size_t>(M * M));
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < M; ++k) {
            const double d = q[static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(k)];
            const double shalf = 0.5 * (parts[static_cast<std::size_t>(j)] + parts[static_cast<std::size_t>(k)]);
            mat[static_cast<std::size_t>(j * M + k)] =
                kI * kappa * static_cast<double>(parts[static_cast<std::size_t>(j)]) /
                (cplx(d, 0.0) + kI * kappa * shalf);
        }
    const cplx det = detail::complex_det(std::move(mat), M);
    const double dv = std::abs(det);
    return std::max(std::abs(lhs - det), std::abs(mid - det)) / std::max(dv, 1e-300);
}

std::vector<double> symmetric_mu(const ClusterComposition& c) {
    std::vector<double> mu(c.parts().size());
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] = -0.5 * (c.parts()[j] - 1.0);
    return mu;
}

cplx cluster_integrand(const ClusterComposition& c, std::span<const double> mu,
                       double kappa, std::span<const double> x,
                       std::span<const double> y, double t, std::span<const cplx> q) {
    const int n = c.n();
    const int M = c.cluster_count();
    if (static_cast<int>(mu.size()) != M || static_cast<int>(q.size()) != M)
        throw invalid_argument("cluster_integrand: mu/q length mismatch");
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
        throw invalid_argument("cluster_integrand: x/y length mismatch");
    for (int j = 0; j < M; ++j) {
        const double nj = c.parts()[static_cast<std::size_t>(j)];
        if (!(mu[static_cast<std::size_t>(j)] > -nj && mu[static_cast<std::size_t>(j)] <= 0.0))
            throw invalid_argument("cluster_integrand: mu out of range (-n_j, 0]");
    }

    std::vector<cplx> xi(static_cast<std::size_t>(n)), eta(static_cast<std::size_t>(n));
    for (int a = 1; a <= n; ++a) {
        const int j = c.cluster_of(a);
        xi[static_cast<std::size_t>(a - 1)] =
            q[static_cast<std::size_t>(j)] + kI * kappa * (mu[static_cast<std::size_t>(j)] + c.rank(a) - 1.0);
        eta[static_cast<std::size_t>(a - 1)] =
            q[static_cast<std::size_t>(j)] + kI * kappa * (mu[static_cast<std::size_t>(j)] + c.rank(a));
    }

    cplx gauss = 1.0;
    for (int a = 0; a < n; ++a) gauss *= std::exp(-t * xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)]);

    // phase tables: X[a][p] = exp(i xi_a x_p), Y[a][p] = exp(-i xi_a y_p)
    std::vector<cplx> X(static_cast<std::size_t>(n * n)), Y(static_cast<std::size_t>(n * n));
    for (int a = 0; a < n; ++a)
        for (int p = 0; p < n; ++p) {
            X[static_cast<std::size_t>(a * n + p)] = std::exp(kI * xi[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(p)]);
            Y[static_cast<std::size_t>(a * n + p)] = std::exp(-kI * xi[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(p)]);
        }
    // cross-cluster scattering factors F[a][b]
    std::vector<cplx> F(static_cast<std::size_t>(n * n), cplx(1.0, 0.0));
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            if (c.cluster_of(a) == c.cluster_of(b)) continue;
            const cplx d = eta[static_cast<std::size_t>(a - 1)] - eta[static_cast<std::size_t>(b - 1)];
            F[static_cast<std::size_t>((a - 1) * n + (b - 1))] = (d + kI * kappa) / (d - kI * kappa);
        }

    const auto sigmas = enumerate_restricted_permutations(c, PermutationClassKind::IncreasingWithinBlocks);
    const auto taus = enumerate_restricted_permutations(c, PermutationClassKind::DecreasingWithinBlocks);

    std::vector<std::vector<int>> sigma_inv, tau_inv;
    std::vector<cplx> Px, Py;
    for (const auto& s : sigmas) {
        const auto inv = invert_permutation(s);
        cplx p = 1.0;
        for (int a = 0; a < n; ++a) p *= X[static_cast<std::size_t>(a * n + inv[static_cast<std::size_t>(a)] - 1)];
        sigma_inv.push_back(inv);
        Px.push_back(p);
    }
    for (const auto& s : taus) {
        const auto inv = invert_permutation(s);
        cplx p = 1.0;
        for (int a = 0; a < n; ++a) p *= Y[static_cast<std::size_t>(a * n + inv[static_cast<std::size_t>(a)] - 1)];
        tau_inv.push_back(inv);
        Py.push_back(p);
    }

    cplx sum = 0.0;
    for (std::size_t si = 0; si < sigma_inv.size(); ++si)
        for (std::size_t ti = 0; ti < tau_inv.size(); ++ti) {
            cplx fac = 1.0;
            for (int a = 1; a <= n; ++a)
                for (int b = 1; b <= n; ++b) {
                    if (c.cluster_of(a) == c.cluster_of(b)) continue;
                    if (sigma_inv[si][static_cast<std::size_t>(a - 1)] > sigma_inv[si][static_cast<std::size_t>(b - 1)] &&
                        tau_inv[ti][static_cast<std::size_t>(a - 1)] < tau_inv[ti][static_cast<std::size_t>(b - 1)])
                        fac *= F[static_cast<std::size_t>((a - 1) * n + (b - 1))];
                }
            sum += Px[si] * Py[ti] * fac;
        }
    return gauss * sum;
}

SingularityVerdict expected_singularity(const ClusterComposition& c, int j, int k, int g) {
    const int nj = c.parts()[static_cast<std::size_t>(j)];
    const int nk = c.parts()[static_cast<std::size_t>(k)];
    if (g == 0 || g == nk - nj) return SingularityVerdict::Vanishes;
    if (g == nk || g == -nj) return SingularityVerdict::SimplePole;
    return SingularityVerdict::Finite;
}

ProbeResult probe_integrand_singularity(const ClusterComposition& c,
                                        std::span<const double> mu, double kappa,
                                        std::span<const double> x,
                                        std::span<const double> y, double t,
                                        int j, int k, int g) {
    const int M = c.cluster_count();
    if (j < 0 || k < 0 || j >= M || k >= M || j == k)
        throw invalid_argument("probe_integrand_singularity: bad cluster pair");

    std::vector<cplx> q(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) q[static_cast<std::size_t>(m)] = 0.37 + 0.23 * m;
    const cplx target = q[static_cast<std::size_t>(k)] +
                        kI * kappa * (mu[static_cast<std::size_t>(k)] - mu[static_cast<std::size_t>(j)] + g);

    ProbeResult out;
    const int steps = 10;
    std::vector<cplx> values;
    for (int m = 0; m < steps; ++m) {
        const double h = 0.4 / static_cast<double>(1 << m);
        q[static_cast<std::size_t>(j)] = target + h;
        const cplx v = cluster_integrand(c, mu, kappa, x, y, t, q);
        out.offsets.push_back(h);
        out.magnitudes.push_back(std::abs(v));
        values.push_back(v);
    }

    // median of the last few halving exponents log2 |f(h)| - log2 |f(h/2)|
    std::vector<double> ps;
    for (int m = steps - 5; m < steps - 1; ++m) {
        const double a = out.magnitudes[static_cast<std::size_t>(m)];
        const double b = out.magnitudes[static_cast<std::size_t>(m + 1)];
        ps.push_back(std::log2(std::max(a, 1e-300) / std::max(b, 1e-300)));
    }
    std::sort(ps.begin(), ps.end());
    const double p = 0.5 * (ps[1] + ps[2]);

    if (p > 0.5) {
        out.verdict = SingularityVerdict::Vanishes;
        out.limit = 0.0;
    } else if (p < -0.5) {
        out.verdict = SingularityVerdict::SimplePole;
        out.limit = values.back() * out.offsets.back(); // ~ residue scale
    } else {
        out.verdict = SingularityVerdict::Finite;
        out.limit = 2.0 * values[static_cast<std::size_t>(steps - 1)] - values[static_cast<std::size_t>(steps - 2)];
    }
    return out;
}

} // namespace deltagas
