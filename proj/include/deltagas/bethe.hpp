#pragma once

#include <complex>
#include <span>
#include <vector>

#include "deltagas/combinatorics.hpp"
#include "deltagas/quadrature.hpp"

namespace deltagas {

/// Label of a cluster eigenfunction: composition (M, n_vec), one real momentum
/// per cluster, and the coupling (kappa > 0 binds, kappa < 0 repels).
struct BetheState {
    ClusterComposition composition;
    std::vector<double> momenta; // length M
    double kappa = 0.0;
};

/// Symmetrized plane-wave eigenfunction with two-body phase factors,
/// normalized with the 1/n! prefactor. Valid for any real kappa; coinciding
/// momenta are perturbed per perturb_coinciding_momenta.
cplx psi_repulsive(std::span<const double> x, std::span<const double> q, double kappa);

/// sum q_j^2
double energy_repulsive(std::span<const double> q);

/// sum_j (n_j q_j^2 - kappa^2/12 (n_j^3 - n_j))
double energy_attractive(const BetheState& state);

/// Cluster wave function at complex cluster momenta: the increasing-class
/// permutation sum with per-element rapidities q_j + i*kappa*(r(a)-1) and
/// cross-cluster scattering factors, including the
/// kappa^((n-M)/2) sqrt(prod n_j!(n_j-1)!)/sqrt(n!) prefactor.
cplx phi_cluster(std::span<const double> x, const ClusterComposition& c,
                 std::span<const cplx> q, double kappa);

/// Decreasing-class counterpart (conjugate phases, inverted factors).
/// For real q it equals conj(phi_cluster(y, c, q - i*kappa*(n_vec - 1), kappa)).
cplx phi_tilde(std::span<const double> y, const ClusterComposition& c,
               std::span<const cplx> q, double kappa);

/// Bound-state eigenfunction: phi_cluster at the string-centered momenta
/// q_j - i*kappa*(n_j - 1)/2.
cplx psi_attractive(std::span<const double> x, const BetheState& state);

/// If some |q_j - q_k| < 1e-12 * scale, returns a copy shifted by
/// j * 1e-9 * scale per component; otherwise returns q unchanged.
std::vector<double> perturb_coinciding_momenta(std::span<const double> q);

/// Relative residual of the antisymmetrized-product identity
/// sum_sigma sign(sigma) prod_{a<b} (xi_sigma(a) - xi_sigma(b) + f(a,b))
///   = n! prod_{a<b} (xi_a - xi_b).
/// f is row-major n x n (only entries a<b are read).
double check_vandermonde_lemma(std::span<const cplx> xi, std::span<const cplx> f_offsets);

/// Relative residual of the double-product collapse
/// prod_{r,s} [(d + ik(r-s-1))/(d + ik(r-s)) * (d + ik(nj-nk-r+s+1))/(d + ik(nj-nk-r+s))]
///   = (d - ik*nk)(d + ik*nj) / (d (d + ik(nj-nk))).
double check_telescoping_identity(cplx dq, int nj, int nk, double kappa);

/// Relative residual between the squared-modulus double product over cluster
/// pairs and the M x M determinant det(ik n_j / ((q_j-q_k) + ik(n_j+n_k)/2)).
double check_cauchy_determinant(std::span<const double> q, const std::vector<int>& parts,
                                double kappa);

/// Integrand of the attractive cluster expansion for one composition:
/// the full double sum over increasing/decreasing permutation classes with
/// shifted-momentum Gaussian and phase factors and cross-cluster scattering
/// factors (prefactors excluded). Momenta may be complex.
cplx cluster_integrand(const ClusterComposition& c, std::span<const double> mu,
                       double kappa, std::span<const double> x,
                       std::span<const double> y, double t, std::span<const cplx> q);

/// mu_j = -(n_j - 1)/2: the choice making the Gaussian exponent real.
std::vector<double> symmetric_mu(const ClusterComposition& c);

enum class SingularityVerdict { Vanishes, Finite, SimplePole };

struct ProbeResult {
    SingularityVerdict verdict;
    cplx limit;                  // extrapolated value (or h*f for a pole)
    std::vector<double> offsets; // probe offsets h
    std::vector<double> magnitudes;
};

/// Approaches the apparent singularity q_j = q_k + i*kappa*(mu_k - mu_j + g)
/// of cluster_integrand along a halving sequence of real offsets and
/// classifies the limit behaviour.
ProbeResult probe_integrand_singularity(const ClusterComposition& c,
                                        std::span<const double> mu, double kappa,
                                        std::span<const double> x,
                                        std::span<const double> y, double t,
                                        int j, int k, int g);

/// The classification the cluster expansion asserts for integer offsets g in
/// [-n_j, n_k]: zero at g = 0 and g = n_k - n_j, simple poles at the ends,
/// finite otherwise.
SingularityVerdict expected_singularity(const ClusterComposition& c, int j, int k, int g);

} // namespace deltagas
