#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deltagas/quadrature.hpp"

namespace deltagas {

enum class Method {
    TwRepulsive,      // contour-integral sum over all permutations (kappa <= 0)
    EigenRepulsive,   // eigenfunction expansion over real momenta (kappa <= 0)
    ClusterExpansion, // double permutation-class sum with shifted rapidities (kappa > 0)
    EigenAttractive,  // bound-state eigenfunction expansion (kappa > 0)
    PartitionForm,    // set-partition sum on shifted contours (kappa > 0)
    ZeroPoint,        // determinant form at x = y = 0 (kappa > 0)
};

const char* method_name(Method m);

/// Contour offsets for the cluster expansion: the symmetric choice
/// mu_j = -(n_j-1)/2 or mu_j = 0.
enum class MuChoice { Symmetric, Zero };

struct GridOverrides {
    int nodes = 0;          // 0: automatic, pole- and decay-driven
    double half_width = 0.0; // 0: automatic
    double tol = 1e-8;      // accuracy target steering the automatic grid
};

struct PropagatorQuery {
    std::vector<double> x, y;
    double t = 1.0;
    double kappa = 0.0;
    Method method = Method::TwRepulsive;
    GridOverrides grid;
    MuChoice mu_choice = MuChoice::Symmetric;
    std::vector<double> eps; // partition-form contour fractions; empty = j/(M+1)
};

struct TermDiagnostics {
    std::vector<int> parts;
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
};

struct PropagatorResult {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
    double imag_residue = 0.0;
    Method method = Method::TwRepulsive;
    std::int64_t evaluations = 0;
    std::vector<TermDiagnostics> terms;
};

/// Dispatches on query.method after validating domain, sign and size caps.
PropagatorResult evaluate_propagator(const PropagatorQuery& query);

PropagatorResult propagator_tw_repulsive(const PropagatorQuery& query);
PropagatorResult propagator_eigen_repulsive(const PropagatorQuery& query);
PropagatorResult propagator_cluster_expansion(const PropagatorQuery& query);
PropagatorResult propagator_eigen_attractive(const PropagatorQuery& query);
PropagatorResult propagator_partition_form(const PropagatorQuery& query);
PropagatorResult propagator_zero_point(int n, double t, double kappa,
                                       const GridOverrides& grid = {});

/// Least-squares slope of -log(P sqrt(t)) at x = y = 0 over the given times;
/// the sqrt(t) factor removes the universal momentum-integration prefactor so
/// the fitted slope converges to the ground-state energy -kappa^2 (n^3-n)/12.
double decay_rate(int n, double kappa, Method method, std::span<const double> t_grid);

/// n! * integral over the ordered sector of P_t(x, y) dx, computed as a box
/// quadrature of the symmetric extension around y; approaches 1 as t -> 0.
double completeness_integral(double kappa, double t, std::span<const double> y,
                             int outer_nodes = 61);

} // namespace deltagas
