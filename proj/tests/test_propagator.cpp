#include "deltagas/propagator.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "deltagas/errors.hpp"
#include "deltagas/oracles.hpp"
#include "doctest.h"

using namespace deltagas;

namespace {

PropagatorQuery make_query(std::vector<double> x, std::vector<double> y, double t, double kappa,
                           Method m) {
    PropagatorQuery q;
    q.x = std::move(x);
    q.y = std::move(y);
    q.t = t;
    q.kappa = kappa;
    q.method = m;
    return q;
}

double rel_diff(const PropagatorResult& a, const PropagatorResult& b) {
    return std::abs(a.value - b.value) / std::max(std::abs(a.value), 1e-300);
}

std::vector<double> sorted_uniform(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& e : v) e = u(rng);
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("one-body propagator equals the heat kernel for every method") {
    const double t = 0.8, xx = 0.3, yy = -0.1;
    const double expected = heat_kernel(xx - yy, t);
    for (auto [m, kappa] : std::vector<std::pair<Method, double>>{
             {Method::TwRepulsive, -0.7},
             {Method::TwRepulsive, 0.0},
             {Method::EigenRepulsive, -0.7},
             {Method::ClusterExpansion, 0.9},
             {Method::EigenAttractive, 0.9},
             {Method::PartitionForm, 0.9}}) {
        auto q = make_query({xx}, {yy}, t, kappa, m);
        q.grid.tol = 1e-10;
        const auto r = evaluate_propagator(q);
        CHECK(std::abs(r.value.real() - expected) < 1e-9);
        CHECK(r.imag_residue < 1e-10);
    }
    const auto z = propagator_zero_point(1, t, 1.3);
    CHECK(std::abs(z.value.real() - heat_kernel(0.0, t)) < 1e-10);
}

TEST_CASE("free coupling reproduces the symmetrized free kernel") {
    const std::vector<double> x{-0.3, 0.4}, y{-0.5, 0.2};
    const double t = 0.7;
    const double fr = free_propagator(x, y, t);
    const auto tw = evaluate_propagator(make_query(x, y, t, 0.0, Method::TwRepulsive));
    const auto eig = evaluate_propagator(make_query(x, y, t, 0.0, Method::EigenRepulsive));
    CHECK(std::abs(tw.value.real() - fr) < 1e-10);
    CHECK(std::abs(eig.value.real() - fr) < 1e-10);

    const std::vector<double> x3{-0.3, 0.1, 0.4}, y3{-0.5, 0.0, 0.2};
    const double fr3 = free_propagator(x3, y3, t);
    const auto tw3 = evaluate_propagator(make_query(x3, y3, t, 0.0, Method::TwRepulsive));
    CHECK(std::abs(tw3.value.real() - fr3) < 1e-10);
}

TEST_CASE("repulsive evaluators agree") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> uk(-2.0, -0.3), ut(0.25, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 2 + trial % 2;
        const auto x = sorted_uniform(rng, n, -1.0, 1.0);
        const auto y = sorted_uniform(rng, n, -1.0, 1.0);
        const double kappa = uk(rng), t = ut(rng);
        const auto a = evaluate_propagator(make_query(x, y, t, kappa, Method::TwRepulsive));
        const auto b = evaluate_propagator(make_query(x, y, t, kappa, Method::EigenRepulsive));
        CHECK(rel_diff(a, b) < 1e-8);
        CHECK(a.value.real() > 0.0);
        CHECK(a.imag_residue <= 10.0 * std::max(a.error_estimate, 1e-14));
    }
}

TEST_CASE("attractive evaluators agree") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> uk(0.3, 2.0), ut(0.25, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 2 + trial % 2;
        const auto x = sorted_uniform(rng, n, -1.0, 1.0);
        const auto y = sorted_uniform(rng, n, -1.0, 1.0);
        const double kappa = uk(rng), t = ut(rng);
        const auto a = evaluate_propagator(make_query(x, y, t, kappa, Method::EigenAttractive));
        const auto b = evaluate_propagator(make_query(x, y, t, kappa, Method::ClusterExpansion));
        const auto c = evaluate_propagator(make_query(x, y, t, kappa, Method::PartitionForm));
        CHECK(rel_diff(a, b) < 1e-8);
        CHECK(rel_diff(a, c) < 1e-7);
        CHECK(a.value.real() > 0.0);
    }
}

TEST_CASE("contour-offset independence of the cluster expansion") {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> uk(0.3, 1.5), ut(0.3, 1.0);
    // n = 2: no staggered axes involved
    for (int trial = 0; trial < 2; ++trial) {
        const auto x = sorted_uniform(rng, 2, -1.0, 1.0);
        const auto y = sorted_uniform(rng, 2, -1.0, 1.0);
        auto q = make_query(x, y, ut(rng), uk(rng), Method::ClusterExpansion);
        q.mu_choice = MuChoice::Symmetric;
        const auto a = evaluate_propagator(q);
        q.mu_choice = MuChoice::Zero;
        const auto b = evaluate_propagator(q);
        CHECK(rel_diff(a, b) < 1e-7);
    }
    // n = 3 with zero offsets exercises the staggered-lattice path
    {
        const std::vector<double> x{-0.5, 0.0, 0.4}, y{-0.4, 0.1, 0.5};
        auto q = make_query(x, y, 0.5, 1.0, Method::ClusterExpansion);
        q.mu_choice = MuChoice::Zero;
        const auto a = evaluate_propagator(q);
        q.method = Method::EigenAttractive;
        const auto b = evaluate_propagator(q);
        CHECK(rel_diff(a, b) < 1e-6);
    }
}

TEST_CASE("contour-fraction independence of the partition form") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> uk(0.3, 1.5), ut(0.3, 1.0);
    for (int trial = 0; trial < 2; ++trial) {
        const auto x = sorted_uniform(rng, 2, -1.0, 1.0);
        const auto y = sorted_uniform(rng, 2, -1.0, 1.0);
        auto q = make_query(x, y, ut(rng), uk(rng), Method::PartitionForm);
        q.grid.tol = 1e-10;
        q.eps = {0.3, 0.7};
        const auto a = evaluate_propagator(q);
        q.eps = {0.1, 0.9};
        const auto b = evaluate_propagator(q);
        CHECK(rel_diff(a, b) < 1e-9);
    }
}

TEST_CASE("zero-point determinant form") {
    // n = 2 and 3 against the eigenfunction expansion at the origin
    for (int n : {2, 3}) {
        for (double kappa : {0.5, 1.0}) {
            const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
            const auto a = propagator_zero_point(n, 0.75, kappa);
            const auto b =
                evaluate_propagator(make_query(zero, zero, 0.75, kappa, Method::EigenAttractive));
            CHECK(rel_diff(a, b) < 1e-8);
        }
    }
    // n = 4: finite, positive, stable under the budgeted grids
    const auto r4 = propagator_zero_point(4, 1.0, 1.0);
    CHECK(r4.value.real() > 0.0);
    CHECK(std::isfinite(r4.value.real()));
    CHECK(r4.imag_residue < 1e-8);

    CHECK_THROWS_AS(propagator_zero_point(9, 1.0, 1.0), resource_limit);
    CHECK_THROWS_AS(propagator_zero_point(2, 1.0, -1.0), invalid_argument);
    auto q = make_query({0.0, 0.1}, {0.0, 0.1}, 1.0, 1.0, Method::ZeroPoint);
    CHECK_THROWS_AS(evaluate_propagator(q), invalid_argument);
}

TEST_CASE("hermiticity") {
    const std::vector<double> x{-0.6, 0.2}, y{-0.3, 0.5};
    for (auto [m, kappa] : std::vector<std::pair<Method, double>>{
             {Method::TwRepulsive, -1.1}, {Method::EigenAttractive, 1.1}}) {
        const auto a = evaluate_propagator(make_query(x, y, 0.6, kappa, m));
        const auto b = evaluate_propagator(make_query(y, x, 0.6, kappa, m));
        CHECK(rel_diff(a, b) < 1e-8);
    }
    const std::vector<double> x3{-0.6, 0.0, 0.2}, y3{-0.3, 0.1, 0.5};
    const auto a3 = evaluate_propagator(make_query(x3, y3, 0.6, 0.9, Method::EigenAttractive));
    const auto b3 = evaluate_propagator(make_query(y3, x3, 0.6, 0.9, Method::EigenAttractive));
    CHECK(rel_diff(a3, b3) < 1e-8);
}

TEST_CASE("small couplings join continuously across zero") {
    const std::vector<double> x{0.0, 0.2}, y{-0.1, 0.3};
    const double t = 0.5;
    auto eval = [&](double kappa) {
        Method m = kappa > 0.0 ? Method::EigenAttractive : Method::TwRepulsive;
        return evaluate_propagator(make_query(x, y, t, kappa, m)).value.real();
    };
    const double f0 = eval(0.0);
    const double qplus = std::abs(eval(1e-3) - f0) / 1e-3;
    const double qminus = std::abs(eval(-1e-3) - f0) / 1e-3;
    const double cplus = std::abs(eval(1e-2) - f0) / 1e-2;
    const double cminus = std::abs(eval(-1e-2) - f0) / 1e-2;
    CHECK(qplus <= 2.0 * cplus);
    CHECK(qminus <= 2.0 * cminus);
    // the derivative itself is strictly positive (attraction increases return mass)
    CHECK(eval(1e-2) > f0);
    CHECK(eval(-1e-2) < f0);
}

TEST_CASE("decay rates approach the string energies") {
    const std::vector<double> ts{4.0, 5.0, 6.0, 7.0, 8.0};
    const double s1 = decay_rate(1, 1.0, Method::ZeroPoint, ts);
    CHECK(std::abs(s1) < 1e-9); // free particle: algebraic decay only
    const double s2 = decay_rate(2, 1.0, Method::ZeroPoint, ts);
    CHECK(std::abs(s2 + 0.5) < 0.05 * 0.5);
    const double s3 = decay_rate(3, 1.0, Method::ZeroPoint, ts);
    CHECK(std::abs(s3 + 2.0) < 0.05 * 2.0);

    CHECK_THROWS_AS(decay_rate(2, 1.0, Method::ZeroPoint, std::vector<double>{4.0, 5.0}),
                    invalid_argument);
    CHECK_THROWS_AS(decay_rate(2, 1.0, Method::ZeroPoint, std::vector<double>{1.0, 2.0, 3.0, 4.0}),
                    invalid_argument);
}

TEST_CASE("validation and error classes") {
    // sign constraints
    CHECK_THROWS_AS(evaluate_propagator(make_query({0.0}, {0.0}, 1.0, 0.5, Method::TwRepulsive)),
                    invalid_argument);
    CHECK_THROWS_AS(evaluate_propagator(make_query({0.0}, {0.0}, 1.0, -0.5, Method::EigenAttractive)),
                    invalid_argument);
    CHECK_THROWS_AS(evaluate_propagator(make_query({0.0}, {0.0}, 1.0, 0.0, Method::ClusterExpansion)),
                    invalid_argument);
    // domain constraints
    CHECK_THROWS_AS(evaluate_propagator(make_query({0.5, 0.0}, {0.0, 0.1}, 1.0, -1.0, Method::TwRepulsive)),
                    invalid_argument);
    CHECK_THROWS_AS(evaluate_propagator(make_query({0.0}, {0.0}, -1.0, -1.0, Method::TwRepulsive)),
                    invalid_argument);
    // size caps
    CHECK_THROWS_AS(
        evaluate_propagator(make_query(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0),
                                       1.0, -1.0, Method::TwRepulsive)),
        resource_limit);
    CHECK_THROWS_AS(
        evaluate_propagator(make_query(std::vector<double>(4, 0.0), std::vector<double>(4, 0.0),
                                       1.0, 1.0, Method::PartitionForm)),
        resource_limit);
}

TEST_CASE("grid overrides are honored and deterministic") {
    auto q = make_query({0.0, 0.2}, {-0.1, 0.3}, 0.6, -0.8, Method::TwRepulsive);
    q.grid.nodes = 65;
    q.grid.half_width = 7.0;
    const auto a = evaluate_propagator(q);
    CHECK(a.evaluations == 65 * 65);
    const auto b = evaluate_propagator(q);
    CHECK(a.value.real() == b.value.real());
    CHECK(a.value.imag() == b.value.imag());
}
