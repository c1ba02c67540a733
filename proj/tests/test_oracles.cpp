#include "deltagas/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "deltagas/combinatorics.hpp"
#include "deltagas/errors.hpp"
#include "deltagas/propagator.hpp"
#include "doctest.h"

using namespace deltagas;

TEST_CASE("free propagator") {
    const std::vector<double> x0{0.0}, zero2{0.0, 0.0};
    CHECK(free_propagator(x0, x0, 1.0) == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI)).epsilon(1e-12));
    CHECK(free_propagator(zero2, zero2, 1.0) == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-12));

    // n = 3 against the direct 6-term sum
    const std::vector<double> x{-0.4, 0.1, 0.8};
    const double t = 0.6;
    double direct = 0.0;
    std::vector<int> perm{1, 2, 3};
    do {
        double term = 1.0;
        for (int j = 0; j < 3; ++j)
            term *= heat_kernel(x[static_cast<std::size_t>(j)] -
                                    x[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)] - 1)],
                                t);
        direct += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    direct /= 6.0;
    CHECK(free_propagator(x, x, t) == doctest::Approx(direct).epsilon(1e-13));

    CHECK_THROWS_AS(free_propagator(x, x, 0.0), invalid_argument);
    CHECK_THROWS_AS(free_propagator(std::vector<double>{1.0, 0.0}, zero2, 1.0), invalid_argument);
}

TEST_CASE("relative-coordinate solver vs the free kernel at kappa = 0") {
    const std::vector<double> x{0.0, 0.3}, y{-0.2, 0.4};
    PdeConfig cfg;
    cfg.du = 1e-3;
    const double pde = pde_propagator_n2(x, y, 1.0, 0.0, cfg);
    const double fr = free_propagator(x, y, 1.0);
    CHECK(std::abs(pde - fr) < 1e-4 * fr);
}

TEST_CASE("relative-coordinate solver vs the exact evaluators") {
    const std::vector<double> x{0.0, 0.3}, y{-0.2, 0.4};
    PropagatorQuery q;
    q.x = x;
    q.y = y;
    q.t = 1.0;

    q.kappa = 1.0;
    q.method = Method::EigenAttractive;
    const double exact_a = evaluate_propagator(q).value.real();
    CHECK(std::abs(pde_propagator_n2(x, y, 1.0, 1.0) - exact_a) < 1e-3 * exact_a);

    q.kappa = -1.0;
    q.method = Method::TwRepulsive;
    const double exact_r = evaluate_propagator(q).value.real();
    CHECK(std::abs(pde_propagator_n2(x, y, 1.0, -1.0) - exact_r) < 1e-3 * exact_r);
}

TEST_CASE("relative-coordinate solver rejects coarse grids") {
    const std::vector<double> x{0.0, 0.3}, y{-0.2, 0.4};
    PdeConfig cfg;
    cfg.du = 0.5;
    cfg.dt = 0.25;
    cfg.tolerance = 1e-8;
    CHECK_THROWS_AS(pde_propagator_n2(x, y, 1.0, 1.0, cfg), numerical_failure);
}

TEST_CASE("bridge estimator: exact at kappa = 0") {
    const std::vector<double> x{0.0, 0.3}, y{-0.2, 0.4};
    McConfig cfg;
    cfg.paths = 500;
    cfg.steps = 32;
    cfg.seed = 3;
    const McResult r = feynman_kac_mc(x, y, 0.7, 0.0, cfg);
    const double prod = heat_kernel(x[0] - y[0], 0.7) * heat_kernel(x[1] - y[1], 0.7);
    CHECK(r.estimate == doctest::Approx(prod).epsilon(1e-13));
    CHECK(r.std_error == 0.0);

    const McResult rs = feynman_kac_mc_symmetrized(x, y, 0.7, 0.0, cfg);
    CHECK(rs.estimate == doctest::Approx(free_propagator(x, y, 0.7)).epsilon(1e-13));
}

TEST_CASE("bridge estimator: monotone in the coupling for fixed paths") {
    const std::vector<double> x{0.0, 0.2}, y{-0.1, 0.3};
    McConfig cfg;
    cfg.paths = 2000;
    cfg.steps = 256;
    cfg.seed = 5;
    double prev = -1.0;
    for (double kappa : {-0.6, 0.0, 0.4, 0.9}) {
        const McResult r = feynman_kac_mc(x, y, 0.5, kappa, cfg);
        CHECK(r.estimate > prev);
        prev = r.estimate;
    }
}

TEST_CASE("bridge estimator: deterministic for a seed, independent of threads") {
    const std::vector<double> x{0.0, 0.2}, y{-0.1, 0.3};
    McConfig cfg;
    cfg.paths = 4000;
    cfg.steps = 128;
    cfg.seed = 17;
    setenv("DELTAGAS_THREADS", "1", 1);
    const McResult a = feynman_kac_mc(x, y, 0.5, 0.8, cfg);
    setenv("DELTAGAS_THREADS", "4", 1);
    const McResult b = feynman_kac_mc(x, y, 0.5, 0.8, cfg);
    unsetenv("DELTAGAS_THREADS");
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);

    McConfig other = cfg;
    other.seed = 18;
    const McResult c = feynman_kac_mc(x, y, 0.5, 0.8, other);
    CHECK(c.estimate != a.estimate);
}

TEST_CASE("bridge estimator agrees with the exact two-body values") {
    const std::vector<double> x{0.0, 0.2}, y{-0.1, 0.3};
    const double t = 0.5;
    McConfig cfg;
    cfg.paths = 40000;
    cfg.steps = 1024;
    cfg.bandwidth = 0.35 * std::sqrt(t);
    cfg.seed = 23;

    PropagatorQuery q;
    q.x = x;
    q.y = y;
    q.t = t;

    q.kappa = 0.5;
    q.method = Method::EigenAttractive;
    const double exact_a = evaluate_propagator(q).value.real();
    const McResult ma = feynman_kac_mc_symmetrized(x, y, t, 0.5, cfg);
    CHECK(std::abs(ma.estimate - exact_a) < 3.0 * ma.std_error);

    q.kappa = -0.5;
    q.method = Method::TwRepulsive;
    const double exact_r = evaluate_propagator(q).value.real();
    const McResult mr = feynman_kac_mc_symmetrized(x, y, t, -0.5, cfg);
    CHECK(std::abs(mr.estimate - exact_r) < 3.0 * mr.std_error);
}

TEST_CASE("bridge estimator: antithetic pairing keeps the mean structure") {
    const std::vector<double> x{0.0, 0.2}, y{-0.1, 0.3};
    McConfig cfg;
    cfg.paths = 20000;
    cfg.steps = 256;
    cfg.seed = 29;
    cfg.antithetic = true;
    const McResult a = feynman_kac_mc(x, y, 0.5, 0.6, cfg);
    cfg.antithetic = false;
    const McResult b = feynman_kac_mc(x, y, 0.5, 0.6, cfg);
    CHECK(std::abs(a.estimate - b.estimate) < 4.0 * (a.std_error + b.std_error));
}

TEST_CASE("oracle argument validation") {
    const std::vector<double> x{0.0, 0.2};
    McConfig bad;
    bad.paths = 0;
    CHECK_THROWS_AS(feynman_kac_mc(x, x, 0.5, 0.0, bad), invalid_argument);
    CHECK_THROWS_AS(feynman_kac_mc(x, x, -1.0, 0.0, McConfig{}), invalid_argument);
    CHECK_THROWS_AS(pde_propagator_n2(std::vector<double>{0.0}, std::vector<double>{0.0}, 1.0, 0.0),
                    invalid_argument);
    CHECK_THROWS_AS(
        feynman_kac_mc_symmetrized(std::vector<double>(6, 0.0), std::vector<double>(6, 0.0), 1.0,
                                   0.0, McConfig{}),
        resource_limit);
}
