#include "deltagas/verify.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "deltagas/bethe.hpp"
#include "deltagas/combinatorics.hpp"
#include "deltagas/errors.hpp"
#include "deltagas/propagator.hpp"
#include "json.hpp"

namespace deltagas {

namespace {

void add_check(VerifyReport& rep, std::string name, double observed, double bound) {
    rep.checks.push_back({std::move(name), observed, bound, observed <= bound});
}

void finalize(VerifyReport& rep) {
    rep.pass = true;
    for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
}

} // namespace

VerifyReport run_identity_suite(std::uint64_t seed) {
    VerifyReport rep;
    rep.suite = "identities";
    rep.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto rc = [&]() { return cplx(u(rng), u(rng)); };

    double worst_v = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 3;
        std::vector<cplx> xi(static_cast<std::size_t>(n));
        for (auto& v : xi) v = rc();
        std::vector<cplx> f(static_cast<std::size_t>(n * n));
        for (auto& v : f) v = rc();
        worst_v = std::max(worst_v, check_vandermonde_lemma(xi, f));
    }
    add_check(rep, "antisymmetrized-product residual (100 draws, n=2..4)", worst_v, 1e-10);

    double worst_t = 0.0;
    int done = 0;
    while (done < 100) {
        const cplx dq = rc();
        if (std::abs(dq) < 0.05) continue;
        const int nj = 1 + static_cast<int>(std::floor(std::abs(rc()) * 10.0)) % 4;
        const int nk = 1 + static_cast<int>(std::floor(std::abs(rc()) * 10.0)) % 4;
        worst_t = std::max(worst_t, check_telescoping_identity(dq, nj, nk, 0.5 + std::abs(u(rng))));
        ++done;
    }
    add_check(rep, "telescoping-product residual (100 draws)", worst_t, 1e-12);

    double worst_c = 0.0;
    const std::vector<std::vector<int>> part_pool{{1, 1}, {2, 1}, {1, 3}, {2, 1, 1}, {2, 2, 1}, {3, 1, 2}};
    done = 0;
    while (done < 100) {
        const auto& parts = part_pool[static_cast<std::size_t>(done) % part_pool.size()];
        std::vector<double> q(parts.size());
        for (auto& v : q) v = u(rng);
        bool distinct = true;
        for (std::size_t a = 0; a < q.size(); ++a)
            for (std::size_t b = a + 1; b < q.size(); ++b)
                if (std::abs(q[a] - q[b]) < 0.05) distinct = false;
        if (!distinct) continue;
        worst_c = std::max(worst_c, check_cauchy_determinant(q, parts, 0.4 + std::abs(u(rng))));
        ++done;
    }
    add_check(rep, "cluster-determinant residual (100 draws)", worst_c, 1e-10);

    finalize(rep);
    return rep;
}

VerifyReport run_pole_suite() {
    VerifyReport rep;
    rep.suite = "poles";
    const double t = 0.7, kappa = 1.0;
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
                        const auto probe = probe_integrand_singularity(c, mu, kappa, x, y, t, j, k, g);
                        const bool match = probe.verdict == expected_singularity(c, j, k, g);
                        std::ostringstream name;
                        name << "n=" << n << " parts(";
                        for (int p : c.parts()) name << p << ",";
                        name << ") pair(" << j + 1 << "," << k + 1 << ") offset " << g << ": "
                             << (probe.verdict == SingularityVerdict::Vanishes
                                     ? "zero"
                                     : probe.verdict == SingularityVerdict::SimplePole ? "pole" : "finite");
                        rep.checks.push_back({name.str(), match ? 0.0 : 1.0, 0.5, match});
                    }
                }
        }
    }
    finalize(rep);
    return rep;
}

VerifyReport run_completeness_suite() {
    VerifyReport rep;
    rep.suite = "completeness";
    const std::vector<double> y{-0.2, 0.4};
    for (double kappa : {1.0, -1.0}) {
        const double integral = completeness_integral(kappa, 0.02, y);
        std::ostringstream name;
        name << "n=2 kappa=" << kappa << " t=0.02 normalization |integral - 1|";
        add_check(rep, name.str(), std::abs(integral - 1.0), 0.02);
    }
    finalize(rep);
    return rep;
}

VerifyReport run_decay_suite() {
    VerifyReport rep;
    rep.suite = "decay";
    const std::vector<double> ts{4.0, 5.0, 6.0, 7.0, 8.0};
    for (int n : {2, 3}) {
        const double target = -1.0 / 12.0 * (n * n * n - n); // kappa = 1
        const double slope = decay_rate(n, 1.0, Method::ZeroPoint, ts);
        std::ostringstream name;
        name << "n=" << n << " decay slope vs string energy (relative)";
        add_check(rep, name.str(), std::abs(slope - target) / std::abs(target), 0.05);
    }
    finalize(rep);
    return rep;
}

VerifyReport run_suite(const std::string& suite, std::uint64_t seed) {
    if (suite == "identities") return run_identity_suite(seed);
    if (suite == "poles") return run_pole_suite();
    if (suite == "completeness") return run_completeness_suite();
    if (suite == "decay") return run_decay_suite();
    throw invalid_argument("unknown verify suite: " + suite);
}

std::string report_to_json(const VerifyReport& report) {
    nlohmann::json j;
    j["suite"] = report.suite;
    j["seed"] = report.seed;
    j["pass"] = report.pass;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        nlohmann::json cj;
        cj["name"] = c.name;
        cj["observed"] = c.observed;
        cj["bound"] = c.bound;
        cj["pass"] = c.pass;
        j["checks"].push_back(cj);
    }
    return j.dump(2);
}

} // namespace deltagas
