#include "deltagas.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "deltagas/errors.hpp"
#include "deltagas/oracles.hpp"
#include "deltagas/propagator.hpp"
#include "deltagas/verify.hpp"

using namespace deltagas;

struct dg_query {
    PropagatorQuery query;
    McConfig mc;
    PdeConfig pde;
};

namespace {

thread_local std::string g_last_error;

dg_status fail(dg_status code, const char* msg) {
    g_last_error = msg;
    return code;
}

template <class F>
dg_status guarded(F&& body) {
    try {
        body();
        return DG_OK;
    } catch (const invalid_argument& e) {
        return fail(DG_ERR_INVALID, e.what());
    } catch (const resource_limit& e) {
        return fail(DG_ERR_RESOURCE, e.what());
    } catch (const numerical_failure& e) {
        return fail(DG_ERR_NUMERICAL, e.what());
    } catch (const std::exception& e) {
        return fail(DG_ERR_NUMERICAL, e.what());
    }
}

void fill_result(dg_result* out, const PropagatorResult& r) {
    out->value_re = r.value.real();
    out->value_im = r.value.imag();
    out->error_estimate = r.error_estimate;
    out->imag_residue = r.imag_residue;
    out->evaluations = r.evaluations;
    std::snprintf(out->method, sizeof(out->method), "%s", method_name(r.method));
}

} // namespace

extern "C" {

const char* dg_version(void) { return "deltagas 1.0.0"; }

const char* dg_last_error(void) { return g_last_error.c_str(); }

dg_query* dg_query_new(int n, const double* x, const double* y, double t, double kappa) {
    if (n < 1 || x == nullptr || y == nullptr) {
        g_last_error = "dg_query_new: need n >= 1 and non-null x, y";
        return nullptr;
    }
    auto* q = new dg_query;
    q->query.x.assign(x, x + n);
    q->query.y.assign(y, y + n);
    q->query.t = t;
    q->query.kappa = kappa;
    return q;
}

void dg_query_free(dg_query* q) { delete q; }

dg_status dg_query_set_grid(dg_query* q, int nodes, double half_width, double tol) {
    if (!q) return fail(DG_ERR_INVALID, "null query");
    if (nodes < 0 || half_width < 0.0 || tol < 0.0)
        return fail(DG_ERR_INVALID, "dg_query_set_grid: negative setting");
    q->query.grid.nodes = nodes;
    q->query.grid.half_width = half_width;
    if (tol > 0.0) q->query.grid.tol = tol;
    return DG_OK;
}

dg_status dg_query_set_mu_zero(dg_query* q, int use_zero) {
    if (!q) return fail(DG_ERR_INVALID, "null query");
    q->query.mu_choice = use_zero ? MuChoice::Zero : MuChoice::Symmetric;
    return DG_OK;
}

dg_status dg_query_set_eps(dg_query* q, const double* eps, int len) {
    if (!q) return fail(DG_ERR_INVALID, "null query");
    if (len < 0 || (len > 0 && eps == nullptr))
        return fail(DG_ERR_INVALID, "dg_query_set_eps: bad array");
    q->query.eps.assign(eps, eps + len);
    return DG_OK;
}

dg_status dg_query_set_mc(dg_query* q, int64_t paths, int steps, double bandwidth,
                          uint64_t seed, int antithetic) {
    if (!q) return fail(DG_ERR_INVALID, "null query");
    if (paths < 1 || steps < 2) return fail(DG_ERR_INVALID, "dg_query_set_mc: bad paths/steps");
    q->mc.paths = paths;
    q->mc.steps = steps;
    q->mc.bandwidth = bandwidth;
    q->mc.seed = seed;
    q->mc.antithetic = antithetic != 0;
    return DG_OK;
}

dg_status dg_query_set_pde(dg_query* q, double du, double dt) {
    if (!q) return fail(DG_ERR_INVALID, "null query");
    q->pde.du = du;
    q->pde.dt = dt;
    return DG_OK;
}

dg_status dg_eval(const dg_query* q, const char* method, dg_result* out) {
    if (!q || !method || !out) return fail(DG_ERR_INVALID, "dg_eval: null argument");
    const std::string m = method;
    return guarded([&] {
        if (m == "tw" || m == "eigen" || m == "thm1" || m == "thm2" || m == "partition" ||
            m == "zero") {
            PropagatorQuery query = q->query;
            if (m == "tw") query.method = Method::TwRepulsive;
            if (m == "eigen") query.method = Method::EigenRepulsive;
            if (m == "thm1") query.method = Method::ClusterExpansion;
            if (m == "thm2") query.method = Method::EigenAttractive;
            if (m == "partition") query.method = Method::PartitionForm;
            if (m == "zero") query.method = Method::ZeroPoint;
            fill_result(out, evaluate_propagator(query));
        } else if (m == "free") {
            const double v = free_propagator(q->query.x, q->query.y, q->query.t);
            *out = dg_result{};
            out->value_re = v;
            std::snprintf(out->method, sizeof(out->method), "free");
        } else if (m == "pde") {
            double err = 0.0;
            const double v =
                pde_propagator_n2(q->query.x, q->query.y, q->query.t, q->query.kappa, q->pde, &err);
            *out = dg_result{};
            out->value_re = v;
            out->error_estimate = err;
            std::snprintf(out->method, sizeof(out->method), "pde");
        } else if (m == "mc") {
            const McResult r =
                feynman_kac_mc_symmetrized(q->query.x, q->query.y, q->query.t, q->query.kappa, q->mc);
            *out = dg_result{};
            out->value_re = r.estimate;
            out->error_estimate = r.std_error;
            out->evaluations = r.paths;
            std::snprintf(out->method, sizeof(out->method), "mc");
        } else {
            throw deltagas::invalid_argument(
                "unknown method (expected tw|eigen|thm1|thm2|partition|zero|free|pde|mc)");
        }
    });
}

dg_status dg_eval_mc(const dg_query* q, dg_mc_result* out) {
    if (!q || !out) return fail(DG_ERR_INVALID, "dg_eval_mc: null argument");
    return guarded([&] {
        const McResult r =
            feynman_kac_mc_symmetrized(q->query.x, q->query.y, q->query.t, q->query.kappa, q->mc);
        out->estimate = r.estimate;
        out->std_error = r.std_error;
        out->mean_h = r.mean_h;
        out->mean_h2 = r.mean_h2;
        out->mean_h4 = r.mean_h4;
        out->paths = r.paths;
    });
}

dg_status dg_decay_rate(int n, double kappa, const char* method, const double* t_grid,
                        int num_t, double* slope) {
    if (!method || !t_grid || !slope || num_t < 1)
        return fail(DG_ERR_INVALID, "dg_decay_rate: null argument");
    const std::string m = method;
    return guarded([&] {
        Method mm;
        if (m == "zero") {
            mm = Method::ZeroPoint;
        } else if (m == "thm1") {
            mm = Method::ClusterExpansion;
        } else if (m == "thm2") {
            mm = Method::EigenAttractive;
        } else {
            throw deltagas::invalid_argument("decay_rate method must be zero|thm1|thm2");
        }
        *slope = decay_rate(n, kappa, mm,
                            std::span<const double>(t_grid, static_cast<std::size_t>(num_t)));
    });
}

dg_status dg_completeness(double kappa, double t, const double* y, int n, double* integral) {
    if (!y || !integral) return fail(DG_ERR_INVALID, "dg_completeness: null argument");
    return guarded([&] {
        *integral = completeness_integral(
            kappa, t, std::span<const double>(y, static_cast<std::size_t>(n)));
    });
}

dg_status dg_verify(const char* suite, uint64_t seed, char** report_json, int* pass) {
    if (!suite || !report_json || !pass) return fail(DG_ERR_INVALID, "dg_verify: null argument");
    return guarded([&] {
        const VerifyReport rep = run_suite(suite, seed);
        const std::string json = report_to_json(rep);
        char* buf = static_cast<char*>(std::malloc(json.size() + 1));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, json.c_str(), json.size() + 1);
        *report_json = buf;
        *pass = rep.pass ? 1 : 0;
    });
}

void dg_string_free(char* s) { std::free(s); }

} // extern "C"
