// Command-line front end for the deltagas shared library. All numerics go
// through the C API in deltagas.h; this layer only parses arguments and
// formats records.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deltagas.h"
#include "json.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
    int n = 0;
    std::string x_csv, y_csv;
    double t = 1.0;
    double kappa = 0.0;
    bool zero_point = false;
    // grid
    int nodes = 0;
    double half_width = 0.0;
    double tol = 0.0;
    bool mu_zero = false;
    std::string eps_csv;
    // mc
    std::int64_t paths = 100000;
    int steps = 2048;
    double bandwidth = -1.0;
    std::uint64_t seed = 1;
    bool antithetic = false;
    // pde
    double pde_du = -1.0;
    double pde_dt = -1.0;
    // output
    std::string format = "json";
    std::string out_path;
    bool timing = false;
};

std::vector<double> parse_csv(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::string join17(const std::vector<double>& v, char sep) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        out += buf;
    }
    return out;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int status_exit(dg_status s) {
    switch (s) {
        case DG_OK: return 0;
        case DG_ERR_NUMERICAL: return 1;
        case DG_ERR_INVALID: return 2;
        case DG_ERR_RESOURCE: return 3;
    }
    return 1;
}

[[noreturn]] void die(dg_status s) {
    std::cerr << "error: " << dg_last_error() << "\n";
    std::exit(status_exit(s));
}

// temp file + rename so readers never see partial output
void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        if (!content.empty() && content.back() != '\n') std::cout << "\n";
        return;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            std::cerr << "error: cannot write " << tmp << "\n";
            std::exit(2);
        }
        f << content;
        if (!content.empty() && content.back() != '\n') f << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::cerr << "error: cannot rename output into place\n";
        std::exit(2);
    }
}

struct QueryHandle {
    dg_query* q = nullptr;
    ~QueryHandle() { dg_query_free(q); }
};

void build_query(const CommonOptions& opt, QueryHandle& handle, std::vector<double>& x,
                 std::vector<double>& y) {
    x = parse_csv(opt.x_csv);
    y = parse_csv(opt.y_csv);
    int n = opt.n;
    if (opt.zero_point) {
        if (n == 0) n = static_cast<int>(x.size());
        if (n == 0) {
            std::cerr << "error: --zero-point needs --n\n";
            std::exit(2);
        }
        x.assign(static_cast<std::size_t>(n), 0.0);
        y.assign(static_cast<std::size_t>(n), 0.0);
    }
    if (n == 0) n = static_cast<int>(x.size());
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) {
        std::cerr << "error: --x/--y must provide n = " << n << " entries\n";
        std::exit(2);
    }
    handle.q = dg_query_new(n, x.data(), y.data(), opt.t, opt.kappa);
    if (!handle.q) {
        std::cerr << "error: " << dg_last_error() << "\n";
        std::exit(2);
    }
    dg_status s = dg_query_set_grid(handle.q, opt.nodes, opt.half_width, opt.tol);
    if (s != DG_OK) die(s);
    s = dg_query_set_mu_zero(handle.q, opt.mu_zero ? 1 : 0);
    if (s != DG_OK) die(s);
    if (!opt.eps_csv.empty()) {
        const auto eps = parse_csv(opt.eps_csv);
        s = dg_query_set_eps(handle.q, eps.data(), static_cast<int>(eps.size()));
        if (s != DG_OK) die(s);
    }
    s = dg_query_set_mc(handle.q, opt.paths, opt.steps, opt.bandwidth, opt.seed,
                        opt.antithetic ? 1 : 0);
    if (s != DG_OK) die(s);
    s = dg_query_set_pde(handle.q, opt.pde_du, opt.pde_dt);
    if (s != DG_OK) die(s);
}

json record_json(const CommonOptions& opt, const std::vector<double>& x,
                 const std::vector<double>& y, const dg_result& r) {
    json j;
    j["method"] = r.method;
    j["n"] = x.size();
    j["t"] = opt.t;
    j["kappa"] = opt.kappa;
    j["x"] = x;
    j["y"] = y;
    j["value"] = r.value_re;
    j["value_im"] = r.value_im;
    j["error_estimate"] = r.error_estimate;
    j["imag_residue"] = r.imag_residue;
    j["evaluations"] = r.evaluations;
    j["seed"] = opt.seed;
    return j;
}

const char* kCsvHeader =
    "command,method,n,t,kappa,x,y,value,value_im,error_estimate,imag_residue,evaluations,seed";

std::string record_csv_row(const char* command, const CommonOptions& opt,
                           const std::vector<double>& x, const std::vector<double>& y,
                           const dg_result& r) {
    std::ostringstream os;
    os << command << ',' << r.method << ',' << x.size() << ',' << fmt17(opt.t) << ','
       << fmt17(opt.kappa) << ',' << join17(x, ';') << ',' << join17(y, ';') << ','
       << fmt17(r.value_re) << ',' << fmt17(r.value_im) << ',' << fmt17(r.error_estimate) << ','
       << fmt17(r.imag_residue) << ',' << r.evaluations << ',' << opt.seed;
    return os.str();
}

double elapsed_ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

int cmd_eval(const CommonOptions& opt, const std::string& method) {
    QueryHandle handle;
    std::vector<double> x, y;
    build_query(opt, handle, x, y);

    const auto start = std::chrono::steady_clock::now();
    dg_result r;
    const dg_status s = dg_eval(handle.q, method.c_str(), &r);
    if (s != DG_OK) die(s);
    const double ms = elapsed_ms_since(start);

    if (opt.format == "csv") {
        std::string out = std::string(kCsvHeader) + "\n" + record_csv_row("eval", opt, x, y, r);
        write_output(opt.out_path, out);
    } else {
        json j = record_json(opt, x, y, r);
        j["command"] = "eval";
        if (opt.timing) j["elapsed_ms"] = ms;
        write_output(opt.out_path, j.dump(2));
    }
    return 0;
}

int cmd_compare(const CommonOptions& opt, const std::string& methods_csv, double tol_rel) {
    QueryHandle handle;
    std::vector<double> x, y;
    build_query(opt, handle, x, y);

    std::vector<std::string> methods;
    {
        std::stringstream ss(methods_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) methods.push_back(item);
        }
    }
    if (methods.size() < 2) {
        std::cerr << "error: compare needs at least two methods\n";
        std::exit(2);
    }

    std::vector<dg_result> results(methods.size());
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const dg_status s = dg_eval(handle.q, methods[i].c_str(), &results[i]);
        if (s != DG_OK) die(s);
    }

    double max_rel = 0.0;
    json pairs = json::array();
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            const double scale = std::max(std::abs(results[i].value_re), 1e-300);
            const double rel = std::abs(results[i].value_re - results[j].value_re) / scale;
            max_rel = std::max(max_rel, rel);
            pairs.push_back({{"a", methods[i]}, {"b", methods[j]}, {"rel_diff", rel}});
        }
    const bool pass = max_rel <= tol_rel;

    if (opt.format == "csv") {
        std::ostringstream os;
        os << kCsvHeader << "\n";
        for (std::size_t i = 0; i < methods.size(); ++i)
            os << record_csv_row("compare", opt, x, y, results[i]) << "\n";
        os << "compare_summary,max_rel_diff," << x.size() << ',' << fmt17(opt.t) << ','
           << fmt17(opt.kappa) << ",,," << fmt17(max_rel) << ",,"
           << fmt17(tol_rel) << ",," << (pass ? 0 : 1) << ',' << opt.seed;
        write_output(opt.out_path, os.str());
    } else {
        json j;
        j["command"] = "compare";
        j["n"] = x.size();
        j["t"] = opt.t;
        j["kappa"] = opt.kappa;
        j["x"] = x;
        j["y"] = y;
        j["methods"] = methods;
        json recs = json::array();
        for (std::size_t i = 0; i < methods.size(); ++i) {
            json r = record_json(opt, x, y, results[i]);
            r.erase("x");
            r.erase("y");
            recs.push_back(r);
        }
        j["records"] = recs;
        j["pairs"] = pairs;
        j["max_rel_diff"] = max_rel;
        j["tol_rel"] = tol_rel;
        j["pass"] = pass;
        write_output(opt.out_path, j.dump(2));
    }
    return pass ? 0 : 1;
}

int cmd_sweep(const CommonOptions& opt, const std::string& method, const std::string& param,
              double from, double to, int points) {
    if (points < 2 || !(to > from)) {
        std::cerr << "error: sweep needs --points >= 2 and --to > --from\n";
        std::exit(2);
    }
    if (param != "t" && param != "kappa") {
        std::cerr << "error: sweep --param must be t or kappa\n";
        std::exit(2);
    }

    std::ostringstream os;
    os << "# deltagas sweep method=" << method << " param=" << param << " n=" << opt.n
       << " t=" << fmt17(opt.t) << " kappa=" << fmt17(opt.kappa) << " x=" << opt.x_csv
       << " y=" << opt.y_csv << "\n";
    os << "# " << param << " value error_estimate imag_residue\n";
    for (int i = 0; i < points; ++i) {
        const double v = from + (to - from) * i / (points - 1);
        CommonOptions o = opt;
        if (param == "t") {
            o.t = v;
        } else {
            o.kappa = v;
        }
        QueryHandle handle;
        std::vector<double> x, y;
        build_query(o, handle, x, y);
        dg_result r;
        const dg_status s = dg_eval(handle.q, method.c_str(), &r);
        if (s != DG_OK) die(s);
        os << fmt17(v) << ' ' << fmt17(r.value_re) << ' ' << fmt17(r.error_estimate) << ' '
           << fmt17(r.imag_residue) << "\n";
    }
    write_output(opt.out_path, os.str());
    return 0;
}

int cmd_verify(const CommonOptions& opt, const std::string& suite) {
    char* report = nullptr;
    int pass = 0;
    const dg_status s = dg_verify(suite.c_str(), opt.seed, &report, &pass);
    if (s != DG_OK) die(s);
    std::string text = report ? report : "";
    dg_string_free(report);
    write_output(opt.out_path, text);
    return pass ? 0 : 1;
}

int cmd_decay(const CommonOptions& opt, const std::string& method, const std::string& tgrid_csv) {
    const auto ts = parse_csv(tgrid_csv);
    double slope = 0.0;
    const dg_status s = dg_decay_rate(opt.n, opt.kappa, method.c_str(), ts.data(),
                                      static_cast<int>(ts.size()), &slope);
    if (s != DG_OK) die(s);
    const double target =
        -opt.kappa * opt.kappa / 12.0 * (static_cast<double>(opt.n) * opt.n * opt.n - opt.n);
    const double rel = std::abs(slope - target) / std::max(std::abs(target), 1e-300);

    if (opt.format == "csv") {
        std::ostringstream os;
        os << "command,method,n,kappa,t_grid,slope,target,rel_error,seed\n";
        os << "decay," << method << ',' << opt.n << ',' << fmt17(opt.kappa) << ','
           << join17(ts, ';') << ',' << fmt17(slope) << ',' << fmt17(target) << ',' << fmt17(rel)
           << ',' << opt.seed;
        write_output(opt.out_path, os.str());
    } else {
        json j;
        j["command"] = "decay";
        j["method"] = method;
        j["n"] = opt.n;
        j["kappa"] = opt.kappa;
        j["t_grid"] = ts;
        j["slope"] = slope;
        j["target"] = target;
        j["rel_error"] = rel;
        j["seed"] = opt.seed;
        write_output(opt.out_path, j.dump(2));
    }
    return 0;
}

// expands --job file contents into argv tokens (keys become long options)
std::vector<std::string> job_to_args(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        std::cerr << "error: cannot read job file " << path << "\n";
        std::exit(2);
    }
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        std::cerr << "error: bad job file: " << e.what() << "\n";
        std::exit(2);
    }
    if (!j.contains("command")) {
        std::cerr << "error: job file needs a \"command\" field\n";
        std::exit(2);
    }
    std::vector<std::string> args;
    args.push_back(j["command"].get<std::string>());
    for (const auto& [key, value] : j.items()) {
        if (key == "command") continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
        } else if (value.is_string()) {
            args.push_back("--" + key);
            args.push_back(value.get<std::string>());
        } else if (value.is_array()) {
            std::string csv;
            for (const auto& e : value) {
                if (!csv.empty()) csv += ",";
                csv += e.dump();
            }
            args.push_back("--" + key);
            args.push_back(csv);
        } else {
            args.push_back("--" + key);
            args.push_back(value.dump());
        }
    }
    return args;
}

void add_common(CLI::App* app, CommonOptions& opt, bool with_query) {
    if (with_query) {
        app->add_option("--n", opt.n, "particle count");
        app->add_option("--x", opt.x_csv, "comma-separated positions, weakly increasing");
        app->add_option("--y", opt.y_csv, "comma-separated positions, weakly increasing");
        app->add_option("--t", opt.t, "imaginary time, > 0");
        app->add_option("--kappa", opt.kappa, "coupling (positive binds)");
        app->add_flag("--zero-point", opt.zero_point, "evaluate at x = y = 0");
        app->add_option("--nodes", opt.nodes, "quadrature nodes per axis (0 = automatic)");
        app->add_option("--half-width", opt.half_width, "quadrature box half width (0 = automatic)");
        app->add_option("--tol", opt.tol, "accuracy target for automatic grids");
        app->add_flag("--mu-zero", opt.mu_zero, "thm1: use the zero contour offsets");
        app->add_option("--eps", opt.eps_csv, "partition form: contour fractions");
        app->add_option("--paths", opt.paths, "mc: path count");
        app->add_option("--steps", opt.steps, "mc: time steps per path");
        app->add_option("--bandwidth", opt.bandwidth, "mc: occupation kernel half width");
        app->add_flag("--antithetic", opt.antithetic, "mc: antithetic pairs");
        app->add_option("--pde-du", opt.pde_du, "pde: spatial step");
        app->add_option("--pde-dt", opt.pde_dt, "pde: time step");
    }
    app->add_option("--seed", opt.seed, "random seed");
    app->add_option("--format", opt.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", opt.out_path, "output file (written atomically)");
    app->add_flag("--timing", opt.timing, "include elapsed_ms in the record");
}

int run(std::vector<std::string> args) {
    CLI::App app{"imaginary-time propagator of the 1D contact Bose gas"};
    app.require_subcommand(0, 1);

    std::string job_path;
    app.add_option("--job", job_path, "read a JSON job description");

    CommonOptions opt;
    std::string method = "tw", methods_csv, suite = "identities", param = "t", tgrid_csv;
    double tol_rel = 1e-7, from = 0.0, to = 1.0;
    int points = 2;

    auto* eval = app.add_subcommand("eval", "evaluate one method");
    add_common(eval, opt, true);
    eval->add_option("--method", method, "tw|eigen|thm1|thm2|partition|zero|free|pde|mc");

    auto* compare = app.add_subcommand("compare", "evaluate several methods and cross-check");
    add_common(compare, opt, true);
    compare->add_option("--methods", methods_csv, "comma-separated method list")->required();
    compare->add_option("--tol-rel", tol_rel, "pass/fail threshold on pairwise differences");

    auto* sweep = app.add_subcommand("sweep", "parameter sweep, gnuplot-ready output");
    add_common(sweep, opt, true);
    sweep->add_option("--method", method, "method to sweep")->required();
    sweep->add_option("--param", param, "t or kappa")->required();
    sweep->add_option("--from", from)->required();
    sweep->add_option("--to", to)->required();
    sweep->add_option("--points", points)->required();

    auto* verify = app.add_subcommand("verify", "run a verification suite");
    add_common(verify, opt, false);
    verify->add_option("--suite", suite, "identities|poles|completeness|decay")->required();

    auto* decay = app.add_subcommand("decay", "fit the long-time decay rate at x = y = 0");
    add_common(decay, opt, false);
    decay->add_option("--n", opt.n, "particle count")->required();
    decay->add_option("--kappa", opt.kappa, "coupling, > 0")->required();
    decay->add_option("--method", method, "zero|thm1|thm2");
    decay->add_option("--t-grid", tgrid_csv, "comma-separated times")->required();

    std::vector<const char*> argv;
    argv.push_back("deltagas");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (!job_path.empty()) return run(job_to_args(job_path));

    if (eval->parsed()) return cmd_eval(opt, method);
    if (compare->parsed()) return cmd_compare(opt, methods_csv, tol_rel);
    if (sweep->parsed()) return cmd_sweep(opt, method, param, from, to, points);
    if (verify->parsed()) return cmd_verify(opt, suite);
    if (decay->parsed()) return cmd_decay(opt, method, tgrid_csv);

    std::cerr << app.help();
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}
