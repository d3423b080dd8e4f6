#pragma once

// Command-line front end: solve, sweep, expand and selftest. Kept in a header
// so tests can drive run() in-process.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "droplet/error.hpp"
#include "droplet/format.hpp"
#include "droplet/local_expansion.hpp"
#include "droplet/ode_shooter.hpp"
#include "droplet/params.hpp"
#include "droplet/reconstruct.hpp"
#include "droplet/triseries.hpp"

namespace droplet::cli {

enum exit_code : int { exit_ok = 0, exit_usage = 2, exit_numerical = 3 };

struct tolerances {
    double shoot_tol = 1e-8;
    double mass_tol = 1e-8;
    double ode_rtol = 1e-10;
    double ode_atol = 1e-12;
    double resonance_tol = default_resonance_tol;
};

struct run_config {
    double n = 2.0;
    double mass = 1.0;
    int cutoff = 12;
    std::optional<double> eps; // empty: automatic
    tolerances tol;
    int samples = default_profile_samples;
    std::string profile_csv = "profile.csv";
    std::string physical_csv = "physical.csv";
    std::string summary_json = "summary.json";
    unsigned long seed = 1;
    // sweep
    double mu_min = 0.1;
    double mu_max = 10.0;
    int count = 5;
    int threads = 0; // 0: hardware concurrency
    std::string sweep_csv = "sweep.csv";
    // expand
    std::string expand_out; // empty: stdout
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw error(error_kind::usage, "option " + key + ": not a finite number: '" + text + "'");
    }
    return v;
}

inline long parse_int(const std::string& key, const std::string& text)
{
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw error(error_kind::usage, "option " + key + ": not an integer: '" + text + "'");
    }
    return v;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

using setter = std::function<void(run_config&, const std::string&)>;

inline const std::map<std::string, setter>& setters()
{
    static const std::map<std::string, setter> table = {
        {"n", [](run_config& c, const std::string& v) { c.n = parse_real("n", v); }},
        {"mass", [](run_config& c, const std::string& v) { c.mass = parse_real("mass", v); }},
        {"cutoff", [](run_config& c, const std::string& v) { c.cutoff = static_cast<int>(parse_int("cutoff", v)); }},
        {"eps",
         [](run_config& c, const std::string& v) {
             if (v == "auto") {
                 c.eps.reset();
             } else {
                 c.eps = parse_real("eps", v);
             }
         }},
        {"shoot_tol", [](run_config& c, const std::string& v) { c.tol.shoot_tol = parse_real("shoot_tol", v); }},
        {"mass_tol", [](run_config& c, const std::string& v) { c.tol.mass_tol = parse_real("mass_tol", v); }},
        {"ode_rtol", [](run_config& c, const std::string& v) { c.tol.ode_rtol = parse_real("ode_rtol", v); }},
        {"ode_atol", [](run_config& c, const std::string& v) { c.tol.ode_atol = parse_real("ode_atol", v); }},
        {"resonance_tol",
         [](run_config& c, const std::string& v) { c.tol.resonance_tol = parse_real("resonance_tol", v); }},
        {"samples", [](run_config& c, const std::string& v) { c.samples = static_cast<int>(parse_int("samples", v)); }},
        {"profile_csv", [](run_config& c, const std::string& v) { c.profile_csv = v; }},
        {"physical_csv", [](run_config& c, const std::string& v) { c.physical_csv = v; }},
        {"summary_json", [](run_config& c, const std::string& v) { c.summary_json = v; }},
        {"seed", [](run_config& c, const std::string& v) { c.seed = static_cast<unsigned long>(parse_int("seed", v)); }},
        {"mu_min", [](run_config& c, const std::string& v) { c.mu_min = parse_real("mu_min", v); }},
        {"mu_max", [](run_config& c, const std::string& v) { c.mu_max = parse_real("mu_max", v); }},
        {"count", [](run_config& c, const std::string& v) { c.count = static_cast<int>(parse_int("count", v)); }},
        {"threads", [](run_config& c, const std::string& v) { c.threads = static_cast<int>(parse_int("threads", v)); }},
        {"out", [](run_config& c, const std::string& v) { c.sweep_csv = v; c.expand_out = v; }},
    };
    return table;
}

} // namespace detail

// key=value lines; '#' starts a comment. Unknown keys are usage errors.
inline std::map<std::string, std::string> parse_config_text(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw error(error_kind::usage, "config line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (!detail::setters().contains(key)) {
            throw error(error_kind::usage, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        kv[key] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

inline void apply_settings(run_config& cfg, const std::map<std::string, std::string>& kv)
{
    for (const auto& [k, v] : kv) {
        detail::setters().at(k)(cfg, v);
    }
}

inline void validate(const run_config& c, int min_cutoff)
{
    auto positive = [](const char* name, double v) {
        if (!(v > 0.0)) {
            throw error(error_kind::usage, std::string(name) + " must be positive");
        }
    };
    if (!(c.n > 1.5 && c.n < 3.0)) {
        throw error(error_kind::usage, "n must lie in the open interval (3/2, 3)");
    }
    positive("mass", c.mass);
    positive("shoot_tol", c.tol.shoot_tol);
    positive("mass_tol", c.tol.mass_tol);
    positive("ode_rtol", c.tol.ode_rtol);
    positive("ode_atol", c.tol.ode_atol);
    positive("resonance_tol", c.tol.resonance_tol);
    if (c.eps) {
        if (!(*c.eps > 0.0 && *c.eps < 1.0)) {
            throw error(error_kind::usage, "eps must lie in (0, 1)");
        }
    }
    if (c.cutoff < min_cutoff || c.cutoff > 40) {
        throw error(error_kind::usage, "cutoff must lie in [" + std::to_string(min_cutoff) + ", 40]");
    }
    if (c.samples < 10) {
        throw error(error_kind::usage, "samples must be at least 10");
    }
}

inline shooter_options make_shooter_options(const run_config& c)
{
    shooter_options o;
    o.ode.rtol = c.tol.ode_rtol;
    o.ode.atol = c.tol.ode_atol;
    o.shoot_tol = c.tol.shoot_tol;
    o.mass_tol = c.tol.mass_tol;
    o.handoff.fixed_eps = c.eps;
    return o;
}

inline nlohmann::ordered_json config_json(const run_config& c)
{
    nlohmann::ordered_json j;
    j["n"] = c.n;
    j["mass"] = c.mass;
    j["cutoff"] = c.cutoff;
    j["eps_mode"] = c.eps ? "fixed" : "auto";
    if (c.eps) {
        j["eps"] = *c.eps;
    }
    j["shoot_tol"] = c.tol.shoot_tol;
    j["mass_tol"] = c.tol.mass_tol;
    j["ode_rtol"] = c.tol.ode_rtol;
    j["ode_atol"] = c.tol.ode_atol;
    j["resonance_tol"] = c.tol.resonance_tol;
    j["samples"] = c.samples;
    j["profile_csv"] = c.profile_csv;
    j["physical_csv"] = c.physical_csv;
    j["summary_json"] = c.summary_json;
    return j;
}

inline void write_error_json(std::ostream& err, error_kind kind, const std::string& message)
{
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(kind));
    j["message"] = message;
    err << nlohmann::ordered_json{{"error", j}}.dump() << '\n';
}

namespace detail {

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw error(error_kind::usage, "cannot open output file '" + path + "'");
    }
    return out;
}

inline void csv_row(std::ostream& os, std::initializer_list<double> values)
{
    bool first = true;
    for (double v : values) {
        if (!first) {
            os << ',';
        }
        os << format_double(v);
        first = false;
    }
    os << '\n';
}

} // namespace detail

struct solve_artifacts {
    params prm;
    ubar expansion;
    shoot_result shoot;
    physical_profile physical;
};

inline solve_artifacts run_pipeline(const run_config& cfg)
{
    const params p = derive_params(cfg.n, cfg.mass);
    ubar u = compute_ubar(p, cfg.cutoff, cfg.tol.resonance_tol);
    shoot_result s = find_mu_bar(p, u, make_shooter_options(cfg), cfg.samples);
    physical_profile ph = physical_profile_from(p, s);
    return {p, std::move(u), std::move(s), std::move(ph)};
}

inline nlohmann::ordered_json summary_json(const run_config& cfg, const solve_artifacts& r)
{
    const params& p = r.prm;
    nlohmann::ordered_json j;
    j["n"] = p.n;
    j["nu"] = p.nu;
    j["A"] = p.big_a;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["gamma"] = p.gamma;
    j["eps"] = r.shoot.handoff.eps;
    j["x_hat"] = r.shoot.handoff.x_hat;
    j["b_bar"] = r.shoot.b_bar;
    j["mu_bar"] = r.shoot.mu_bar;
    j["a"] = r.physical.a;
    j["mass"] = r.physical.mass_check;
    j["hp_at_one"] = r.shoot.hp_at_one;
    j["residual_max"] = r.shoot.residual_max;
    j["cutoff"] = r.expansion.cutoff;
    j["iterations"] = r.shoot.iterations;

    nlohmann::ordered_json d;
    d["mass_target"] = p.mass_target;
    d["mass_integral"] = r.shoot.mass;
    const double kappa_half = std::sqrt(p.n + 3.0) * p.mass_target / (2.0 * std::sqrt(r.shoot.mu_bar));
    d["mass_integral_target"] = kappa_half;
    d["mass_relative_error"] = std::abs(r.shoot.mass - kappa_half) / kappa_half;
    d["heuristic_tail_bound"] = r.shoot.handoff.tail;
    d["handoff_mass"] = r.shoot.handoff.mass0;
    d["inner_iterations"] = r.shoot.inner_iterations;
    d["ubar_iterations"] = r.expansion.iterations;
    d["ubar_terms"] = r.expansion.series.size();
    d["ubar_residual_norm"] = r.expansion.residual_norm;
    d["mu_bracket"] = {r.shoot.mu_lo, r.shoot.mu_hi};
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& [mu, m] : r.shoot.history) {
        hist.push_back({mu, m});
    }
    d["bracket_history"] = hist;
    d["config"] = config_json(cfg);
    j["diagnostics"] = d;
    return j;
}

inline void write_profile_csv(std::ostream& os, const shoot_result& s)
{
    os << "x,H,Hp,Hpp,Hppp,mass_cum\n";
    for (const auto& r : s.profile) {
        detail::csv_row(os, {r.x, r.h, r.h1, r.h2, r.h3, r.mass_cum});
    }
}

inline void write_physical_csv(std::ostream& os, const physical_profile& ph)
{
    os << "y,Hcal\n";
    for (const auto& r : ph.samples) {
        detail::csv_row(os, {r.y, r.h});
    }
}

inline int cmd_solve(const run_config& cfg, std::ostream& out)
{
    validate(cfg, 2);
    const solve_artifacts r = run_pipeline(cfg);
    {
        auto f = detail::open_output(cfg.profile_csv);
        write_profile_csv(f, r.shoot);
    }
    {
        auto f = detail::open_output(cfg.physical_csv);
        write_physical_csv(f, r.physical);
    }
    {
        auto f = detail::open_output(cfg.summary_json);
        f << summary_json(cfg, r).dump(2) << '\n';
    }
    out << "mu_bar=" << format_double(r.shoot.mu_bar) << " b_bar=" << format_double(r.shoot.b_bar)
        << " a=" << format_double(r.physical.a) << " mass=" << format_double(r.physical.mass_check) << '\n';
    return exit_ok;
}

struct sweep_row {
    double mu;
    bool ok;
    double b_bar;
    double mass_integral;
    double mass_map;
    std::string error;
};

inline std::vector<double> geometric_grid(double lo, double hi, int count)
{
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    }
    g.front() = lo;
    g.back() = hi;
    return g;
}

// Evaluates the mass map on the grid with a small worker pool; rows keep grid order.
inline std::vector<sweep_row> sweep_mass_map(const params& p, const ubar& u, const shooter_options& opt,
                                             const std::vector<double>& mus, int threads)
{
    std::vector<sweep_row> rows(mus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < mus.size(); i = next++) {
            sweep_row& row = rows[i];
            row.mu = mus[i];
            try {
                const mass_eval e = mass_map(p, u, mus[i], opt);
                row = {mus[i], true, e.inner.b_bar, e.integral, e.value, {}};
            } catch (const error& e) {
                row = {mus[i], false, 0.0, 0.0, 0.0, std::string(to_string(e.kind()))};
            }
        }
    };
    unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(mus.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    return rows;
}

inline int cmd_sweep(const run_config& cfg, std::ostream& out)
{
    validate(cfg, 2);
    if (!(cfg.mu_min > 0.0 && cfg.mu_min < cfg.mu_max)) {
        throw error(error_kind::usage, "sweep needs 0 < mu_min < mu_max");
    }
    if (cfg.count < 2) {
        throw error(error_kind::usage, "sweep needs count >= 2");
    }
    const params p = derive_params(cfg.n, cfg.mass);
    const ubar u = compute_ubar(p, cfg.cutoff, cfg.tol.resonance_tol);
    const auto rows = sweep_mass_map(p, u, make_shooter_options(cfg), geometric_grid(cfg.mu_min, cfg.mu_max, cfg.count),
                                     cfg.threads);
    auto f = detail::open_output(cfg.sweep_csv);
    f << "mu,b_bar,mass_integral,M_of_mu,error\n";
    std::size_t ok = 0;
    for (const auto& r : rows) {
        if (r.ok) {
            ++ok;
            f << format_double(r.mu) << ',' << format_double(r.b_bar) << ',' << format_double(r.mass_integral) << ','
              << format_double(r.mass_map) << ",\n";
        } else {
            f << format_double(r.mu) << ",,,," << r.error << '\n';
        }
    }
    out << ok << "/" << rows.size() << " sweep points succeeded\n";
    return 2 * ok >= rows.size() ? exit_ok : exit_numerical;
}

inline void write_expansion(std::ostream& os, const params& p, const ubar& u)
{
    nlohmann::ordered_json h;
    h["n"] = p.n;
    h["cutoff"] = u.cutoff;
    h["residual_norm"] = u.residual_norm;
    h["terms"] = u.series.size();
    os << h.dump() << '\n';
    write_terms(os, u.series);
}

inline int cmd_expand(const run_config& cfg, std::ostream& out)
{
    validate(cfg, 1);
    const params p = derive_params(cfg.n, cfg.mass);
    const ubar u = compute_ubar(p, cfg.cutoff, cfg.tol.resonance_tol);
    if (cfg.expand_out.empty()) {
        write_expansion(out, p, u);
    } else {
        auto f = detail::open_output(cfg.expand_out);
        write_expansion(f, p, u);
    }
    return exit_ok;
}

// Quick randomized consistency checks of the series machinery.
inline int cmd_selftest(const run_config& cfg, std::ostream& out)
{
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> n_dist(1.51, 2.99);
    std::uniform_real_distribution<double> xi_dist(-3.0, 6.0);
    int failures = 0;
    auto report = [&](const std::string& name, bool ok) {
        out << (ok ? "PASS " : "FAIL ") << name << '\n';
        failures += ok ? 0 : 1;
    };

    bool roots = true, factor = true, ranges = true;
    for (int i = 0; i < 200; ++i) {
        const params p = derive_params(n_dist(rng), 1.0);
        roots = roots && std::abs(eval_p(p, -1.0)) <= 1e-12 && std::abs(eval_p_expanded(p, p.alpha)) <= 1e-12
                && std::abs(eval_p_expanded(p, p.beta)) <= 1e-12;
        ranges = ranges && p.big_a > 0.0 && p.alpha > -2.0 && p.alpha < 0.0 && p.beta > 0.0 && p.beta < 1.0;
        for (int j = 0; j < 10; ++j) {
            const double xi = xi_dist(rng);
            const double a = eval_p(p, xi);
            const double b = eval_p_expanded(p, xi);
            factor = factor && std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a));
        }
    }
    report("p roots at -1, alpha, beta", roots);
    report("factored and expanded p agree", factor);
    report("A > 0, alpha in (-2,0), beta in (0,1)", ranges);

    const params p = derive_params(cfg.n, cfg.mass);
    const ubar u = compute_ubar(p, std::max(cfg.cutoff, 2), cfg.tol.resonance_tol);
    report("series coefficient residual <= 1e-10", u.residual_norm <= 1e-10);
    report("x1 coefficient equals A/p(1)", std::abs(u.series.coeff({1, 0, 0}) - p.big_a / eval_p(p, 1.0)) <= 1e-10);
    const double c3 = p.nu * std::pow(p.big_a, -2.0 * p.nu / 3.0) / eval_p(p, p.gamma);
    report("x3 coefficient equals nu A^(-2nu/3)/p(gamma)", std::abs(u.series.coeff({0, 0, 1}) - c3) <= 1e-10);
    const handoff_state hs = choose_handoff(p, u, 1.0, 1.0);
    double worst = 0.0;
    for (int j = 1; j <= 20; ++j) {
        const double x = hs.x_hat * j / 20.0;
        worst = std::max(worst, std::abs(series_ode_residual(p, eval_series_profile(p, u, 1.0, 1.0, x), 1.0)));
    }
    report("series ODE residual <= 1e-8 at (b, mu) = (1, 1)", worst <= 1e-8);
    return failures == 0 ? exit_ok : exit_numerical;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Source-type droplet profiles for the thin-film equation with gravity"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::map<std::string, std::string> flags;
    std::string config_path;
    auto add_value = [&](CLI::App* sub, const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file; flags override its entries");
        add_value(sub, "n", "mobility exponent in (3/2, 3)");
        add_value(sub, "mass", "droplet mass M > 0");
        add_value(sub, "cutoff", "total-degree cutoff of the series (default 12)");
        add_value(sub, "eps", "series cube size, 'auto' or a value in (0, 1)");
        add_value(sub, "shoot_tol", "tolerance on |H'(1)|");
        add_value(sub, "mass_tol", "relative tolerance on the mass condition");
        add_value(sub, "ode_rtol", "integrator relative tolerance");
        add_value(sub, "ode_atol", "integrator absolute tolerance");
        add_value(sub, "resonance_tol", "smallest admissible |p(grade)|");
        add_value(sub, "seed", "random seed for selftest");
    };

    CLI::App* solve = app.add_subcommand("solve", "compute the droplet profile for given n and mass");
    add_common(solve);
    add_value(solve, "samples", "number of profile samples on (0, 1]");
    add_value(solve, "profile_csv", "output: x,H,Hp,Hpp,Hppp,mass_cum");
    add_value(solve, "physical_csv", "output: y,Hcal");
    add_value(solve, "summary_json", "output: run summary");

    CLI::App* sweep = app.add_subcommand("sweep", "tabulate the mass map on a geometric mu grid");
    add_common(sweep);
    add_value(sweep, "mu_min", "smallest mu");
    add_value(sweep, "mu_max", "largest mu");
    add_value(sweep, "count", "number of grid points (>= 2)");
    add_value(sweep, "threads", "worker threads (0: all cores)");
    add_value(sweep, "out", "output CSV (default sweep.csv)");

    CLI::App* expand = app.add_subcommand("expand", "dump the series coefficients");
    add_common(expand);
    add_value(expand, "out", "output file (default stdout)");

    CLI::App* selftest = app.add_subcommand("selftest", "run randomized consistency checks");
    add_common(selftest);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        write_error_json(err, error_kind::usage, e.what());
        return exit_usage;
    }

    try {
        run_config cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                throw error(error_kind::usage, "cannot read config file '" + config_path + "'");
            }
            std::stringstream buf;
            buf << in.rdbuf();
            apply_settings(cfg, parse_config_text(buf.str()));
        }
        apply_settings(cfg, flags);
        if (solve->parsed()) {
            return cmd_solve(cfg, out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(cfg, out);
        }
        if (expand->parsed()) {
            return cmd_expand(cfg, out);
        }
        return cmd_selftest(cfg, out);
    } catch (const error& e) {
        write_error_json(err, e.kind(), e.what());
        return e.is_numerical() ? exit_numerical : exit_usage;
    } catch (const std::exception& e) {
        write_error_json(err, error_kind::convergence, e.what());
        return exit_numerical;
    }
}

} // namespace droplet::cli
