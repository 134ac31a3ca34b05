// qlab: semiclassical sup-norm experiments from the command line.
//
//   qlab sweep|classify|counterexample|cluster|verify [flags]
//
// Exit codes: 0 success, 1 usage or internal error, 2 certificate failure.

#include "report.hpp"

#include "qlab/counterexample.hpp"
#include "qlab/error.hpp"
#include "qlab/operator.hpp"
#include "qlab/rescale.hpp"
#include "qlab/spectral.hpp"
#include "qlab/sweep.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace qlab;
using qlab::cli::json;
using qlab::cli::RunConfig;
using qlab::cli::UsageError;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kCertificate = 2;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

std::size_t effective_workers(const RunConfig& cfg) {
    if (const char* d = std::getenv("QLAB_DETERMINISTIC"); d && std::string(d) == "1") return 1;
    if (cfg.workers > 0) return cfg.workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

double h_from_k(int k) {
    if (k < 2) throw UsageError("k = " + std::to_string(k) + " gives h = 2^-k > 1/4; |log h| is too small for the construction");
    if (k > 40) throw UsageError("k = " + std::to_string(k) + " is out of range");
    return std::ldexp(1.0, -k);
}

json header(const RunConfig& cfg) {
    json j = cli::to_json(cfg);
    j["workers"] = effective_workers(cfg);
    return j;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg) {
    if (!sweep::is_experiment(cfg.experiment)) {
        std::string names;
        for (const auto& n : sweep::experiment_names()) names += " " + n;
        throw UsageError("unknown experiment '" + cfg.experiment + "'; choose one of:" + names);
    }
    h_from_k(cfg.k_min);
    h_from_k(cfg.k_max);
    sweep::SweepConfig sc;
    sc.cluster_width = cfg.cluster_width;
    sc.grid = cfg.grid;
    sc.workers = effective_workers(cfg);
    const auto report = sweep::run_sweep(cfg.experiment, sweep::dyadic_h(cfg.k_min, cfg.k_max), sc);

    const auto dir = output_dir(cfg);
    write_file(dir / "report.json", cli::dump(json{{"config", header(cfg)}, {"report", cli::to_json(report)}}));
    write_file(dir / "records.csv", cli::records_csv(report.records));
    write_file(dir / "scaling.svg", cli::scaling_svg(report));

    std::cout << cfg.experiment << ": " << report.records.size() << " records, verdict " << report.verdict;
    if (report.exponent)
        std::cout << ", exponent " << report.exponent->slope << " +- " << report.exponent->stderr_slope;
    std::cout << "\n";
    for (const auto& r : report.records)
        if (r.failure) std::cerr << "h = " << r.h << ": " << *r.failure << "\n";
    if (report.failures > 0) return kError;
    if (report.uncertified > 0) {
        std::cerr << report.uncertified << " record(s) failed the quasimode certificate\n";
        return kCertificate;
    }
    return kOk;
}

int cmd_classify(const RunConfig& cfg) {
    const double h = h_from_k(cfg.k_min);
    const auto v = cli::parse_potential(cfg.potential);
    const auto norm = rescale::verify_normalization(field::MetricField::identity(), v);
    const auto dir = output_dir(cfg);
    if (!norm.ok()) {
        const json j{{"config", header(cfg)}, {"normalization", cli::to_json(norm)}};
        write_file(dir / "normalization.json", cli::dump(j));
        std::cerr << "normalization conditions fail for " << v.description() << "\n" << cli::dump(j["normalization"]);
        return kCertificate;
    }
    const std::size_t samples = cfg.grid ? cfg.grid : 400;
    const auto cover = rescale::cover_ball(v, h, samples);
    std::array<std::size_t, 4> counts{};
    json balls = json::array();
    for (const auto& b : cover.balls) {
        ++counts[static_cast<std::size_t>(b.case_id - 1)];
        balls.push_back(cli::to_json(b));
    }
    const json j{{"config", header(cfg)},
                 {"h", h},
                 {"normalization", cli::to_json(norm)},
                 {"sample_points", cover.sample_points},
                 {"uncovered", cover.uncovered},
                 {"case_counts", counts},
                 {"points_by_case", cover.points_by_case},
                 {"balls", balls}};
    write_file(dir / "cover.json", cli::dump(j));
    write_file(dir / "cover.svg", cli::cover_svg(cover, h));
    std::cout << "h = " << h << ": " << cover.balls.size() << " balls (case 1: " << counts[0]
              << ", case 2: " << counts[1] << ", case 3: " << counts[2] << ", case 4: " << counts[3] << "); sample share by case:";
    for (std::size_t c = 0; c < 4; ++c)
        std::cout << ' ' << static_cast<double>(cover.points_by_case[c]) / static_cast<double>(cover.sample_points);
    std::cout << "\n";
    return cover.uncovered == 0 ? kOk : kCertificate;
}

int cmd_counterexample(const RunConfig& cfg) {
    h_from_k(cfg.k_min);
    h_from_k(cfg.k_max);
    const auto cap = cfg.cap == "restricted" ? counterexample::Cap::restricted : counterexample::Cap::full;
    const counterexample::SpectralQuadrature quad;
    const double kappa = sweep::kCounterexampleScale;
    json rows = json::array();
    bool pass = true;
    for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
        const double h = std::ldexp(1.0, -k);
        const auto m = quad.sum(h, cap);
        const double count = static_cast<double>(counterexample::piece_count(h, cap));
        const double expected = count / std::sqrt(h * counterexample::log_factor(h));
        const double origin_err = std::abs(m.origin_value - expected) / expected;
        const double residual = kappa * std::max(m.kt_plus, m.kt_minus);
        const auto restricted = counterexample::verify_restricted_sum(h, quad);
        json row{{"h", h},
                 {"k", k},
                 {"piece_count", count},
                 {"origin_value", m.origin_value},
                 {"expected_origin_value", expected},
                 {"origin_relative_error", origin_err},
                 {"origin_over_log_root", m.origin_value * std::sqrt(h / counterexample::log_factor(h))},
                 {"l2_norm", m.l2_norm},
                 {"hyperbolic_over_h", m.hyperbolic / h},
                 {"x1x2_over_h", m.x1x2 / h},
                 {"x1sq_over_h", m.x1sq / h},
                 {"kt_plus_over_h", m.kt_plus / h},
                 {"kt_minus_over_h", m.kt_minus / h},
                 {"max_overlap", m.max_overlap},
                 {"quasimode_residual", residual},
                 {"restricted",
                  {{"piece_count", restricted.piece_count},
                   {"value_at_origin", restricted.value_at_origin},
                   {"x1sq_over_h", restricted.x1sq_over_h},
                   {"x1sq_over_h_full", restricted.x1sq_over_h_full}}}};
        // Spatial cross-check where the tensor grids stay small.
        if (k <= 8) {
            try {
                const auto sum = counterexample::build_sum(h, quad.profiles(), cap);
                const auto s = counterexample::measure(sum);
                row["spatial_origin_relative_difference"] = std::abs(s.origin_value - m.origin_value) / m.origin_value;
                row["spatial_l2_relative_difference"] = std::abs(s.l2_norm - m.l2_norm) / m.l2_norm;
            } catch (const NyquistViolation& e) {
                row["nyquist_violation"] = e.what();
                pass = false;
            }
        }
        const bool ok = origin_err <= 1e-8 && m.max_overlap <= 1e-12 && residual <= cfg.cluster_width * h &&
                        kappa * m.l2_norm <= 1.0;
        row["invariants_pass"] = ok;
        pass = pass && ok;
        rows.push_back(row);
    }

    const auto dir = output_dir(cfg);
    json j{{"config", header(cfg)}, {"cap", counterexample::to_string(cap)}, {"quasimode_scale", kappa},
           {"rows", rows}, {"all_pass", pass}};
    const int kp = std::min(cfg.k_max, 8);
    const double hp = std::ldexp(1.0, -kp);
    const auto profiles = counterexample::axis_profiles(counterexample::build_sum(hp, quad.profiles(), cap), 2.0);
    write_file(dir / "profile.svg", cli::profile_svg(profiles, hp));
    j["profile_h"] = hp;
    write_file(dir / "counterexample.json", cli::dump(j));
    std::cout << "counterexample (" << counterexample::to_string(cap) << "), k = " << cfg.k_min << ".." << cfg.k_max
              << ": " << (pass ? "all invariants pass" : "invariant failures") << "\n";
    return pass ? kOk : kCertificate;
}

int cmd_cluster(const RunConfig& cfg) {
    const double h = h_from_k(cfg.k_min);
    const auto v = cli::parse_potential(cfg.potential);
    const std::size_t n = cfg.grid ? cfg.grid : 64;
    const auto p = op::SemiclassicalOperator::assemble(h, field::MetricField::identity(), v,
                                                       field::Grid2D(cfg.box, n), op::backend_from_string(cfg.backend));
    spectral::EigensolveOptions opts;
    opts.seed = cfg.seed;
    const double window = cfg.cluster_width * h;
    std::vector<spectral::EigenPair> pairs;
    try {
        pairs = spectral::interior_eigenpairs(p, window, opts);
    } catch (const TooManyEigenvalues& e) {
        std::cerr << e.what() << " (estimated " << e.estimated_count() << ")\n";
        return kError;
    }
    const auto dir = output_dir(cfg);
    json eig = json::array();
    for (const auto& e : pairs) eig.push_back({{"energy", e.energy}, {"residual", e.residual}});
    json j{{"config", header(cfg)}, {"h", h}, {"window", window}, {"eigenpairs", eig}, {"cluster_dim", pairs.size()}};
    bool pass = true;
    if (!pairs.empty()) {
        const auto [i1, i2] = spectral::spectral_function_peak(pairs);
        const auto built = spectral::build_cluster(h, cfg.cluster_width, pairs, spectral::coherent_coefficients(pairs, i1, i2));
        const auto r = op::residual(p, built.w);
        const auto sup = field::sup_location(built.w);
        j["l2_norm"] = r.u_l2;
        j["residual_l2"] = r.res_l2;
        j["sup_norm"] = sup.value;
        j["sup_point"] = {sup.point[0], sup.point[1]};
        j["sup_times_sqrt_h"] = sup.value * std::sqrt(h);
        pass = r.res_l2 <= window * (1 + 1e-6) && r.u_l2 <= 1.0 + 1e-9;
    }
    j["certified"] = pass;
    write_file(dir / "cluster.json", cli::dump(j));
    std::cout << "cluster at h = " << h << ": " << pairs.size() << " eigenpairs in |E| <= " << window << "\n";
    return pass ? kOk : kCertificate;
}

int cmd_verify(const RunConfig& cfg) {
    json j{{"config", header(cfg)}};
    bool pass = true;
    json norms = json::object();
    for (const auto& name : rescale::builtin_potential_names()) {
        const auto rep = rescale::verify_normalization(field::MetricField::identity(), rescale::builtin_potential(name));
        norms[name] = cli::to_json(rep);
        pass = pass && rep.ok();
    }
    j["normalization"] = norms;
    json ids = json::object();
    for (const char* kind : {"lemma3", "lemma4", "case2"}) {
        const auto check = cli::rescaling_identity_check(kind);
        json errors = json::array();
        for (std::size_t i = 0; i < check.points.size(); ++i)
            errors.push_back({{"n", check.points[i]}, {"relative_error", check.errors[i]}});
        ids[kind] = {{"errors", errors}, {"ratio", check.ratio}, {"pass", check.pass}};
        pass = pass && check.pass;
    }
    j["rescaling_identities"] = ids;
    const auto tc = spectral::coherent_torus_cluster(1.0 / 16, cfg.cluster_width);
    const double grid_l2 = field::l2_norm(tc.w);
    j["torus_parseval"] = {{"grid_l2", grid_l2}, {"coefficient_l2", tc.l2_norm}};
    pass = pass && std::abs(grid_l2 - tc.l2_norm) <= 1e-12;
    j["all_pass"] = pass;
    const auto dir = output_dir(cfg);
    write_file(dir / "verify.json", cli::dump(j));
    std::cout << "verify: " << (pass ? "all checks pass" : "some checks fail") << "\n";
    return pass ? kOk : kCertificate;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical sup-norm experiments"};
    app.require_subcommand(1);
    struct Sub {
        CLI::App* app;
        std::map<std::string, std::string> values;
        std::string config_file;
    };
    const std::vector<std::pair<std::string, std::string>> commands{
        {"sweep", "Run an experiment over h = 2^-k and fit the sup-norm growth"},
        {"classify", "Classify the unit disk into the four cases and cover it with balls"},
        {"counterexample", "Measure the hyperbolic counterexample for h = 2^-k"},
        {"cluster", "Eigensolve P = -h^2 Delta + V in a window |E| <= C h and build a coherent cluster"},
        {"verify", "Self-check normalization and rescaling identities"}};
    const std::map<std::string, std::string> option_help{
        {"experiment", "torus-cluster, harmonic-ground, zero-crossing, elliptic or hyperbolic-counterexample"},
        {"k", "dyadic range a..b for h = 2^-k, or a single k"},
        {"grid", "grid points per axis (power of two; 0 picks a default)"},
        {"cluster-width", "window constant C in |E| <= C h"},
        {"out", "output directory"},
        {"seed", "LOBPCG start seed"},
        {"backend", "finite-difference (fd) or spectral"},
        {"workers", "worker threads for sweeps (0 = all cores)"},
        {"potential", "builtin name (zero, linear, quadratic-well, saddle) or poly:c:i:j,..."},
        {"cap", "counterexample pieces: full or restricted"},
        {"box", "half width of the eigensolve box"}};
    std::map<std::string, Sub> subs;
    for (const auto& [name, help] : commands) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, help);
        for (const auto& key : cli::config_keys()) s.app->add_option("--" + key, s.values[key], option_help.at(key));
        s.app->add_option("--config", s.config_file, "Flat key = value file; flags override it");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kError;
    }

    try {
        for (auto& [name, s] : subs) {
            if (!s.app->parsed()) continue;
            RunConfig cfg;
            cfg.command = name;
            if (name == "classify") cfg.k_min = cfg.k_max = 8;
            if (name == "counterexample") cfg.k_min = 6, cfg.k_max = 16;
            if (name == "cluster") {
                cfg.k_min = cfg.k_max = 4;
                cfg.potential = "poly:1:2:0,1:0:2,-1:0:0";
            }
            if (!s.config_file.empty()) {
                std::ifstream in(s.config_file);
                if (!in) throw UsageError("cannot read config file " + s.config_file);
                std::stringstream ss;
                ss << in.rdbuf();
                cli::apply_config_text(cfg, ss.str());
            }
            for (const auto& key : cli::config_keys())
                if (s.app->count("--" + key) > 0) cli::apply_setting(cfg, key, s.values[key]);
            if (name == "sweep") return cmd_sweep(cfg);
            if (name == "classify") return cmd_classify(cfg);
            if (name == "counterexample") return cmd_counterexample(cfg);
            if (name == "cluster") return cmd_cluster(cfg);
            return cmd_verify(cfg);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return kError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
