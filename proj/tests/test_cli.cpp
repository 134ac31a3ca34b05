#include "doctest.h"

#include "report.hpp"

#include "qlab/rescale.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace qlab;
using namespace qlab::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the qlab binary with QLAB_DETERMINISTIC=1; returns its exit code.
int run_qlab(const std::string& args) {
    const std::string cmd = "QLAB_DETERMINISTIC=1 " + std::string(QLAB_EXE) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

fs::path run_dir(const std::string& name) {
    const fs::path d = fs::path(QLAB_TEST_DIR) / name;
    fs::remove_all(d);
    return d;
}

void check_round_trip(const fs::path& p) {
    CAPTURE(p.string());
    const std::string text = slurp(p);
    REQUIRE_FALSE(text.empty());
    CHECK(dump(json::parse(text)) == text);
}

void check_svg(const fs::path& p) {
    CAPTURE(p.string());
    const std::string svg = slurp(p);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("href") == std::string::npos);
    CHECK(svg.find("<image") == std::string::npos);
    CHECK(svg.size() < 1000000);
}

}  // namespace

TEST_CASE("config parsing") {
    RunConfig cfg;
    apply_config_text(cfg, "# sweep settings\nexperiment = elliptic\nk = 5..9  # dyadic\n\ncluster-width=2.5\nworkers = 3\n");
    CHECK(cfg.experiment == "elliptic");
    CHECK(cfg.k_min == 5);
    CHECK(cfg.k_max == 9);
    CHECK(cfg.cluster_width == 2.5);
    CHECK(cfg.workers == 3);
    apply_setting(cfg, "k", "7");
    CHECK(cfg.k_min == 7);
    CHECK(cfg.k_max == 7);
    CHECK_THROWS_AS(apply_config_text(cfg, "colour = blue"), UsageError);
    CHECK_THROWS_AS(apply_config_text(cfg, "k 4..6"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "grid", "many"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "cluster-width", "-1"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "cap", "half"), UsageError);
    CHECK_THROWS_AS(parse_k_range("9..4"), UsageError);
    CHECK_THROWS_AS(parse_k_range("a..b"), UsageError);
    const auto j = to_json(cfg);
    CHECK(j.at("experiment") == "elliptic");
    CHECK(j.at("k_min") == 7);
    for (const auto& key : config_keys()) CHECK_NOTHROW(apply_setting(cfg, key, key == "k" ? "4..5" : key == "cap" ? "full" : key == "backend" ? "spectral" : "3"));
}

TEST_CASE("potential specs") {
    const auto v = parse_potential("poly:1:2:0,1:0:2,-1:0:0");
    const field::Vec2 x(0.3, -0.4);
    CHECK(v.value(x) == doctest::Approx(0.25 - 1.0));
    CHECK((v.gradient(x) - field::Vec2(0.6, -0.8)).norm() <= 1e-15);
    CHECK(parse_potential("linear").value(x) == doctest::Approx(rescale::builtin_potential("linear").value(x)));
    CHECK_THROWS_AS(parse_potential("poly:1:2"), UsageError);
    CHECK_THROWS_AS(parse_potential("poly:1:-1:0"), UsageError);
    CHECK_THROWS_AS(parse_potential("cubic"), UsageError);
}

TEST_CASE("JSON numbers") {
    json j{{"a", 0.1}, {"b", 1.0 / 3.0}, {"c", 2.3122406324961588e-15}, {"n", 3}};
    CHECK(dump(json::parse(dump(j))) == dump(j));
    sweep::Fit fit{-0.5, 0.0, 1.0, -std::numeric_limits<double>::infinity(), 0.0, 5};
    const auto fj = to_json(fit);
    CHECK(fj.at("t_statistic").is_null());
    CHECK(dump(fj).back() == '\n');
}

TEST_CASE("records CSV schema") {
    sweep::ScalingRecord a;
    a.h = 0.5;
    a.l2_norm = 1;
    a.sup_norm = 2;
    a.residual_l2 = 0.1;
    a.extra["cluster_dim"] = 12;
    sweep::ScalingRecord b = a;
    b.extra.clear();
    b.extra["origin_value"] = 3.5;
    sweep::ScalingRecord failed;
    failed.h = 0.25;
    failed.failure = "boom";
    const auto csv = records_csv({a, b, failed});
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "h,l2_norm,sup_norm,residual_l2,origin_value,cluster_dim");
    std::getline(in, line);
    CHECK(line == "0.5,1,2,0.10000000000000001,,12");
    std::getline(in, line);
    CHECK(line == "0.5,1,2,0.10000000000000001,3.5,");
}

TEST_CASE("SVG size limits") {
    const auto cover = rescale::cover_ball(rescale::builtin_potential("linear"), 1.0 / 256);
    const auto svg = cover_svg(cover, 1.0 / 256);
    CHECK(svg.size() < 1000000);
    CHECK(svg.find("href") == std::string::npos);
}

TEST_CASE("qlab sweep") {
    const auto dir = run_dir("sweep");
    CHECK(run_qlab("sweep --experiment torus-cluster --k 4..8 --out " + dir.string()) == 0);
    check_round_trip(dir / "report.json");
    check_svg(dir / "scaling.svg");
    const auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("config").at("experiment") == "torus-cluster");
    CHECK(report.at("config").at("k_min") == 4);
    CHECK(report.at("report").at("records").size() == 5);
    CHECK(slurp(dir / "records.csv").rfind("h,l2_norm,sup_norm,residual_l2,origin_value,cluster_dim\n", 0) == 0);

    // Same config twice: byte-identical report.
    const auto again = run_dir("sweep-again");
    CHECK(run_qlab("sweep --experiment torus-cluster --k 4..8 --out " + again.string()) == 0);
    auto strip_out = [](json j) {
        j["config"].erase("out");
        return dump(j);
    };
    CHECK(strip_out(json::parse(slurp(again / "report.json"))) == strip_out(report));
    CHECK(slurp(again / "records.csv") == slurp(dir / "records.csv"));

    CHECK(run_qlab("sweep --experiment nonsense --out " + run_dir("bad").string()) == 1);
    CHECK(run_qlab("sweep --k 1..4 --out " + run_dir("bad").string()) == 1);
    CHECK(run_qlab("frobnicate") == 1);
}

TEST_CASE("qlab sweep log-factor verdict") {
    const auto dir = run_dir("hyperbolic");
    CHECK(run_qlab("sweep --experiment hyperbolic-counterexample --k 6..16 --out " + dir.string()) == 0);
    const auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("report").at("verdict") == "log-corrected");
    check_round_trip(dir / "report.json");
}

TEST_CASE("config file with flag override") {
    const auto dir = run_dir("config");
    fs::create_directories(dir);
    const auto file = dir / "run.conf";
    std::ofstream(file) << "experiment = torus-cluster\nk = 4..9\nout = " << (dir / "from-file").string() << "\n";
    CHECK(run_qlab("sweep --config " + file.string() + " --k 4..8") == 0);
    const auto report = json::parse(slurp(dir / "from-file" / "report.json"));
    CHECK(report.at("config").at("k_max") == 8);
    CHECK(report.at("report").at("records").size() == 5);
    std::ofstream(dir / "bad.conf") << "flavour = sweet\n";
    CHECK(run_qlab("sweep --config " + (dir / "bad.conf").string()) == 1);
    CHECK(run_qlab("sweep --config " + (dir / "missing.conf").string()) == 1);
}

TEST_CASE("qlab classify") {
    const auto dir = run_dir("classify");
    CHECK(run_qlab("classify --potential linear --k 8 --out " + dir.string()) == 0);
    check_round_trip(dir / "cover.json");
    check_svg(dir / "cover.svg");
    const auto cover = json::parse(slurp(dir / "cover.json"));
    const auto& counts = cover.at("points_by_case");
    CHECK(counts.at(1).get<double>() > counts.at(2).get<double>());

    const auto zero = run_dir("classify-zero");
    CHECK(run_qlab("classify --potential zero --out " + zero.string()) == 0);
    for (const auto& b : json::parse(slurp(zero / "cover.json")).at("balls")) CHECK(b.at("case") == 1);

    const auto bad = run_dir("classify-bad");
    CHECK(run_qlab("classify --potential poly:100:1:0 --out " + bad.string()) == 2);
    const auto norm = json::parse(slurp(bad / "normalization.json"));
    CHECK(norm.at("normalization").at("suggested_c").get<double>() == doctest::Approx(std::sqrt(2.0 / 300)).epsilon(1e-3));
    check_round_trip(bad / "normalization.json");
    CHECK(run_qlab("classify --potential poly:1:x:0 --out " + bad.string()) == 1);
}

TEST_CASE("qlab counterexample") {
    const auto dir = run_dir("counterexample");
    CHECK(run_qlab("counterexample --k 6..10 --out " + dir.string()) == 0);
    check_round_trip(dir / "counterexample.json");
    check_svg(dir / "profile.svg");
    const auto j = json::parse(slurp(dir / "counterexample.json"));
    CHECK(j.at("all_pass") == true);
    CHECK(j.at("rows").size() == 5);
    const auto restricted = run_dir("counterexample-restricted");
    CHECK(run_qlab("counterexample --k 6..16 --cap restricted --out " + restricted.string()) == 0);
    CHECK(run_qlab("counterexample --k 1..4 --out " + run_dir("ce-bad").string()) == 1);
}

TEST_CASE("qlab cluster and verify") {
    const auto dir = run_dir("cluster");
    CHECK(run_qlab("cluster --k 3 --grid 32 --out " + dir.string()) == 0);
    check_round_trip(dir / "cluster.json");
    const auto verify = run_dir("verify");
    CHECK(run_qlab("verify --out " + verify.string()) == 0);
    check_round_trip(verify / "verify.json");
    CHECK(json::parse(slurp(verify / "verify.json")).at("all_pass") == true);
}
