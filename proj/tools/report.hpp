#pragma once

#include "qlab/counterexample.hpp"
#include "qlab/field.hpp"
#include "qlab/rescale.hpp"
#include "qlab/sweep.hpp"

#include "json.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qlab::cli {

using json = nlohmann::json;

/// Bad flags, config entries or potential specs; exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string experiment = "torus-cluster";
    int k_min = 4;
    int k_max = 12;
    std::size_t grid = 0;  // 0: per-command default
    double cluster_width = 1.0;
    std::string out = "qlab-out";
    std::uint64_t seed = 0x5eed;
    std::string backend = "finite-difference";
    std::size_t workers = 0;  // 0: hardware concurrency
    std::string potential = "zero";
    std::string cap = "full";
    double box = 2.0;  // half width of the eigensolve box (cluster)
};

/// Keys accepted in config files (and their flag spellings without "--").
const std::vector<std::string>& config_keys();
/// Sets one field from its text form; throws UsageError on a bad key or value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Flat "key = value" lines; '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text);
json to_json(const RunConfig& cfg);

/// "MIN..MAX" or a single integer.
std::pair<int, int> parse_k_range(const std::string& text);

/// Builtin name, or "poly:C:I:J[,C:I:J...]" for sum C x1^I x2^J.
field::PotentialField parse_potential(const std::string& spec);

/// Sorted keys, two-space indent, trailing newline. Non-finite numbers become null.
std::string dump(const json& j);

json to_json(const sweep::Fit& fit);
json to_json(const sweep::ScalingRecord& r);
json to_json(const sweep::ScalingReport& r);
json to_json(const rescale::NormalizationReport& r);
json to_json(const rescale::CaseDecision& d);
json to_json(const counterexample::Measures& m);

/// Header h,l2_norm,sup_norm,residual_l2,origin_value,cluster_dim; empty cells when absent.
std::string records_csv(const std::vector<sweep::ScalingRecord>& records);

/// Discrete rescaling identity for "lemma3", "lemma4" or "case2" on a Gaussian:
/// relative gap between the two sides at N = 64, 128, 256 and the ratio of the
/// last two gaps (4 for second-order convergence).
struct IdentityCheck {
    std::vector<std::size_t> points;
    std::vector<double> errors;
    double ratio;
    bool pass;  // ratio in [3.5, 4.5]
};
IdentityCheck rescaling_identity_check(const std::string& kind);

/// Log-log plot of sup_norm against h with the fitted line.
std::string scaling_svg(const sweep::ScalingReport& report);
/// Unit disk with the cover balls colored by case; thins out past ~900 kB.
std::string cover_svg(const rescale::Cover& cover, double h);
/// |u_h| along both coordinate axes.
std::string profile_svg(const counterexample::AxisProfiles& p, double h);

}  // namespace qlab::cli
