#include "report.hpp"

#include "qlab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace qlab::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("invalid number for " + key + ": '" + v + "'");
    }
}

long long parse_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos, 0);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw UsageError("invalid integer for " + key + ": '" + v + "'");
    }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    const long long n = parse_integer(key, v);
    if (n < 0) throw UsageError(key + " must be non-negative");
    return static_cast<std::size_t>(n);
}

/// Replaces NaN and infinities by null so the output stays valid JSON.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string num(double x, int digits = 5) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Minimal plotting frame: data box mapped into a 640 x 480 canvas.
class Frame {
public:
    Frame(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
        if (x1_ <= x0_) x1_ = x0_ + 1.0;
        if (y1_ <= y0_) y1_ = y0_ + 1.0;
    }
    double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom); }

    std::string open(const std::string& title) const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
           << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
           << "</text>\n";
        return os.str();
    }

    std::string axes(const std::string& xlabel, const std::string& ylabel, int ticks = 5) const {
        std::ostringstream os;
        const double l = px(x0_), r = px(x1_), b = py(y0_), t = py(y1_);
        os << "<rect x=\"" << num(l) << "\" y=\"" << num(t) << "\" width=\"" << num(r - l) << "\" height=\""
           << num(b - t) << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int i = 0; i <= ticks; ++i) {
            const double xv = x0_ + (x1_ - x0_) * i / ticks;
            const double yv = y0_ + (y1_ - y0_) * i / ticks;
            os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(b + 16) << "\" text-anchor=\"middle\">" << num(xv, 3)
               << "</text>\n";
            os << "<text x=\"" << num(l - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv, 3)
               << "</text>\n";
        }
        os << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << kHeight - 8 << "\" text-anchor=\"middle\">"
           << xml_escape(xlabel) << "</text>\n";
        os << "<text x=\"16\" y=\"" << num((t + b) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
           << num((t + b) / 2) << ")\">" << xml_escape(ylabel) << "</text>\n";
        return os.str();
    }

    static constexpr int kWidth = 640;
    static constexpr int kHeight = 480;

private:
    static constexpr double kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;
    double x0_, x1_, y0_, y1_;
};

std::pair<double, double> padded_range(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 1.0};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double pad = (*hi - *lo) * 0.05 + 1e-12;
    return {*lo - pad, *hi + pad};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{"experiment", "k",    "grid",      "cluster-width", "out", "seed",
                                               "backend",    "workers", "potential", "cap",           "box"};
    return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "experiment") {
        cfg.experiment = v;
    } else if (key == "k") {
        std::tie(cfg.k_min, cfg.k_max) = parse_k_range(v);
    } else if (key == "grid") {
        cfg.grid = parse_count(key, v);
    } else if (key == "cluster-width" || key == "cluster_width") {
        cfg.cluster_width = parse_double(key, v);
        if (!(cfg.cluster_width > 0.0)) throw UsageError("cluster-width must be positive");
    } else if (key == "out") {
        cfg.out = v;
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_integer(key, v));
    } else if (key == "backend") {
        if (v != "finite-difference" && v != "fd" && v != "spectral") throw UsageError("unknown backend '" + v + "'");
        cfg.backend = v == "fd" ? "finite-difference" : v;
    } else if (key == "workers") {
        cfg.workers = parse_count(key, v);
    } else if (key == "potential") {
        cfg.potential = v;
    } else if (key == "cap") {
        if (v != "full" && v != "restricted") throw UsageError("cap must be full or restricted");
        cfg.cap = v;
    } else if (key == "box") {
        cfg.box = parse_double(key, v);
        if (!(cfg.box > 0.0)) throw UsageError("box must be positive");
    } else {
        throw UsageError("unknown config key '" + key + "'");
    }
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

json to_json(const RunConfig& c) {
    return json{{"command", c.command},
                {"experiment", c.experiment},
                {"k_min", c.k_min},
                {"k_max", c.k_max},
                {"grid", c.grid},
                {"cluster_width", c.cluster_width},
                {"out", c.out},
                {"seed", c.seed},
                {"backend", c.backend},
                {"workers", c.workers},
                {"potential", c.potential},
                {"cap", c.cap},
                {"box", c.box}};
}

std::pair<int, int> parse_k_range(const std::string& text) {
    const std::string t = trim(text);
    const auto dots = t.find("..");
    if (dots == std::string::npos) {
        const auto k = static_cast<int>(parse_integer("k", t));
        return {k, k};
    }
    const auto lo = static_cast<int>(parse_integer("k", t.substr(0, dots)));
    const auto hi = static_cast<int>(parse_integer("k", t.substr(dots + 2)));
    if (lo > hi) throw UsageError("k range " + t + " is empty");
    return {lo, hi};
}

field::PotentialField parse_potential(const std::string& spec) {
    const std::string s = trim(spec);
    if (s.rfind("poly:", 0) != 0) {
        const auto names = rescale::builtin_potential_names();
        if (std::find(names.begin(), names.end(), s) == names.end())
            throw UsageError("unknown potential '" + s + "' (builtins: zero, linear, quadratic-well, saddle; or poly:C:I:J,...)");
        return rescale::builtin_potential(s);
    }
    std::map<field::Poly2::Exponent, double> coeffs;
    std::istringstream terms(s.substr(5));
    std::string term;
    while (std::getline(terms, term, ',')) {
        std::istringstream parts(term);
        std::string c, i, j;
        if (!std::getline(parts, c, ':') || !std::getline(parts, i, ':') || !std::getline(parts, j, ':'))
            throw UsageError("polynomial term '" + term + "' is not C:I:J");
        const auto a1 = parse_integer("exponent", trim(i));
        const auto a2 = parse_integer("exponent", trim(j));
        if (a1 < 0 || a2 < 0) throw UsageError("negative exponent in '" + term + "'");
        coeffs[{static_cast<int>(a1), static_cast<int>(a2)}] += parse_double("coefficient", trim(c));
    }
    if (coeffs.empty()) throw UsageError("empty polynomial potential");
    return field::PotentialField::polynomial(field::Poly2(coeffs));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json to_json(const sweep::Fit& f) {
    return json{{"slope", number(f.slope)},
                {"stderr", number(f.stderr_slope)},
                {"intercept", number(f.intercept)},
                {"t_statistic", number(f.t_statistic)},
                {"p_value", number(f.p_value)},
                {"points", f.points}};
}

json to_json(const sweep::ScalingRecord& r) {
    json extra = json::object();
    for (const auto& [k, v] : r.extra) extra[k] = number(v);
    json j{{"h", number(r.h)}, {"certified", r.certified}, {"extra", extra}};
    if (r.failure) {
        j["failure"] = *r.failure;
    } else {
        j["l2_norm"] = number(r.l2_norm);
        j["sup_norm"] = number(r.sup_norm);
        j["residual_l2"] = number(r.residual_l2);
    }
    return j;
}

json to_json(const sweep::ScalingReport& r) {
    json recs = json::array();
    for (const auto& rec : r.records) recs.push_back(to_json(rec));
    auto opt = [](const std::optional<sweep::Fit>& f) { return f ? to_json(*f) : json(nullptr); };
    return json{{"experiment", r.experiment},
                {"records", recs},
                {"exponent", opt(r.exponent)},
                {"log_factor", opt(r.log_factor)},
                {"log_exponent", opt(r.log_exponent)},
                {"verdict", r.verdict},
                {"uncertified", r.uncertified},
                {"failures", r.failures}};
}

json to_json(const rescale::NormalizationReport& r) {
    json cn = json::array();
    for (const auto& c : r.cond3_constants) cn.push_back(c ? number(*c) : json(nullptr));
    return json{{"cond1_ok", r.cond1_ok},
                {"cond1_deviation", number(r.cond1_deviation)},
                {"cond2_values", json::array({number(r.cond2_first), number(r.cond2_second)})},
                {"cond2_ok", r.cond2_ok},
                {"cond3_constants", cn},
                {"suggested_c", r.suggested_c ? number(*r.suggested_c) : json(nullptr)}};
}

json to_json(const rescale::CaseDecision& d) {
    return json{{"case_id", d.case_id},
                {"center", json::array({number(d.center[0]), number(d.center[1])})},
                {"radius", number(d.radius)},
                {"translation", json::array({number(d.translation[0]), number(d.translation[1])})},
                {"beta_or_c", number(d.beta_or_c)}};
}

json to_json(const counterexample::Measures& m) {
    return json{{"origin_value", number(m.origin_value)}, {"l2_norm", number(m.l2_norm)},
                {"hyperbolic", number(m.hyperbolic)},     {"x1x2", number(m.x1x2)},
                {"x1sq", number(m.x1sq)},                 {"kt_plus", number(m.kt_plus)},
                {"kt_minus", number(m.kt_minus)},         {"max_overlap", number(m.max_overlap)}};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string records_csv(const std::vector<sweep::ScalingRecord>& records) {
    std::ostringstream os;
    os << "h,l2_norm,sup_norm,residual_l2,origin_value,cluster_dim\n";
    auto cell = [](double v) { return num(v, 17); };
    for (const auto& r : records) {
        os << cell(r.h) << ',';
        if (!r.failure) os << cell(r.l2_norm) << ',' << cell(r.sup_norm) << ',' << cell(r.residual_l2) << ',';
        else os << ",,,";
        if (auto it = r.extra.find("origin_value"); it != r.extra.end()) os << cell(it->second);
        os << ',';
        if (auto it = r.extra.find("cluster_dim"); it != r.extra.end()) os << cell(it->second);
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

std::string scaling_svg(const sweep::ScalingReport& report) {
    std::vector<double> lx, ly;
    for (const auto& r : report.records)
        if (!r.failure && r.sup_norm > 0.0) {
            lx.push_back(std::log10(r.h));
            ly.push_back(std::log10(r.sup_norm));
        }
    const auto [x0, x1] = padded_range(lx);
    const auto [y0, y1] = padded_range(ly);
    const Frame f(x0, x1, y0, y1);
    std::ostringstream os;
    os << f.open(report.experiment + ": sup norm against h");
    os << f.axes("log10 h", "log10 sup |u|");
    std::size_t i = 0;
    for (const auto& r : report.records) {
        if (r.failure || !(r.sup_norm > 0.0)) continue;
        os << "<circle cx=\"" << num(f.px(lx[i])) << "\" cy=\"" << num(f.py(ly[i])) << "\" r=\"4\" fill=\""
           << (r.certified ? "#1f77b4" : "none") << "\" stroke=\"#1f77b4\"/>\n";
        ++i;
    }
    if (report.exponent) {
        const auto& e = *report.exponent;
        const double a = x0, b = x1;
        // Fit is in natural logs; slope is base independent, intercept is not.
        const double ya = (e.intercept + e.slope * a * std::log(10.0)) / std::log(10.0);
        const double yb = (e.intercept + e.slope * b * std::log(10.0)) / std::log(10.0);
        os << "<line x1=\"" << num(f.px(a)) << "\" y1=\"" << num(f.py(ya)) << "\" x2=\"" << num(f.px(b))
           << "\" y2=\"" << num(f.py(yb)) << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
        os << "<text x=\"90\" y=\"56\">slope " << num(e.slope, 4) << " ± " << num(e.stderr_slope, 2) << ", "
           << xml_escape(report.verdict) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string cover_svg(const rescale::Cover& cover, double h) {
    static const char* colors[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728"};
    const Frame f(-1.05, 1.05, -1.05, 1.05);
    std::ostringstream head;
    head << f.open("case cover of the unit disk, h = " + num(h, 6));
    const double scale = f.px(1.0) - f.px(0.0);
    head << "<circle cx=\"" << num(f.px(0)) << "\" cy=\"" << num(f.py(0)) << "\" r=\"" << num(scale)
         << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int c = 0; c < 4; ++c)
        head << "<text x=\"" << 80 + 70 * c << "\" y=\"470\" fill=\"" << colors[c] << "\">case " << c + 1 << "</text>\n";

    // Stride through the balls if drawing all of them would break the size budget.
    constexpr std::size_t budget = 900000;
    constexpr std::size_t per_ball = 80;
    const std::size_t n = cover.balls.size();
    const std::size_t stride = std::max<std::size_t>(1, n * per_ball / budget + 1);
    std::ostringstream body;
    std::size_t drawn = 0;
    for (std::size_t i = 0; i < n; i += stride) {
        const auto& b = cover.balls[i];
        body << "<circle cx=\"" << num(f.px(b.center[0]), 4) << "\" cy=\"" << num(f.py(b.center[1]), 4) << "\" r=\""
             << num(std::max(0.3, b.radius * scale), 3) << "\" fill=\"" << colors[b.case_id - 1]
             << "\" fill-opacity=\"0.25\"/>\n";
        ++drawn;
    }
    std::ostringstream os;
    os << head.str() << body.str();
    if (drawn < n) os << "<text x=\"400\" y=\"56\">showing " << drawn << " of " << n << " balls</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string profile_svg(const counterexample::AxisProfiles& p, double h) {
    std::vector<double> xs = p.x1, ys = p.along_x1;
    xs.insert(xs.end(), p.x2.begin(), p.x2.end());
    ys.insert(ys.end(), p.along_x2.begin(), p.along_x2.end());
    ys.push_back(0.0);
    const auto [x0, x1] = padded_range(xs);
    const auto [y0, y1] = padded_range(ys);
    const Frame f(x0, x1, y0, y1);
    std::ostringstream os;
    os << f.open("|u_h| along the axes, h = " + num(h, 6));
    os << f.axes("x", "|u_h|");
    auto line = [&](const std::vector<double>& x, const std::vector<double>& y, const char* color) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i) os << num(f.px(x[i])) << ',' << num(f.py(y[i])) << ' ';
        os << "\"/>\n";
    };
    line(p.x1, p.along_x1, "#1f77b4");
    line(p.x2, p.along_x2, "#d62728");
    os << "<text x=\"90\" y=\"56\" fill=\"#1f77b4\">along x1 (x2 = 0)</text>\n";
    os << "<text x=\"90\" y=\"72\" fill=\"#d62728\">along x2 (x1 = 0)</text>\n";
    os << "</svg>\n";
    return os.str();
}

IdentityCheck rescaling_identity_check(const std::string& kind) {
    if (kind != "lemma3" && kind != "lemma4" && kind != "case2") throw UsageError("unknown identity " + kind);
    using field::Vec2;
    const auto metric = field::MetricField::polynomial(field::Poly2({{{0, 0}, 1.0}, {{1, 0}, 0.03}, {{0, 2}, 0.02}}),
                                                       field::Poly2::monomial(0.01, 1, 1),
                                                       field::Poly2({{{0, 0}, 1.0}, {{0, 1}, -0.02}}));
    const double h = kind == "case2" ? 1.0 / 256 : 1.0 / 16;
    const auto v = field::PotentialField::polynomial(
        field::Poly2({{{0, 0}, h / 3}, {{1, 0}, 0.36}, {{0, 1}, 0.48}, {{2, 0}, 0.004}, {{1, 1}, -0.003}}));
    auto disk_residual = [](double hh, const field::MetricField& g, const field::PotentialField& pot,
                            const field::GridFunction& u, double radius) {
        const auto p = op::SemiclassicalOperator::assemble(hh, g, pot, u.grid(), op::Backend::finite_difference);
        return field::l2_norm_in_disk(p.apply(u), Vec2::Zero(), radius);
    };
    IdentityCheck out{};
    // Narrow enough that the Gaussian is negligible on the edge of the preimage disk.
    const double sigma = kind == "lemma3" ? 0.25 / 3 : kind == "lemma4" ? 0.5 / 3 : 0.05;
    const double src_half_width = kind == "lemma4" ? 1.5 : kind == "case2" ? 0.6 : 1.0;
    for (std::size_t n : {64, 128, 256}) {
        const field::Grid2D src(src_half_width, n);
        const auto u = field::GridFunction::sample(src, [&](const Vec2& x) {
            return field::cplx(std::exp(-(x - Vec2(0.01, -0.02)).squaredNorm() / (2 * sigma * sigma)), 0.0);
        });
        double lhs = 0.0, rhs = 0.0;
        if (kind == "lemma3") {
            const auto r = rescale::lemma3_rescale(u, metric, h, field::Grid2D(3.0, n));
            lhs = disk_residual(1.0, r.metric, r.potential, r.u, 2.0);
            rhs = r.factor * disk_residual(1.0, metric, field::PotentialField::constant(0.0), u, 2 * std::sqrt(h));
        } else if (kind == "lemma4") {
            const auto r = rescale::lemma4_rescale(u, metric, v, h, 0.25, field::Grid2D(2.5, n));
            lhs = disk_residual(r.h, r.metric, r.potential, r.u, 2.0);
            rhs = r.factor * disk_residual(h, metric, v, u, 1.0);
        } else {
            const auto r = rescale::case2_rescale(u, metric, v, h, field::Grid2D(2.5, n));
            const auto vd = v.plus_constant(-r.constant_shift).scaled(r.divided_by_four ? 0.25 : 1.0);
            lhs = disk_residual(r.rescaled.h, r.rescaled.metric, r.rescaled.potential, r.rescaled.u, 2.0);
            rhs = r.rescaled.factor * disk_residual(h, metric, vd, u, 2 * r.beta);
        }
        out.points.push_back(n);
        out.errors.push_back(std::abs(lhs - rhs) / lhs);
    }
    out.ratio = out.errors[1] / out.errors[2];
    out.pass = out.ratio >= 3.5 && out.ratio <= 4.5;
    return out;
}

}  // namespace qlab::cli
