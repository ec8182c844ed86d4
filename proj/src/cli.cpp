#include "glmselect/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <ostream>
#include <set>
#include <thread>

#include "glmselect/io.hpp"

namespace glmselect::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "schema_version", "command", "format", "seed", "family", "design", "response",
    "penalty", "penalties", "structure", "select", "fit", "eigen", "dims",
    "certificate", "packing", "experiment"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw InputError(where + ": unknown key '" + key + "'");
}

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw InputError(where + " must be a JSON object");
}

double get_double(const json& j, const char* key, double def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    if (!j.at(key).is_number()) throw InputError(std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    if (!j.at(key).is_number_integer()) throw InputError(std::string("'") + key + "' must be an integer");
    return j.at(key).get<int>();
}

bool get_bool(const json& j, const char* key, bool def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    if (!j.at(key).is_boolean()) throw InputError(std::string("'") + key + "' must be true or false");
    return j.at(key).get<bool>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw InputError(std::string("'") + key + "' must be an unsigned 64-bit integer");
    return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key, const std::string& def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    if (!j.at(key).is_string()) throw InputError(std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vector_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v[i]));
    return a;
}

json one_based(const ModelSpec& M) {
    json a = json::array();
    for (int j : M.indices) a.push_back(j + 1);
    return a;
}

std::vector<int> index_list(const json& j, int p, const std::string& where) {
    if (!j.is_array()) throw InputError(where + " must be an array of 1-based indices");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw InputError(where + " must hold integers");
        const int idx = v.get<int>();
        if (idx < 1 || idx > p)
            throw InputError(where + ": index " + std::to_string(idx) + " outside 1.." + std::to_string(p));
        out.push_back(idx - 1);
    }
    return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Data

int resolve_column(const json& spec, const CsvTable& t, const std::string& where) {
    const std::size_t width = t.rows.empty() ? t.header.size() : t.rows[0].size();
    if (spec.is_string()) {
        const int c = t.column(spec.get<std::string>());
        if (c < 0) throw InputError(where + ": no column named '" + spec.get<std::string>() + "'");
        return c;
    }
    if (spec.is_number_integer()) {
        const int c = spec.get<int>();
        if (c < 1 || c > static_cast<int>(width))
            throw InputError(where + ": column " + std::to_string(c) + " out of range");
        return c - 1;
    }
    throw InputError(where + " must be a column name or a 1-based column number");
}

DesignSpec parse_design(const json& j) {
    require_object(j, "design");
    DesignSpec spec;
    const std::string kind = get_string(j, "kind", "csv");
    if (kind == "csv") {
        reject_unknown(j, {"kind", "path", "header", "response_column", "columns"}, "design");
        const CsvTable t = read_csv(get_string(j, "path", ""), get_bool(j, "header", true));
        std::vector<int> cols;
        if (j.contains("columns")) {
            for (const auto& c : j.at("columns")) cols.push_back(resolve_column(c, t, "design.columns"));
        } else {
            const int skip = j.contains("response_column")
                                 ? resolve_column(j.at("response_column"), t, "design.response_column")
                                 : -1;
            const std::size_t width = t.rows.empty() ? t.header.size() : t.rows[0].size();
            for (int c = 0; c < static_cast<int>(width); ++c)
                if (c != skip) cols.push_back(c);
        }
        if (cols.empty()) throw InputError("design has no predictor columns");
        spec.kind = DesignKind::custom;
        spec.matrix = numeric_matrix(t, cols);
        spec.n = static_cast<int>(spec.matrix.rows());
        spec.p = static_cast<int>(spec.matrix.cols());
        return spec;
    }
    reject_unknown(j, {"kind", "n", "p", "seed", "column_norm"}, "design");
    spec.kind = design_kind_from_string(kind);
    if (spec.kind == DesignKind::custom) throw InputError("design kind 'custom' is spelled 'csv' in configs");
    spec.n = get_int(j, "n", 0);
    spec.p = get_int(j, "p", spec.n);
    spec.seed = get_u64(j, "seed", 0);
    spec.column_norm = get_double(j, "column_norm", 0.0);
    return spec;
}

std::optional<VectorXd> load_response(const json& doc, int n) {
    VectorXd y;
    if (doc.contains("design") && doc.at("design").contains("response_column")) {
        const json& d = doc.at("design");
        const CsvTable t = read_csv(get_string(d, "path", ""), get_bool(d, "header", true));
        const int c = resolve_column(d.at("response_column"), t, "design.response_column");
        y = numeric_matrix(t, {c}).col(0);
    } else if (doc.contains("response")) {
        const json& r = doc.at("response");
        require_object(r, "response");
        reject_unknown(r, {"path", "header", "column"}, "response");
        const CsvTable t = read_csv(get_string(r, "path", ""), get_bool(r, "header", true));
        const int c = r.contains("column") ? resolve_column(r.at("column"), t, "response.column") : 0;
        y = numeric_matrix(t, {c}).col(0);
    } else {
        return std::nullopt;
    }
    if (y.size() != n)
        throw InputError("response has " + std::to_string(y.size()) + " rows but the design has " +
                         std::to_string(n));
    return y;
}

DesignMatrix require_design(const json& doc) {
    if (!doc.contains("design")) throw InputError("config needs a 'design' block");
    return generate_design(parse_design(doc.at("design")));
}

FitOptions parse_fit(const json& doc) {
    FitOptions f;
    if (!doc.contains("fit")) return f;
    const json& j = doc.at("fit");
    require_object(j, "fit");
    reject_unknown(j, {"tol_obj", "tol_grad", "max_iter", "max_halvings", "margin"}, "fit");
    f.tol_obj = get_double(j, "tol_obj", f.tol_obj);
    f.tol_grad = get_double(j, "tol_grad", f.tol_grad);
    f.max_iter = get_int(j, "max_iter", f.max_iter);
    f.max_halvings = get_int(j, "max_halvings", f.max_halvings);
    f.margin = get_double(j, "margin", f.margin);
    if (!(f.tol_obj > 0 && f.tol_grad > 0 && f.max_iter > 0 && f.max_halvings >= 0 &&
          f.margin >= 0 && f.margin < 0.5))
        throw InputError("fit options out of range");
    return f;
}

std::vector<PenaltyRule> parse_rules(const json& doc, const NaturalFamily& fam,
                                     const PenaltyContext& ctx) {
    std::vector<PenaltyRule> rules;
    if (doc.contains("penalties")) {
        if (!doc.at("penalties").is_array() || doc.at("penalties").empty())
            throw InputError("'penalties' must be a nonempty array");
        for (const auto& r : doc.at("penalties")) rules.push_back(parse_penalty(r, fam, ctx));
    }
    if (doc.contains("penalty")) rules.push_back(parse_penalty(doc.at("penalty"), fam, ctx));
    if (rules.empty()) throw InputError("config needs 'penalty' or 'penalties'");
    return rules;
}

json family_json(const NaturalFamily& fam) {
    const CurvatureBounds cb = curvature_bounds(fam);
    return {{"kind", to_string(fam.kind())},
            {"a", fam.a()},
            {"theta_space", {finite_or_null(fam.theta_space().lo), finite_or_null(fam.theta_space().hi)}},
            {"curvature", {{"lower", cb.lower}, {"upper", cb.upper}, {"ratio", cb.ratio()}}}};
}

json penalty_json(const PenaltyRule& r) {
    json params = json::object();
    switch (r.kind) {
        case PenaltyKind::ebic: params["gamma"] = r.gamma; break;
        case PenaltyKind::ric:
        case PenaltyKind::klogpk:
        case PenaltyKind::structural:
            params["c"] = r.c;
            params["practical"] = r.practical;
            params["curvature_ratio"] = r.curvature_ratio;
            break;
        case PenaltyKind::custom:
            params["A"] = r.slack;
            params["multiplier"] = r.multiplier;
            params["curvature_ratio"] = r.curvature_ratio;
            params["weights"] = r.weights;
            break;
        case PenaltyKind::linear: params["c"] = r.c; break;
        default: break;
    }
    return {{"kind", to_string(r.kind)}, {"label", r.label()}, {"params", params}};
}

struct Certificate {
    std::vector<double> weights;
    WeightCertificate cert;
};

// Certificate for a rule: explicit "certificate" block, else the weights the
// rule itself implies, else constant ln p with the default slack.
Certificate certify(const json& doc, const PenaltyRule& rule, const PenaltyContext& ctx) {
    const double default_slack = theory_slack(kTheoryConstant);
    Certificate c;
    double A = default_slack;
    if (doc.contains("certificate")) {
        const json& j = doc.at("certificate");
        require_object(j, "certificate");
        reject_unknown(j, {"weights", "A"}, "certificate");
        c.weights = j.contains("weights") ? parse_weights(j.at("weights"), ctx)
                                          : constant_weights(std::log(static_cast<double>(ctx.p)), ctx.r);
        A = get_double(j, "A", default_slack);
    } else if (rule.kind == PenaltyKind::custom) {
        c.weights = rule.weights;
        A = rule.slack;
    } else if ((rule.kind == PenaltyKind::ric || rule.kind == PenaltyKind::klogpk ||
                rule.kind == PenaltyKind::structural) && rule.c > 16.0) {
        const double ct = theory_slack(rule.c);
        A = ct;
        if (rule.kind == PenaltyKind::ric)
            c.weights = constant_weights(ct * std::log(static_cast<double>(ctx.p)), ctx.r);
        else if (rule.kind == PenaltyKind::klogpk)
            c.weights = klogpk_weights(ct, ctx.p, ctx.r);
        else
            c.weights = structural_weights(ct, ctx);
    } else {
        c.weights = constant_weights(std::log(static_cast<double>(ctx.p)), ctx.r);
    }
    c.cert = weights_certificate(c.weights, A, rule, ctx);
    return c;
}

json certificate_json(const PenaltyRule& rule, const Certificate& c) {
    return {{"rule", rule.label()},
            {"S", c.cert.S},
            {"penalty_ok", c.cert.penalty_ok},
            {"A", c.cert.A},
            {"first_violation", c.cert.first_violation == 0 ? json(nullptr) : json(c.cert.first_violation)},
            {"risk_bound_constant", risk_bound_constant(c.cert.A, c.cert.S, rule.curvature_ratio)},
            {"weights", c.weights}};
}

Output finish(const RunConfig& cfg, json report, const std::string& csv) {
    report["config"] = cfg.doc;
    if (cfg.format == "json") return {dump(report), std::nullopt};
    return {csv, dump(report)};
}

// ---------------------------------------------------------------------------
// Commands

Output eigen_report(const RunConfig& cfg) {
    const json& doc = cfg.doc;
    const DesignMatrix X = require_design(doc);
    json e = doc.value("eigen", json::object());
    require_object(e, "eigen");
    reject_unknown(e, {"k_max", "budget"}, "eigen");
    const int kmax = get_int(e, "k_max", X.rank());
    if (kmax < 1 || kmax > X.rank()) throw InputError("eigen.k_max must lie in 1..rank(X)");
    SpectrumOptions so;
    so.budget = get_u64(e, "budget", kDefaultSubsetBudget);
    so.seed = get_u64(doc, "seed", 0);
    so.threads = cfg.threads;

    std::string csv = csv_line({"k", "phi_min", "phi_max", "tau", "exhaustive"});
    json rows = json::array();
    for (int k = 1; k <= kmax; ++k) {
        const SparseSpectrum s = sparse_spectrum(X, k, so);
        csv += csv_line({std::to_string(k), format_double(s.phi_min), format_double(s.phi_max),
                         format_double(s.tau), s.exhaustive ? "true" : "false"});
        rows.push_back({{"k", k}, {"phi_min", s.phi_min}, {"phi_max", s.phi_max}, {"tau", s.tau},
                        {"exhaustive", s.exhaustive}, {"subsets_examined", s.subsets_examined}});
    }
    json report = {{"command", to_string(cfg.command)},
                   {"design", {{"n", X.n()}, {"p", X.p()}, {"r", X.rank()}}},
                   {"rows", rows}};
    return finish(cfg, report, csv);
}

Output penalty_table(const RunConfig& cfg) {
    const json& doc = cfg.doc;
    const NaturalFamily fam = parse_family(doc.at("family")).build();
    int p = 0, r = 0, n = 0;
    if (doc.contains("design")) {
        const DesignMatrix X = require_design(doc);
        p = X.p();
        r = X.rank();
        n = X.n();
    } else if (doc.contains("dims")) {
        const json& d = doc.at("dims");
        require_object(d, "dims");
        reject_unknown(d, {"p", "r", "n"}, "dims");
        p = get_int(d, "p", 0);
        r = get_int(d, "r", p);
        n = get_int(d, "n", p);
    } else {
        throw InputError("penalty-table needs a 'design' or 'dims' block");
    }
    const ModelFamily models = parse_structure(doc.value("structure", json(nullptr)), p);
    const PenaltyContext ctx = penalty_context(models, p, r, n);
    const std::vector<PenaltyRule> rules = parse_rules(doc, fam, ctx);

    std::vector<std::string> head{"k"};
    for (const auto& rule : rules) head.push_back(rule.label());
    std::string csv = csv_line(head);
    std::vector<json> values(rules.size(), json::array());
    for (int k = 1; k <= r; ++k) {
        std::vector<std::string> line{std::to_string(k)};
        const bool admissible = std::isfinite(ctx.log_count(k));
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (!admissible && rules[i].kind == PenaltyKind::structural) {
                line.emplace_back();
                values[i].push_back(nullptr);
                continue;
            }
            const double v = pen_value(rules[i], k, ctx);
            line.push_back(format_double(v));
            values[i].push_back(v);
        }
        csv += csv_line(line);
    }
    json out_rules = json::array();
    for (std::size_t i = 0; i < rules.size(); ++i) {
        json rj = penalty_json(rules[i]);
        rj["values"] = values[i];
        rj["certificate"] = certificate_json(rules[i], certify(doc, rules[i], ctx));
        out_rules.push_back(rj);
    }
    json report = {{"command", to_string(cfg.command)},
                   {"dims", {{"p", p}, {"r", r}, {"n", n}}},
                   {"family", family_json(fam)},
                   {"structure", to_string(models.kind)},
                   {"rules", out_rules}};
    return finish(cfg, report, csv);
}

Output packing_report(const RunConfig& cfg) {
    const json& doc = cfg.doc;
    const NaturalFamily fam = parse_family(doc.at("family")).build();
    if (!doc.contains("packing")) throw InputError("packing command needs a 'packing' block");
    const json& j = doc.at("packing");
    require_object(j, "packing");
    reject_unknown(j, {"case", "p0", "p", "r", "attempts", "target_c", "max_vectors", "phi_max"}, "packing");

    std::optional<DesignMatrix> X;
    if (doc.contains("design")) X = require_design(doc);
    const int p = X ? X->p() : get_int(j, "p", 0);
    const int r = X ? X->rank() : get_int(j, "r", p);
    const int p0 = get_int(j, "p0", 0);
    if (p < 1 || p0 < 1 || p0 > p) throw InputError("packing needs 1 <= p0 <= p");
    std::string kase = get_string(j, "case", "auto");
    if (kase == "auto") kase = 2 * p0 <= r ? "sparse" : (p0 >= 8 ? "dense-vg" : "two-point");

    const int spectrum_k = kase == "sparse" ? std::min(2 * p0, p) : p0;
    double phi_max = get_double(j, "phi_max", 0.0);
    bool phi_from_design = false;
    if (phi_max <= 0.0) {
        if (X) {
            phi_max = sparse_spectrum(*X, spectrum_k, {.seed = get_u64(doc, "seed", 0), .threads = cfg.threads}).phi_max;
            phi_from_design = true;
        } else {
            phi_max = 1.0;
        }
    }

    PackingSet ps;
    if (kase == "sparse")
        ps = sparse_packing(p0, p, fam, phi_max, get_int(j, "attempts", 8), get_u64(doc, "seed", 0),
                            get_double(j, "target_c", 1.0));
    else if (kase == "dense-vg")
        ps = vg_packing(p0, p, fam, phi_max, static_cast<std::size_t>(get_int(j, "max_vectors", 4096)));
    else if (kase == "two-point")
        ps = two_point_packing(p0, p, fam, phi_max);
    else
        throw InputError("unknown packing case '" + kase + "'");

    std::vector<std::string> head;
    for (int i = 1; i <= p; ++i) head.push_back("beta_" + std::to_string(i));
    std::string csv = csv_line(head);
    json vectors = json::array();
    for (const auto& v : ps.vectors) {
        std::vector<std::string> line;
        for (Eigen::Index i = 0; i < v.size(); ++i) line.push_back(format_double(v[i]));
        csv += csv_line(line);
        vectors.push_back(vector_json(v));
    }
    json report = {{"command", to_string(cfg.command)},
                   {"case", to_string(ps.kind)},
                   {"p0", ps.p0},
                   {"p", ps.p},
                   {"cardinality", ps.cardinality()},
                   {"target_distance", ps.target_distance},
                   {"min_hamming", ps.min_hamming},
                   {"pairwise_certified", true},
                   {"amplitude", ps.amplitude},
                   {"phi_max", phi_max},
                   {"phi_max_from_design", phi_from_design},
                   {"achieved_c", ps.achieved_c},
                   {"log_card_ratio", ps.log_card_ratio}};
    if (cfg.format == "json") report["vectors"] = vectors;
    return finish(cfg, report, csv);
}

ExperimentSpec build_experiment(const json& doc) {
    ExperimentSpec spec;
    spec.family = parse_family(doc.at("family"));
    if (!doc.contains("design")) throw InputError("experiment needs a 'design' block");
    spec.design = parse_design(doc.at("design"));
    const NaturalFamily fam = spec.family.build();
    const DesignMatrix X = generate_design(spec.design);

    const ModelFamily models = parse_structure(doc.value("structure", json(nullptr)), X.p());
    spec.structure = models.kind;
    spec.groups = models.groups;
    spec.parents = models.parents;
    spec.custom_models = models.models;
    spec.max_size = models.max_size;
    spec.rules = parse_rules(doc, fam, penalty_context(models, X));
    spec.seed = get_u64(doc, "seed", 0);

    if (!doc.contains("experiment")) throw InputError("config needs an 'experiment' block");
    const json& e = doc.at("experiment");
    require_object(e, "experiment");
    reject_unknown(e, {"beta_true", "signal", "p0_grid", "replicates", "prune", "guard", "max_failure_rate"},
                   "experiment");
    if (e.contains("beta_true")) {
        const auto v = e.at("beta_true").get<std::vector<double>>();
        spec.beta_true = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (e.contains("p0_grid")) spec.p0_grid = e.at("p0_grid").get<std::vector<int>>();
    if (e.contains("signal")) {
        const json& s = e.at("signal");
        require_object(s, "experiment.signal");
        reject_unknown(s, {"support", "magnitude", "amplitude", "random_signs"}, "experiment.signal");
        const std::string sup = get_string(s, "support", "random");
        if (sup == "first") spec.signal.support = SupportRule::first;
        else if (sup == "random") spec.signal.support = SupportRule::random;
        else throw InputError("signal.support must be 'first' or 'random'");
        const std::string mag = get_string(s, "magnitude", "minimax");
        if (mag == "fixed") spec.signal.magnitude = MagnitudeRule::fixed;
        else if (mag == "minimax") spec.signal.magnitude = MagnitudeRule::minimax;
        else throw InputError("signal.magnitude must be 'fixed' or 'minimax'");
        spec.signal.amplitude = get_double(s, "amplitude", 1.0);
        spec.signal.random_signs = get_bool(s, "random_signs", true);
    }
    spec.replicates = get_int(e, "replicates", spec.replicates);
    spec.prune = get_bool(e, "prune", spec.prune);
    spec.guard = get_u64(e, "guard", spec.guard);
    spec.max_failure_rate = get_double(e, "max_failure_rate", spec.max_failure_rate);
    spec.validate();
    return spec;
}

json risk_json(const RiskReport& rep, const std::string& status) {
    json grid = json::array();
    for (const auto& g : rep.grid) grid.push_back({{"p0", g.p0}, {"beta_true", vector_json(g.beta_true)}});
    json rows = json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"rule", r.rule},
                        {"rule_index", r.rule_index},
                        {"p0", r.p0},
                        {"mean_kl", r.mean_kl},
                        {"stderr", r.stderr_kl},
                        {"mean_model_size", r.mean_model_size},
                        {"rate_ratio", finite_or_null(r.rate_ratio)},
                        {"replicates", r.replicates},
                        {"failures", r.failures}});
    return {{"status", status},
            {"design", {{"n", rep.n}, {"p", rep.p}, {"r", rep.r}}},
            {"grid", grid},
            {"rows", rows}};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Command c) {
    switch (c) {
        case Command::select: return "select";
        case Command::greedy: return "greedy";
        case Command::eigen: return "eigen";
        case Command::penalty_table: return "penalty-table";
        case Command::packing: return "packing";
        case Command::risk_sim: return "risk-sim";
        case Command::rate_curve: return "rate-curve";
    }
    return "select";
}

Command command_from_string(const std::string& name) {
    for (auto c : {Command::select, Command::greedy, Command::eigen, Command::penalty_table,
                   Command::packing, Command::risk_sim, Command::rate_curve})
        if (to_string(c) == name) return c;
    throw InputError("unknown command '" + name + "'");
}

RunConfig resolve_config(Command command, json doc, const fs::path& base_dir,
                         std::optional<fs::path> out, std::optional<std::string> format, int threads) {
    require_object(doc, "config");
    reject_unknown(doc, kTopLevelKeys, "config");
    if (!doc.contains("schema_version") || !doc.at("schema_version").is_number_integer() ||
        doc.at("schema_version").get<int>() != kSchemaVersion)
        throw InputError("config needs \"schema_version\": " + std::to_string(kSchemaVersion));
    if (doc.contains("command") && get_string(doc, "command", "") != to_string(command))
        throw InputError("config is for command '" + get_string(doc, "command", "") +
                         "', invoked as '" + to_string(command) + "'");
    doc["command"] = to_string(command);

    const bool csv_default = command != Command::select && command != Command::greedy;
    std::string fmt = format ? *format : get_string(doc, "format", csv_default ? "csv" : "json");
    if (fmt != "json" && fmt != "csv") throw InputError("format must be 'json' or 'csv'");
    doc["format"] = fmt;
    doc["seed"] = get_u64(doc, "seed", 0);
    if (!doc.contains("family")) doc["family"] = {{"kind", "gaussian"}, {"sigma2", 1.0}};

    for (const char* block : {"design", "response"}) {
        if (!doc.contains(block)) continue;
        json& b = doc[block];
        require_object(b, block);
        if (b.contains("path")) {
            if (!b.at("path").is_string()) throw InputError(std::string(block) + ".path must be a string");
            fs::path p = b.at("path").get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            b["path"] = fs::absolute(p).lexically_normal().string();
        }
    }

    if (threads < 1) throw InputError("--threads must be >= 1");
    RunConfig cfg;
    cfg.command = command;
    cfg.doc = std::move(doc);
    cfg.out = std::move(out);
    cfg.format = fmt;
    cfg.threads = threads;
    return cfg;
}

RunConfig load_config(Command command, const fs::path& path, std::optional<fs::path> out,
                      std::optional<std::string> format, int threads) {
    if (out) {
        const auto same = [&](const fs::path& a) {
            return fs::weakly_canonical(fs::absolute(a)) == fs::weakly_canonical(fs::absolute(path));
        };
        if (same(*out) || same(sidecar_path(*out)))
            throw InputError("output '" + out->string() + "' would overwrite the config file");
    }
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": invalid JSON: " + e.what());
    }
    return resolve_config(command, std::move(doc), fs::absolute(path).parent_path(), std::move(out),
                          std::move(format), threads);
}

FamilySpec parse_family(const json& j) {
    require_object(j, "family");
    reject_unknown(j, {"kind", "sigma2", "c0", "theta_space"}, "family");
    FamilySpec spec;
    spec.kind = family_kind_from_string(get_string(j, "kind", ""));
    if (spec.kind == FamilyKind::custom)
        throw InputError("custom families are available through the library only");
    spec.options.sigma2 = get_double(j, "sigma2", 1.0);
    spec.options.c0 = get_double(j, "c0", 0.0);
    if (j.contains("theta_space")) {
        const json& t = j.at("theta_space");
        if (!t.is_array() || t.size() != 2) throw InputError("family.theta_space must be [lo, hi]");
        const double inf = std::numeric_limits<double>::infinity();
        spec.options.theta_space.lo = t[0].is_null() ? -inf : t[0].get<double>();
        spec.options.theta_space.hi = t[1].is_null() ? inf : t[1].get<double>();
    }
    spec.build();  // surfaces invalid options now
    return spec;
}

ModelFamily parse_structure(const json& j, int p) {
    if (j.is_null()) return ModelFamily::complete(p);
    require_object(j, "structure");
    reject_unknown(j, {"kind", "max_size", "groups", "parents", "models"}, "structure");
    const Structure kind = structure_from_string(get_string(j, "kind", "complete"));
    const int max_size = get_int(j, "max_size", -1);
    auto lists = [&](const char* key) {
        std::vector<std::vector<int>> out;
        if (!j.contains(key) || !j.at(key).is_array())
            throw InputError(std::string("structure.") + key + " must be an array of index arrays");
        for (const auto& g : j.at(key)) out.push_back(index_list(g, p, std::string("structure.") + key));
        return out;
    };
    switch (kind) {
        case Structure::complete: return ModelFamily::complete(p, max_size);
        case Structure::ordered: return ModelFamily::ordered(p, max_size);
        case Structure::grouped: return ModelFamily::grouped(p, lists("groups"), max_size);
        case Structure::hierarchical: {
            auto parents = lists("parents");
            if (static_cast<int>(parents.size()) != p)
                throw InputError("structure.parents needs one entry per predictor");
            return ModelFamily::hierarchical(p, std::move(parents), max_size);
        }
        case Structure::custom: {
            std::vector<ModelSpec> models;
            for (auto& m : lists("models")) {
                std::sort(m.begin(), m.end());
                models.emplace_back(std::move(m));
            }
            return ModelFamily::custom(p, std::move(models), max_size);
        }
    }
    throw InputError("unknown structure");
}

std::vector<double> parse_weights(const json& j, const PenaltyContext& ctx) {
    if (j.is_string()) {
        if (j.get<std::string>() != "ln_p") throw InputError("weights string must be \"ln_p\"");
        return constant_weights(std::log(static_cast<double>(ctx.p)), ctx.r);
    }
    if (j.is_number()) return constant_weights(j.get<double>(), ctx.r);
    if (j.is_array()) {
        auto w = j.get<std::vector<double>>();
        if (static_cast<int>(w.size()) != ctx.r)
            throw InputError("weights array needs exactly r = " + std::to_string(ctx.r) + " entries");
        return w;
    }
    if (j.is_object() && j.size() == 1) {
        if (j.contains("constant")) return constant_weights(j.at("constant").get<double>(), ctx.r);
        if (j.contains("klogpk")) return klogpk_weights(j.at("klogpk").get<double>(), ctx.p, ctx.r);
        if (j.contains("structural")) return structural_weights(j.at("structural").get<double>(), ctx);
    }
    throw InputError("weights must be \"ln_p\", a number, an array of r values, or "
                     "{\"constant\"|\"klogpk\"|\"structural\": value}");
}

PenaltyRule parse_penalty(const json& j, const NaturalFamily& fam, const PenaltyContext& ctx) {
    require_object(j, "penalty");
    reject_unknown(j, {"kind", "c", "gamma", "practical", "curvature_ratio", "weights", "A", "multiplier"},
                   "penalty");
    PenaltyRule rule;
    rule.kind = penalty_kind_from_string(get_string(j, "kind", ""));
    rule.practical = get_bool(j, "practical", false);
    rule.gamma = get_double(j, "gamma", kDefaultEbicGamma);
    if (rule.kind == PenaltyKind::linear && !j.contains("c"))
        throw InputError("linear penalty needs 'c'");
    rule.c = get_double(j, "c", kTheoryConstant);
    // Theory-mode constants are scaled by the family's U/L; practical-mode
    // constants act on the absolute scale.
    const bool uses_ratio = rule.kind == PenaltyKind::ric || rule.kind == PenaltyKind::klogpk ||
                            rule.kind == PenaltyKind::structural || rule.kind == PenaltyKind::custom;
    const double family_ratio = uses_ratio && !rule.practical ? curvature_bounds(fam).ratio() : 1.0;
    rule.curvature_ratio = get_double(j, "curvature_ratio", family_ratio);
    if (rule.kind == PenaltyKind::custom) {
        if (!j.contains("weights")) throw InputError("custom penalty needs 'weights'");
        rule.weights = parse_weights(j.at("weights"), ctx);
        rule.slack = get_double(j, "A", theory_slack(kTheoryConstant));
        rule.multiplier = get_double(j, "multiplier", 1.0);
    }
    rule.validate();
    return rule;
}

Output run_select(const RunConfig& cfg) {
    const json& doc = cfg.doc;
    const NaturalFamily fam = parse_family(doc.at("family")).build();
    const DesignMatrix X = require_design(doc);
    const std::optional<VectorXd> Y = load_response(doc, X.n());
    if (!Y) throw InputError("select needs a response: design.response_column or a 'response' block");
    const ModelFamily models = parse_structure(doc.value("structure", json(nullptr)), X.p());
    if (doc.contains("penalties")) throw InputError("select takes a single 'penalty'");
    const PenaltyRule rule = parse_rules(doc, fam, penalty_context(models, X)).front();

    SelectOptions so;
    so.fit = parse_fit(doc);
    so.threads = cfg.threads;
    if (doc.contains("select")) {
        const json& s = doc.at("select");
        require_object(s, "select");
        reject_unknown(s, {"guard", "prune", "keep_trace"}, "select");
        so.guard = get_u64(s, "guard", so.guard);
        so.prune = get_bool(s, "prune", so.prune);
        so.keep_trace = get_bool(s, "keep_trace", so.keep_trace);
    }
    const bool greedy = cfg.command == Command::greedy;
    const SelectionResult res = greedy ? greedy_select(fam, X, *Y, models, rule, so)
                                       : select_model(fam, X, *Y, models, rule, so);

    json report = {{"command", to_string(cfg.command)},
                   {"search", greedy ? "greedy" : "exhaustive"},
                   {"model_indices", one_based(res.model)},
                   {"beta", vector_json(res.fit.beta)},
                   {"objective", res.objective},
                   {"loglik", res.fit.loglik},
                   {"penalty_value", res.penalty},
                   {"converged", res.fit.converged},
                   {"boundary_active", res.fit.boundary_active},
                   {"models_evaluated", res.models_evaluated},
                   {"fit_failures", res.fit_failures},
                   {"sizes_pruned", res.sizes_pruned},
                   {"penalty", penalty_json(rule)},
                   {"family", family_json(fam)},
                   {"design", {{"n", X.n()}, {"p", X.p()}, {"r", X.rank()}}}};
    if (so.keep_trace) {
        json trace = json::array();
        for (const auto& t : res.trace)
            trace.push_back({{"model_indices", one_based(t.model)},
                             {"objective", finite_or_null(t.objective)},
                             {"failed", t.failed}});
        report["trace"] = trace;
    }
    std::string csv = csv_line({"index", "beta", "selected"});
    for (int j = 0; j < X.p(); ++j) {
        const bool in = std::binary_search(res.model.indices.begin(), res.model.indices.end(), j);
        csv += csv_line({std::to_string(j + 1), format_double(res.fit.beta[j]), in ? "true" : "false"});
    }
    return finish(cfg, report, csv);
}

Output run_risk_sim(const RunConfig& cfg) {
    const ExperimentSpec spec = build_experiment(cfg.doc);
    if (cfg.command == Command::rate_curve) {
        const RateCurve rc = rate_curve(spec, cfg.threads);
        std::string csv = csv_line({"rule", "p0", "mean_kl", "stderr", "rate_ratio", "sparse_ratio"});
        json rows = json::array();
        for (const auto& r : rc.rows) {
            csv += csv_line({r.rule, std::to_string(r.p0), format_double(r.mean_kl), format_double(r.stderr_kl),
                             format_double(r.rate_ratio), format_double(r.sparse_ratio)});
            rows.push_back({{"rule", r.rule}, {"p0", r.p0}, {"mean_kl", r.mean_kl}, {"stderr", r.stderr_kl},
                            {"rate_ratio", finite_or_null(r.rate_ratio)}, {"sparse_ratio", r.sparse_ratio}});
        }
        json report = risk_json(rc.report, "ok");
        report["command"] = to_string(cfg.command);
        report["tau_r"] = rc.tau_r;
        report["tau_exhaustive"] = rc.tau_exhaustive;
        report["rate_rows"] = rows;
        return finish(cfg, report, csv);
    }
    const RiskReport rep = mc_kl_risk(spec, cfg.threads);
    std::string csv = csv_line({"rule", "p0", "mean_kl", "stderr", "mean_model_size", "rate_ratio"});
    for (const auto& r : rep.rows)
        csv += csv_line({r.rule, std::to_string(r.p0), format_double(r.mean_kl), format_double(r.stderr_kl),
                         format_double(r.mean_model_size), format_double(r.rate_ratio)});
    json report = risk_json(rep, "ok");
    report["command"] = to_string(cfg.command);
    return finish(cfg, report, csv);
}

Output run_diagnostics(const RunConfig& cfg) {
    switch (cfg.command) {
        case Command::eigen: return eigen_report(cfg);
        case Command::penalty_table: return penalty_table(cfg);
        case Command::packing: return packing_report(cfg);
        default: throw InputError("'" + to_string(cfg.command) + "' is not a diagnostics command");
    }
}

fs::path sidecar_path(const fs::path& out) {
    fs::path p = out;
    p.replace_extension(".json");
    if (p == out) p = out.string() + ".json";
    return p;
}

int resolve_threads(std::optional<int> flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("GLMSELECT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<int>(v);
        throw InputError("GLMSELECT_THREADS must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        Output o;
        switch (cfg.command) {
            case Command::select:
            case Command::greedy: o = run_select(cfg); break;
            case Command::risk_sim:
            case Command::rate_curve: o = run_risk_sim(cfg); break;
            default: o = run_diagnostics(cfg);
        }
        if (cfg.out) {
            write_text_file(*cfg.out, o.primary);
            if (o.sidecar) write_text_file(sidecar_path(*cfg.out), *o.sidecar);
        } else {
            out << o.primary;
            if (o.sidecar) err << "note: JSON companion report skipped (no --out given)\n";
        }
        return kExitOk;
    } catch (const RiskSimFailure& e) {
        err << "error: " << e.what() << "\n";
        json report = risk_json(e.partial(), "failed");
        report["command"] = to_string(cfg.command);
        report["message"] = e.what();
        report["config"] = cfg.doc;
        for (const auto& r : e.partial().rows)
            err << "  " << r.rule << " p0=" << r.p0 << " failures=" << r.failures << "/" << r.replicates << "\n";
        if (cfg.out) {
            try {
                write_text_file(cfg.format == "json" ? *cfg.out : sidecar_path(*cfg.out), dump(report));
            } catch (const std::exception& w) {
                err << "error: " << w.what() << "\n";
            }
        }
        return kExitNumerical;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace glmselect::cli
