#include "glmselect/risk_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "glmselect/parallel.hpp"
#include "glmselect/random.hpp"

namespace glmselect {

namespace {

// Stream tags for counter-derived seeds.
constexpr std::uint64_t kSignalStream = 0x5167'0000;
constexpr std::uint64_t kResponseStream = 0x7e50'0000;
constexpr std::uint64_t kPackingStream = 0xbac4'0000;

constexpr std::size_t kSparseCandidateLimit = 200'000;
constexpr std::uint64_t kVgScanLimit = std::uint64_t{1} << 24;

// Compensated summation; callers feed terms in a fixed order.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

double curvature_upper(const NaturalFamily& fam) { return curvature_bounds(fam).upper; }

std::vector<VectorXd> to_vectors(const std::vector<std::vector<int>>& supports, int p, double amp) {
    std::vector<VectorXd> out;
    out.reserve(supports.size());
    for (const auto& s : supports) {
        VectorXd v = VectorXd::Zero(p);
        for (int j : s) v[j] = amp;
        out.push_back(std::move(v));
    }
    return out;
}

int overlap(const std::vector<int>& a, const std::vector<int>& b) {
    int c = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else { ++c; ++i; ++j; }
    }
    return c;
}

}  // namespace

VectorXd simulate_response(const NaturalFamily& fam, const VectorXd& theta, std::uint64_t seed) {
    require_in_theta(fam, theta, "simulate_response");
    Engine rng(seed);
    VectorXd y(theta.size());
    switch (fam.kind()) {
        case FamilyKind::gaussian: {
            std::normal_distribution<double> noise(0.0, std::sqrt(fam.a()));
            for (Eigen::Index i = 0; i < theta.size(); ++i) y[i] = theta[i] + noise(rng);
            break;
        }
        case FamilyKind::bernoulli: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Eigen::Index i = 0; i < theta.size(); ++i) y[i] = u(rng) < fam.b1(theta[i]) ? 1.0 : 0.0;
            break;
        }
        case FamilyKind::poisson:
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                std::poisson_distribution<long> draw(std::exp(theta[i]));
                y[i] = static_cast<double>(draw(rng));
            }
            break;
        case FamilyKind::custom:
            throw InputError("simulate_response: no sampler for custom families");
    }
    return y;
}

std::string to_string(DesignKind kind) {
    switch (kind) {
        case DesignKind::identity: return "identity";
        case DesignKind::orthogonalized_gaussian: return "orthogonalized-gaussian";
        case DesignKind::custom: return "custom";
    }
    return "custom";
}

DesignKind design_kind_from_string(const std::string& name) {
    for (auto k : {DesignKind::identity, DesignKind::orthogonalized_gaussian, DesignKind::custom})
        if (to_string(k) == name) return k;
    throw InputError("unknown design kind '" + name + "'");
}

DesignMatrix generate_design(const DesignSpec& spec) {
    switch (spec.kind) {
        case DesignKind::identity:
            if (spec.n < spec.p || spec.p < 1) throw InputError("identity design needs n >= p >= 1");
            return DesignMatrix(MatrixXd::Identity(spec.n, spec.p));
        case DesignKind::orthogonalized_gaussian: {
            if (spec.n < spec.p || spec.p < 1)
                throw InputError("orthogonalized design needs n >= p >= 1");
            Engine rng(derive_seed(spec.seed, 0xd5, 0));
            std::normal_distribution<double> z(0.0, 1.0);
            MatrixXd G(spec.n, spec.p);
            for (int i = 0; i < spec.n; ++i)
                for (int j = 0; j < spec.p; ++j) G(i, j) = z(rng);
            Eigen::HouseholderQR<MatrixXd> qr(G);
            const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(spec.n, spec.p);
            const double norm = spec.column_norm > 0.0 ? spec.column_norm : std::sqrt(spec.n);
            return DesignMatrix(Q * norm);
        }
        case DesignKind::custom:
            if (spec.matrix.size() == 0) throw InputError("custom design needs a matrix");
            return DesignMatrix(spec.matrix);
    }
    throw InputError("unknown design kind");
}

ModelFamily ExperimentSpec::model_family(int p) const {
    switch (structure) {
        case Structure::complete: return ModelFamily::complete(p, max_size);
        case Structure::ordered: return ModelFamily::ordered(p, max_size);
        case Structure::grouped: return ModelFamily::grouped(p, groups, max_size);
        case Structure::hierarchical: return ModelFamily::hierarchical(p, parents, max_size);
        case Structure::custom: return ModelFamily::custom(p, custom_models, max_size);
    }
    throw InputError("unknown model structure");
}

void ExperimentSpec::validate() const {
    if (replicates < 1) throw InputError("experiment needs at least one replicate");
    if (rules.empty()) throw InputError("experiment needs at least one penalty rule");
    for (const auto& r : rules) r.validate();
    if (!beta_true && p0_grid.empty())
        throw InputError("experiment needs beta_true or a p0 grid");
    for (int p0 : p0_grid)
        if (p0 < 0) throw InputError("p0 must be nonnegative");
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0))
        throw InputError("max_failure_rate must lie in [0, 1]");
}

const RiskRow& RiskReport::row(int rule_index, int p0) const {
    for (const auto& r : rows)
        if (r.rule_index == rule_index && r.p0 == p0) return r;
    throw InputError("risk report has no row for the requested rule and p0");
}

double minimax_rate(int p0, int p, int r) {
    if (p0 <= 0) return 0.0;
    return std::min(p0 * std::log(p * std::numbers::e / p0), static_cast<double>(r));
}

VectorXd resolve_signal(const ExperimentSpec& spec, const DesignMatrix& X, const NaturalFamily& fam,
                        std::size_t grid_index) {
    const int p = X.p();
    if (spec.beta_true) {
        if (spec.beta_true->size() != p) throw InputError("beta_true length does not match p");
        return *spec.beta_true;
    }
    const int p0 = spec.p0_grid.at(grid_index);
    if (p0 > p) throw InputError("p0 exceeds the number of predictors");
    VectorXd beta = VectorXd::Zero(p);
    if (p0 == 0) return beta;

    Engine rng = make_engine(spec.seed, kSignalStream, grid_index);
    std::vector<int> support(static_cast<std::size_t>(p0));
    if (spec.signal.support == SupportRule::first) std::iota(support.begin(), support.end(), 0);
    else support = random_subset(p, p0, rng);

    const double U = curvature_upper(fam);
    std::bernoulli_distribution coin(0.5);
    for (int j : support) {
        double mag = spec.signal.amplitude;
        if (spec.signal.magnitude == MagnitudeRule::minimax)
            mag *= std::sqrt(fam.a() * std::log(p * std::numbers::e / p0) /
                             (U * X.X().col(j).squaredNorm()));
        const double sign = spec.signal.random_signs && coin(rng) ? -1.0 : 1.0;
        beta[j] = sign * mag;
    }
    return beta;
}

RiskReport mc_kl_risk(const ExperimentSpec& spec, int threads) {
    spec.validate();
    const NaturalFamily fam = spec.family.build();
    const DesignMatrix X = generate_design(spec.design);
    const ModelFamily models = spec.model_family(X.p());
    const std::size_t n_grid = spec.beta_true ? 1 : spec.p0_grid.size();
    const std::size_t n_rules = spec.rules.size();
    const auto R = static_cast<std::size_t>(spec.replicates);

    SelectOptions so;
    so.guard = spec.guard;
    so.prune = spec.prune;
    so.threads = 1;

    RiskReport report;
    report.n = X.n();
    report.p = X.p();
    report.r = X.rank();

    bool failed_run = false;
    std::string failure_msg;
    for (std::size_t g = 0; g < n_grid; ++g) {
        const VectorXd beta = resolve_signal(spec, X, fam, g);
        const VectorXd theta = X.X() * beta;
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            if (!fam.theta_space().contains(theta[i]))
                throw InputError("true signal leaves the parameter space (X beta not in Theta)");
        const int p0 = static_cast<int>((beta.array() != 0.0).count());
        report.grid.push_back({p0, beta});

        // kl[r * n_rules + rule], NaN marks a failed replicate
        std::vector<double> kl(R * n_rules, 0.0);
        std::vector<int> sizes(R * n_rules, 0);
        parallel_for(R, threads, [&](std::size_t rep) {
            const VectorXd Y =
                simulate_response(fam, theta, derive_seed(spec.seed, kResponseStream + g, rep));
            for (std::size_t k = 0; k < n_rules; ++k) {
                double& slot = kl[rep * n_rules + k];
                try {
                    const SelectionResult sel = select_model(fam, X, Y, models, spec.rules[k], so);
                    slot = kl_divergence(fam, theta, sel.fit.theta_hat);
                    sizes[rep * n_rules + k] = sel.model.size();
                } catch (const NumericalError&) {
                    slot = std::numeric_limits<double>::quiet_NaN();
                }
            }
        });

        for (std::size_t k = 0; k < n_rules; ++k) {
            KahanSum sum, size_sum;
            int ok = 0;
            for (std::size_t rep = 0; rep < R; ++rep) {
                const double v = kl[rep * n_rules + k];
                if (std::isnan(v)) continue;
                sum.add(v);
                size_sum.add(sizes[rep * n_rules + k]);
                ++ok;
            }
            RiskRow row;
            row.rule = spec.rules[k].label();
            row.rule_index = static_cast<int>(k);
            row.p0 = p0;
            row.replicates = static_cast<int>(R);
            row.failures = static_cast<int>(R) - ok;
            if (ok > 0) {
                row.mean_kl = sum.sum / ok;
                row.mean_model_size = size_sum.sum / ok;
                KahanSum sq;
                for (std::size_t rep = 0; rep < R; ++rep) {
                    const double v = kl[rep * n_rules + k];
                    if (!std::isnan(v)) sq.add((v - row.mean_kl) * (v - row.mean_kl));
                }
                row.stderr_kl = ok > 1 ? std::sqrt(sq.sum / (ok - 1) / ok) : 0.0;
            }
            const double rate = minimax_rate(p0, X.p(), X.rank());
            row.rate_ratio = rate > 0.0 ? row.mean_kl / rate
                                        : (row.mean_kl == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            if (row.failures > spec.max_failure_rate * static_cast<double>(R)) {
                failed_run = true;
                failure_msg = "replicate failure rate " + std::to_string(row.failures) + "/" +
                              std::to_string(R) + " for rule " + row.rule + " at p0=" +
                              std::to_string(p0) + " exceeds the limit";
            }
            report.rows.push_back(row);
        }
        if (failed_run) throw RiskSimFailure(failure_msg, report);
    }
    return report;
}

RateCurve rate_curve(const ExperimentSpec& spec, int threads) {
    RateCurve out;
    const DesignMatrix X = generate_design(spec.design);
    const CollinearityVerdict v = weak_collinearity(X, 1e-300, {.threads = threads});
    out.tau_r = v.tau_r;
    out.tau_exhaustive = v.exhaustive;
    out.report = mc_kl_risk(spec, threads);
    for (const auto& row : out.report.rows) {
        RateRow rr;
        rr.rule = row.rule;
        rr.p0 = row.p0;
        rr.mean_kl = row.mean_kl;
        rr.stderr_kl = row.stderr_kl;
        rr.rate_ratio = row.rate_ratio;
        const double sparse = row.p0 > 0 ? row.p0 * std::log(X.p() * std::numbers::e / row.p0) : 0.0;
        rr.sparse_ratio = sparse > 0.0 ? row.mean_kl / sparse : 0.0;
        out.rows.push_back(rr);
    }
    return out;
}

OracleCheck oracle_inequality_check(const ExperimentSpec& spec, const RiskReport& report,
                                    int rule_index, const WeightCertificate& cert,
                                    std::uint64_t scan_budget) {
    if (!cert.penalty_ok)
        throw InputError("oracle inequality check needs a certified penalty (penalty_ok = false)");
    if (rule_index < 0 || rule_index >= static_cast<int>(spec.rules.size()))
        throw InputError("rule index out of range");
    if (report.grid.empty()) throw InputError("risk report has no grid points");

    const NaturalFamily fam = spec.family.build();
    const DesignMatrix X = generate_design(spec.design);
    const ModelFamily models = spec.model_family(X.p());
    const PenaltyContext ctx = penalty_context(models, X);
    const PenaltyRule& rule = spec.rules[static_cast<std::size_t>(rule_index)];
    const GridPoint& gp = report.grid.front();
    const VectorXd theta = X.X() * gp.beta_true;
    const int kmax = std::min(models.size_cap(), X.rank());

    std::uint64_t total = 0;
    for (int k = 0; k <= kmax; ++k) total += admissible_count(models, k);

    std::vector<ModelSpec> scan;
    if (total <= scan_budget) {
        for (int k = 0; k <= kmax; ++k)
            for (auto& m : enumerate_admissible(models, k)) scan.push_back(std::move(m));
    } else {
        // Nested path along the true support (largest coefficients first) plus
        // a column-space basis; every scanned model only loosens the bound.
        std::vector<int> support;
        for (int j = 0; j < X.p(); ++j)
            if (gp.beta_true[j] != 0.0) support.push_back(j);
        std::stable_sort(support.begin(), support.end(), [&](int a, int b) {
            return std::abs(gp.beta_true[a]) > std::abs(gp.beta_true[b]);
        });
        scan.emplace_back();
        std::vector<int> prefix;
        for (int j : support) {
            prefix.push_back(j);
            std::vector<int> sorted = prefix;
            std::sort(sorted.begin(), sorted.end());
            scan.emplace_back(sorted);
        }
        Eigen::ColPivHouseholderQR<MatrixXd> qr(X.X());
        std::vector<int> basis;
        for (int j = 0; j < X.rank(); ++j) basis.push_back(static_cast<int>(qr.colsPermutation().indices()[j]));
        std::sort(basis.begin(), basis.end());
        scan.emplace_back(basis);
    }

    OracleCheck out;
    out.inf_term = std::numeric_limits<double>::infinity();
    for (const auto& M : scan) {
        if (M.size() > kmax || !models.admits(M)) continue;
        FitResult proj;
        try {
            proj = kl_projection(fam, X, theta, M);
        } catch (const NumericalError&) {
            continue;
        }
        ++out.models_scanned;
        const double value = kl_divergence(fam, theta, proj.theta_hat) + pen_value(rule, M.size(), ctx);
        if (value < out.inf_term) {
            out.inf_term = value;
            out.argmin = M;
        }
    }
    if (out.models_scanned == 0) throw NumericalError("oracle check: no model could be projected");

    const RiskRow& row = report.row(rule_index, gp.p0);
    out.lhs = row.mean_kl;
    out.stderr_kl = row.stderr_kl;
    out.constant = risk_bound_constant(cert.A, cert.S, rule.curvature_ratio);
    out.rhs = 4.0 / 3.0 * out.inf_term + out.constant;
    out.holds = out.lhs <= out.rhs + 3.0 * out.stderr_kl;
    return out;
}

double minimax_lower_bound(const LowerBoundInput& in) {
    if (in.p0 < 1 || in.p0 > in.r) throw InputError("lower bound needs 1 <= p0 <= r");
    if (in.r > in.p) throw InputError("lower bound needs r <= p");
    if (!(in.c2 > 0.0)) throw InputError("lower bound constant C2 must be positive");
    if (!(in.curvature_ratio_inv > 0.0 && in.curvature_ratio_inv <= 1.0))
        throw InputError("L/U must lie in (0, 1]");
    for (double t : {in.tau_2p0, in.tau_p0})
        if (!(t >= 0.0 && t <= 1.0)) throw InputError("tau values must lie in [0, 1]");

    const double scale = in.c2 * in.curvature_ratio_inv;
    const bool sparse_branch = 2 * in.p0 <= in.r;
    if (!sparse_branch) return scale * in.tau_p0 * in.r;
    if (!in.log_m_p0)
        return scale * in.tau_2p0 * in.p0 * std::log(in.p * std::numbers::e / in.p0);
    // Structural form; at p0 = 1 the ln m / ln p0 term is undefined and dropped.
    const double dense_term = in.tau_p0 * in.p0;
    if (in.p0 == 1) return scale * dense_term;
    return scale * std::max(in.tau_2p0 * *in.log_m_p0 / std::log(static_cast<double>(in.p0)),
                            dense_term);
}

std::string to_string(PackingCase c) {
    switch (c) {
        case PackingCase::sparse: return "sparse";
        case PackingCase::dense_vg: return "dense-vg";
        case PackingCase::two_point: return "two-point";
    }
    return "sparse";
}

int hamming_distance(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size()) throw InputError("hamming_distance: length mismatch");
    return static_cast<int>((a.array() != b.array()).count());
}

int certify_min_hamming(const std::vector<VectorXd>& vectors) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < vectors.size(); ++i)
        for (std::size_t j = i + 1; j < vectors.size(); ++j)
            best = std::min(best, hamming_distance(vectors[i], vectors[j]));
    return vectors.size() < 2 ? 0 : best;
}

PackingSet vg_packing(int p0, int p, const NaturalFamily& fam, double phi_max_p0,
                      std::size_t max_vectors) {
    if (p0 < 8) throw InputError("vg_packing needs p0 >= 8; use two_point_packing for smaller p0");
    if (p0 > 62) throw InputError("vg_packing supports p0 <= 62");
    if (p0 > p) throw InputError("vg_packing needs p0 <= p");
    if (!(phi_max_p0 > 0.0)) throw InputError("phi_max must be positive");
    if (max_vectors < 2) throw InputError("max_vectors must be >= 2");

    const int d = (p0 + 7) / 8;
    std::vector<std::uint64_t> code;
    const std::uint64_t end = std::uint64_t{1} << p0;
    const std::uint64_t limit = std::min(end, kVgScanLimit);
    for (std::uint64_t v = 0; v < limit && code.size() < max_vectors; ++v) {
        bool ok = true;
        for (std::uint64_t c : code)
            if (std::popcount(v ^ c) < d) { ok = false; break; }
        if (ok) code.push_back(v);
    }

    PackingSet out;
    out.kind = PackingCase::dense_vg;
    out.p0 = p0;
    out.p = p;
    out.target_distance = d;
    out.amplitude = std::sqrt(std::numbers::ln2 / 64.0 * fam.a() / curvature_upper(fam) / phi_max_p0);
    for (std::uint64_t c : code) {
        VectorXd v = VectorXd::Zero(p);
        for (int j = 0; j < p0; ++j)
            if ((c >> j) & 1U) v[j] = out.amplitude;
        out.vectors.push_back(std::move(v));
    }
    out.min_hamming = certify_min_hamming(out.vectors);
    out.achieved_c = static_cast<double>(out.min_hamming) / p0;
    out.log_card_ratio = std::log(static_cast<double>(out.cardinality())) /
                         (p0 * std::log(p * std::numbers::e / p0));
    return out;
}

PackingSet two_point_packing(int p0, int p, const NaturalFamily& fam, double phi_max_p0) {
    if (p0 < 1 || p0 > p) throw InputError("two_point_packing needs 1 <= p0 <= p");
    if (!(phi_max_p0 > 0.0)) throw InputError("phi_max must be positive");
    PackingSet out;
    out.kind = PackingCase::two_point;
    out.p0 = p0;
    out.p = p;
    out.target_distance = p0;
    out.amplitude = std::sqrt(std::numbers::ln2 / 64.0 * fam.a() / curvature_upper(fam) / phi_max_p0);
    VectorXd v = VectorXd::Zero(p);
    v.head(p0).setConstant(out.amplitude);
    out.vectors = {VectorXd::Zero(p), v};
    out.min_hamming = certify_min_hamming(out.vectors);
    out.achieved_c = static_cast<double>(out.min_hamming) / p0;
    out.log_card_ratio = std::log(2.0) / (p0 * std::log(p * std::numbers::e / p0));
    return out;
}

PackingSet sparse_packing(int p0, int p, const NaturalFamily& fam, double phi_max_2p0,
                          int attempts, std::uint64_t seed, double target_c) {
    if (p0 < 1 || p0 > p) throw InputError("sparse_packing needs 1 <= p0 <= p");
    if (attempts < 1) throw InputError("sparse_packing needs attempts >= 1");
    if (!(phi_max_2p0 > 0.0)) throw InputError("phi_max must be positive");
    if (!(target_c > 0.0 && target_c <= 2.0)) throw InputError("target c must lie in (0, 2]");

    const int d = static_cast<int>(std::ceil(target_c * p0 - 1e-12));
    std::vector<std::vector<int>> candidates;
    const std::uint64_t total = binomial(p, p0);
    if (total <= kSparseCandidateLimit) {
        std::vector<int> c(static_cast<std::size_t>(p0));
        std::iota(c.begin(), c.end(), 0);
        do candidates.push_back(c);
        while (next_combination(c, p));
    }

    std::vector<std::vector<int>> best;
    for (int a = 0; a < attempts; ++a) {
        Engine rng = make_engine(seed, kPackingStream, static_cast<std::uint64_t>(a));
        std::vector<std::vector<int>> order;
        if (!candidates.empty()) {
            order = candidates;
            std::shuffle(order.begin(), order.end(), rng);
        } else {
            order.reserve(kSparseCandidateLimit);
            for (std::size_t i = 0; i < kSparseCandidateLimit; ++i) order.push_back(random_subset(p, p0, rng));
        }
        std::vector<std::vector<int>> kept;
        for (auto& cand : order) {
            bool ok = true;
            for (const auto& k : kept)
                if (2 * (p0 - overlap(cand, k)) < d) { ok = false; break; }
            if (ok) kept.push_back(std::move(cand));
        }
        if (kept.size() > best.size()) best = std::move(kept);
    }
    if (best.size() < 2)
        throw NumericalError("sparse_packing: degenerate parameters, fewer than two vectors fit");
    std::sort(best.begin(), best.end());

    PackingSet out;
    out.kind = PackingCase::sparse;
    out.p0 = p0;
    out.p = p;
    out.target_distance = d;
    const double log_term = std::log(p * std::numbers::e / p0);
    out.amplitude = std::sqrt(target_c / 16.0 * fam.a() / curvature_upper(fam) / phi_max_2p0 * log_term);
    out.vectors = to_vectors(best, p, out.amplitude);
    out.min_hamming = certify_min_hamming(out.vectors);
    out.achieved_c = static_cast<double>(out.min_hamming) / p0;
    out.log_card_ratio = std::log(static_cast<double>(out.cardinality())) / (p0 * log_term);
    return out;
}

}  // namespace glmselect
