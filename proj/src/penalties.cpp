#include "glmselect/penalties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "glmselect/design.hpp"
#include "glmselect/errors.hpp"

namespace glmselect {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::string to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::aic: return "aic";
        case PenaltyKind::bic: return "bic";
        case PenaltyKind::ebic: return "ebic";
        case PenaltyKind::ric: return "ric";
        case PenaltyKind::klogpk: return "klogpk";
        case PenaltyKind::structural: return "structural";
        case PenaltyKind::custom: return "custom";
        case PenaltyKind::linear: return "linear";
    }
    return "custom";
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
    for (auto k : {PenaltyKind::aic, PenaltyKind::bic, PenaltyKind::ebic, PenaltyKind::ric,
                   PenaltyKind::klogpk, PenaltyKind::structural, PenaltyKind::custom,
                   PenaltyKind::linear})
        if (to_string(k) == name) return k;
    throw InputError("unknown penalty kind '" + name + "'");
}

void PenaltyRule::validate() const {
    if (!(curvature_ratio >= 1.0) || !std::isfinite(curvature_ratio))
        throw InputError("penalty curvature ratio U/L must be finite and >= 1");
    switch (kind) {
        case PenaltyKind::aic:
        case PenaltyKind::bic:
            break;
        case PenaltyKind::ebic:
            if (!(gamma >= 0.0 && gamma <= 1.0))
                throw InputError("EBIC gamma must lie in [0, 1]");
            break;
        case PenaltyKind::ric:
        case PenaltyKind::klogpk:
        case PenaltyKind::structural:
            if (!(c > 0.0) || !std::isfinite(c)) throw InputError("penalty constant C must be positive");
            if (!practical && !(c > 16.0))
                throw InputError("theory-mode penalties need C > 16; use practical mode otherwise");
            break;
        case PenaltyKind::custom:
            if (weights.empty()) throw InputError("custom penalty needs weights L_1..L_r");
            for (double w : weights)
                if (!(w > 0.0)) throw InputError("custom penalty weights must be positive");
            if (!(slack > 1.0)) throw InputError("custom penalty needs A > 1");
            if (!(multiplier >= 1.0)) throw InputError("custom penalty multiplier must be >= 1");
            break;
        case PenaltyKind::linear:
            if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("linear penalty needs c >= 0");
            break;
    }
}

std::string PenaltyRule::label() const {
    std::ostringstream os;
    os << to_string(kind);
    switch (kind) {
        case PenaltyKind::ebic: os << "(gamma=" << gamma << ")"; break;
        case PenaltyKind::ric:
        case PenaltyKind::klogpk:
        case PenaltyKind::structural:
            os << "(C=" << c << (practical ? ",practical" : "") << ")";
            break;
        case PenaltyKind::linear: os << "(c=" << c << ")"; break;
        case PenaltyKind::custom: os << "(A=" << slack << ")"; break;
        default: break;
    }
    return os.str();
}

double PenaltyContext::log_count(int k) const {
    if (k < 0 || k > p) return kNegInf;
    if (log_counts.empty()) return log_binomial(p, k);
    if (k >= static_cast<int>(log_counts.size())) return kNegInf;
    return log_counts[static_cast<std::size_t>(k)];
}

PenaltyContext PenaltyContext::complete(int p, int r, int n) {
    return {p, r, n, {}};
}

PenaltyRule aic() { return {.kind = PenaltyKind::aic}; }
PenaltyRule bic() { return {.kind = PenaltyKind::bic}; }
PenaltyRule ebic(double gamma) { return {.kind = PenaltyKind::ebic, .gamma = gamma}; }

PenaltyRule ric(double c, double ratio, bool practical) {
    return {.kind = PenaltyKind::ric, .c = c, .practical = practical, .curvature_ratio = ratio};
}

PenaltyRule klogpk(double c, double ratio, bool practical) {
    return {.kind = PenaltyKind::klogpk, .c = c, .practical = practical, .curvature_ratio = ratio};
}

PenaltyRule structural(double c, double ratio, bool practical) {
    return {.kind = PenaltyKind::structural, .c = c, .practical = practical,
            .curvature_ratio = ratio};
}

PenaltyRule custom_rule(std::vector<double> weights, double slack, double ratio,
                        double multiplier) {
    PenaltyRule r{.kind = PenaltyKind::custom, .curvature_ratio = ratio};
    r.weights = std::move(weights);
    r.slack = slack;
    r.multiplier = multiplier;
    return r;
}

PenaltyRule linear(double c) { return {.kind = PenaltyKind::linear, .c = c}; }

double required_penalty(double L_k, double A, double ratio, int k) {
    return 2.0 * ratio * k * (A + 2.0 * std::sqrt(2.0 * L_k) + 4.0 * L_k);
}

double pen_value(const PenaltyRule& rule, int k, const PenaltyContext& ctx) {
    if (k == 0) return 0.0;
    if (k < 0 || k > ctx.r) throw InputError("pen_value: k must lie in [1, r]");
    const double kd = k;
    const double scale = rule.c * rule.curvature_ratio;
    switch (rule.kind) {
        case PenaltyKind::aic: return kd;
        case PenaltyKind::bic: return 0.5 * kd * std::log(static_cast<double>(ctx.n));
        case PenaltyKind::ebic:
            return 0.5 * kd * std::log(static_cast<double>(ctx.n)) +
                   rule.gamma * kd * std::log(static_cast<double>(ctx.p));
        case PenaltyKind::ric: return scale * kd * std::log(static_cast<double>(ctx.p));
        case PenaltyKind::klogpk:
            if (k == ctx.r) return scale * ctx.r;
            return scale * kd * std::log(ctx.p * std::numbers::e / kd);
        case PenaltyKind::structural: {
            const double lm = ctx.log_count(k);
            if (lm == kNegInf) throw InputError("pen_value: no admissible model of size " + std::to_string(k));
            return scale * std::max(lm, kd);
        }
        case PenaltyKind::custom: {
            if (k > static_cast<int>(rule.weights.size()))
                throw InputError("pen_value: custom weights do not cover size " + std::to_string(k));
            return rule.multiplier *
                   required_penalty(rule.weights[static_cast<std::size_t>(k - 1)], rule.slack,
                                    rule.curvature_ratio, k);
        }
        case PenaltyKind::linear: return rule.c * kd;
    }
    return 0.0;
}

double theory_slack(double c) {
    if (!(c > 16.0)) throw InputError("theory slack needs C > 16");
    return std::sqrt(c / 16.0);
}

std::vector<double> constant_weights(double L, int r) {
    return std::vector<double>(static_cast<std::size_t>(r), L);
}

std::vector<double> klogpk_weights(double c_tilde, int p, int r) {
    std::vector<double> L(static_cast<std::size_t>(r));
    for (int k = 1; k < r; ++k)
        L[static_cast<std::size_t>(k - 1)] = c_tilde * std::log(p * std::numbers::e / k);
    L[static_cast<std::size_t>(r - 1)] = c_tilde;
    return L;
}

std::vector<double> structural_weights(double c_tilde, const PenaltyContext& ctx) {
    std::vector<double> L(static_cast<std::size_t>(ctx.r));
    for (int k = 1; k <= ctx.r; ++k) {
        const double lm = std::max(ctx.log_count(k), 0.0);
        L[static_cast<std::size_t>(k - 1)] = c_tilde * std::max(lm, static_cast<double>(k)) / k;
    }
    return L;
}

WeightCertificate weights_certificate(const std::vector<double>& L, double A,
                                      const PenaltyRule& rule, const PenaltyContext& ctx) {
    const int r = ctx.r;
    if (r < 1) throw InputError("weights_certificate: r must be >= 1");
    if (static_cast<int>(L.size()) != r)
        throw InputError("weights_certificate: need exactly r weights");
    for (double w : L)
        if (!(w > 0.0)) throw InputError("weights_certificate: weights must be positive");
    if (!(A > 1.0)) throw InputError("weights_certificate: A must exceed 1");

    WeightCertificate cert;
    cert.A = A;
    // Terms summed in log space so C(p, k) never overflows.
    double S = 0.0;
    for (int k = 1; k < r; ++k) {
        const double lm = ctx.log_count(k);
        if (lm == kNegInf) continue;
        S += std::exp(lm - k * L[static_cast<std::size_t>(k - 1)]);
    }
    S += std::exp(-r * L[static_cast<std::size_t>(r - 1)]);
    cert.S = S;

    cert.penalty_ok = true;
    for (int k = 1; k <= r; ++k) {
        if (ctx.log_count(k) == kNegInf && k < r) continue;
        const double need = required_penalty(L[static_cast<std::size_t>(k - 1)], A,
                                              rule.curvature_ratio, k);
        if (pen_value(rule, k, ctx) < need) {
            cert.penalty_ok = false;
            cert.first_violation = k;
            break;
        }
    }
    return cert;
}

double risk_bound_constant(double A, double S, double ratio) {
    if (!(A > 1.0)) throw InputError("risk_bound_constant: A must exceed 1");
    if (!(S >= 0.0)) throw InputError("risk_bound_constant: S must be nonnegative");
    const double factor = std::isinf(A) ? 2.0 : (2.0 * A - 1.0) / (A - 1.0);
    return 16.0 / 3.0 * ratio * factor * S;
}

}  // namespace glmselect
