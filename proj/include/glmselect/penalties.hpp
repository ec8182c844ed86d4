#pragma once

#include <string>
#include <vector>

#include "glmselect/exp_family.hpp"

namespace glmselect {

enum class PenaltyKind {
    aic,         // k
    bic,         // (k/2) ln n
    ebic,        // (k/2) ln n + gamma k ln p
    ric,         // C (U/L) k ln p
    klogpk,      // C (U/L) k ln(pe/k), k < r;  C (U/L) r at k = r
    structural,  // C (U/L) max(ln m(k), k)
    custom,      // multiplier * 2 (U/L) k (A + 2 sqrt(2 L_k) + 4 L_k)
    linear,      // c k, c >= 0; c = 0 forces the likelihood-maximising model
};

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& name);

inline constexpr double kTheoryConstant = 17.0;
inline constexpr double kDefaultEbicGamma = 0.5;

struct PenaltyRule {
    PenaltyKind kind = PenaltyKind::aic;
    double gamma = kDefaultEbicGamma;  // EBIC
    double c = kTheoryConstant;        // RIC, KLOGPK, STRUCTURAL, LINEAR
    // Theory mode requires C > 16 for RIC/KLOGPK/STRUCTURAL; practical mode
    // accepts any C > 0 and carries no risk guarantee.
    bool practical = false;
    double curvature_ratio = 1.0;      // U/L
    std::vector<double> weights;       // CUSTOM: L_1..L_r (index k-1)
    double slack = 2.0;                // CUSTOM: A > 1
    double multiplier = 1.0;           // CUSTOM: >= 1

    // Throws InputError when parameters violate the rule's invariants.
    void validate() const;
    std::string label() const;
};

// Sizes are 1..r; log_counts[k] = ln m(k) (index 0 unused), -inf when no
// admissible model has size k. An empty log_counts means complete selection.
struct PenaltyContext {
    int p = 0;
    int r = 0;
    int n = 0;
    std::vector<double> log_counts;

    double log_count(int k) const;
    static PenaltyContext complete(int p, int r, int n);
};

PenaltyRule aic();
PenaltyRule bic();
PenaltyRule ebic(double gamma = kDefaultEbicGamma);
// Theory-mode rules take U/L from the family; practical-mode rules use the
// constant on the absolute scale (ratio 1), as in the logistic formulation.
PenaltyRule ric(double c, double curvature_ratio, bool practical = false);
PenaltyRule klogpk(double c, double curvature_ratio, bool practical = false);
PenaltyRule structural(double c, double curvature_ratio, bool practical = false);
PenaltyRule custom_rule(std::vector<double> weights, double slack,
                        double curvature_ratio, double multiplier = 1.0);
PenaltyRule linear(double c);

// Pen(k) for 1 <= k <= r. Pen(0) = 0 by convention (null model).
double pen_value(const PenaltyRule& rule, int k, const PenaltyContext& ctx);

// Slack pair for C > 16: A = C~ = sqrt(C / 16), so C >= 16 A C~.
double theory_slack(double c);

// Weight sequences (index k-1 holds L_k).
std::vector<double> constant_weights(double L, int r);
std::vector<double> klogpk_weights(double c_tilde, int p, int r);
std::vector<double> structural_weights(double c_tilde, const PenaltyContext& ctx);

struct WeightCertificate {
    double S = 0.0;
    bool penalty_ok = false;
    double A = 0.0;
    int first_violation = 0;  // smallest k where Pen(k) falls short, 0 if none
};

// S = sum_{k<r} m(k) e^{-k L_k} + e^{-r L_r} (m(k) = C(p,k) for complete
// selection), and a pointwise check of
//   Pen(k) >= 2 (U/L) k (A + 2 sqrt(2 L_k) + 4 L_k).
WeightCertificate weights_certificate(const std::vector<double>& L, double A,
                                      const PenaltyRule& rule, const PenaltyContext& ctx);

// Right-hand penalty the risk bound requires at size k.
double required_penalty(double L_k, double A, double curvature_ratio, int k);

// (16/3) (U/L) ((2A - 1)/(A - 1)) S; A may be +inf.
double risk_bound_constant(double A, double S, double curvature_ratio);

}  // namespace glmselect
