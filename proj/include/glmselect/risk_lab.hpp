#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glmselect/design.hpp"
#include "glmselect/errors.hpp"
#include "glmselect/exp_family.hpp"
#include "glmselect/penalties.hpp"
#include "glmselect/selector.hpp"

namespace glmselect {

// Draws Y_i independently from the family at theta_i; deterministic in seed.
VectorXd simulate_response(const NaturalFamily& fam, const VectorXd& theta, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiment description

enum class DesignKind { identity, orthogonalized_gaussian, custom };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string& name);

struct DesignSpec {
    DesignKind kind = DesignKind::identity;
    int n = 0;
    int p = 0;
    std::uint64_t seed = 0;
    // orthogonalized_gaussian: common column norm; <= 0 means sqrt(n).
    double column_norm = 0.0;
    MatrixXd matrix;  // custom
};

DesignMatrix generate_design(const DesignSpec& spec);

enum class SupportRule { first, random };
enum class MagnitudeRule {
    fixed,   // |beta_j| = amplitude
    minimax  // |beta_j| = amplitude * sqrt(a ln(pe/p0) / (U ||x_j||^2))
};

struct SignalSpec {
    SupportRule support = SupportRule::random;
    MagnitudeRule magnitude = MagnitudeRule::minimax;
    double amplitude = 1.0;
    bool random_signs = true;
};

struct FamilySpec {
    FamilyKind kind = FamilyKind::gaussian;
    FamilyOptions options;

    NaturalFamily build() const { return make_family(kind, options); }
};

struct ExperimentSpec {
    FamilySpec family;
    DesignSpec design;
    std::optional<VectorXd> beta_true;  // explicit truth; otherwise drawn per p0
    SignalSpec signal;
    std::vector<int> p0_grid;
    std::vector<PenaltyRule> rules;
    Structure structure = Structure::complete;
    std::vector<std::vector<int>> groups;
    std::vector<std::vector<int>> parents;
    std::vector<ModelSpec> custom_models;
    int max_size = -1;
    int replicates = 100;
    std::uint64_t seed = 0;
    bool prune = true;
    std::uint64_t guard = kDefaultSelectionGuard;
    double max_failure_rate = 0.05;

    ModelFamily model_family(int p) const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Risk estimates

struct RiskRow {
    std::string rule;
    int rule_index = 0;
    int p0 = 0;
    double mean_kl = 0.0;
    double stderr_kl = 0.0;
    double mean_model_size = 0.0;
    double rate_ratio = 0.0;  // mean_kl / min(p0 ln(pe/p0), r)
    int replicates = 0;
    int failures = 0;
};

struct GridPoint {
    int p0 = 0;
    VectorXd beta_true;
};

struct RiskReport {
    int n = 0;
    int p = 0;
    int r = 0;
    std::vector<GridPoint> grid;
    std::vector<RiskRow> rows;  // ordered by grid point, then rule

    const RiskRow& row(int rule_index, int p0) const;
};

// A run whose replicate failure rate exceeded the limit; carries what was
// computed so far.
class RiskSimFailure : public NumericalError {
public:
    RiskSimFailure(const std::string& what, RiskReport partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    const RiskReport& partial() const { return partial_; }

private:
    RiskReport partial_;
};

// min(p0 ln(pe/p0), r), with 0 at p0 = 0.
double minimax_rate(int p0, int p, int r);

// Coefficient vector for grid point `grid_index` (explicit truth or a seeded draw).
VectorXd resolve_signal(const ExperimentSpec& spec, const DesignMatrix& X, const NaturalFamily& fam,
                        std::size_t grid_index);

RiskReport mc_kl_risk(const ExperimentSpec& spec, int threads = 1);

struct RateRow {
    std::string rule;
    int p0 = 0;
    double mean_kl = 0.0;
    double stderr_kl = 0.0;
    double rate_ratio = 0.0;    // mean_kl / min(p0 ln(pe/p0), r)
    double sparse_ratio = 0.0;  // mean_kl / (p0 ln(pe/p0))
};

struct RateCurve {
    double tau_r = 0.0;
    bool tau_exhaustive = true;
    RiskReport report;
    std::vector<RateRow> rows;
};

RateCurve rate_curve(const ExperimentSpec& spec, int threads = 1);

// ---------------------------------------------------------------------------
// Risk-bound checks

struct OracleCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double stderr_kl = 0.0;
    double inf_term = 0.0;   // min over scanned M of KL(theta, theta_M) + Pen(|M|)
    double constant = 0.0;   // risk_bound_constant(A, S, U/L)
    ModelSpec argmin;
    std::size_t models_scanned = 0;
    bool holds = false;
};

// lhs = empirical mean KL of the run; rhs = (4/3) inf_term + constant.
// holds = lhs <= rhs + 3 stderr. Requires cert.penalty_ok.
OracleCheck oracle_inequality_check(const ExperimentSpec& spec, const RiskReport& report,
                                    int rule_index, const WeightCertificate& cert,
                                    std::uint64_t scan_budget = 10'000);

struct LowerBoundInput {
    int p0 = 1;
    int p = 1;
    int r = 1;
    double tau_2p0 = 1.0;
    double tau_p0 = 1.0;
    double curvature_ratio_inv = 1.0;  // L/U
    double c2 = 1.0;                   // unspecified absolute constant
    std::optional<double> log_m_p0;    // structural mode when set
};

double minimax_lower_bound(const LowerBoundInput& in);

// ---------------------------------------------------------------------------
// Packing sets

enum class PackingCase { sparse, dense_vg, two_point };

std::string to_string(PackingCase c);

struct PackingSet {
    PackingCase kind = PackingCase::sparse;
    int p0 = 0;
    int p = 0;
    std::vector<VectorXd> vectors;
    int target_distance = 0;
    int min_hamming = 0;  // certified by an exhaustive pair check
    double amplitude = 0.0;
    double achieved_c = 0.0;       // min_hamming / p0
    double log_card_ratio = 0.0;   // ln(card) / (p0 ln(pe/p0))

    std::size_t cardinality() const { return vectors.size(); }
};

int hamming_distance(const VectorXd& a, const VectorXd& b);
int certify_min_hamming(const std::vector<VectorXd>& vectors);

// Greedy binary code on the first p0 coordinates with distance >= ceil(p0/8).
// Needs p0 >= 8; smaller p0 use two_point_packing.
PackingSet vg_packing(int p0, int p, const NaturalFamily& fam, double phi_max_p0,
                      std::size_t max_vectors = 4096);

// {0, first p0 coordinates set to C}.
PackingSet two_point_packing(int p0, int p, const NaturalFamily& fam, double phi_max_p0);

// Randomised greedy packing of p0-sparse {0, C}-vectors with pairwise Hamming
// distance >= ceil(target_c * p0); the largest of `attempts` passes wins.
PackingSet sparse_packing(int p0, int p, const NaturalFamily& fam, double phi_max_2p0,
                          int attempts, std::uint64_t seed, double target_c = 1.0);

}  // namespace glmselect
