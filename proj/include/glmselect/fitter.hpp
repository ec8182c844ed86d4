#pragma once

#include <vector>

#include <Eigen/Dense>

#include "glmselect/design.hpp"
#include "glmselect/exp_family.hpp"

namespace glmselect {

// Candidate model: sorted, unique, 0-based predictor indices.
struct ModelSpec {
    std::vector<int> indices;

    ModelSpec() = default;
    explicit ModelSpec(std::vector<int> idx);

    int size() const { return static_cast<int>(indices.size()); }
    bool empty() const { return indices.empty(); }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
    friend auto operator<=>(const ModelSpec&, const ModelSpec&) = default;
};

struct FitOptions {
    double tol_obj = 1e-10;   // relative change in the objective
    double tol_grad = 1e-8;   // norm of the (projected) score
    int max_iter = 100;
    int max_halvings = 50;
    double margin = 1e-8;     // interior margin, relative to the width of Theta
    bool keep_trace = false;  // record the objective after every iteration
};

struct FitResult {
    VectorXd beta;       // length p, zero outside the model
    VectorXd theta_hat;  // X * beta
    double loglik = 0.0; // Y^t theta - b(theta)^t 1
    int iterations = 0;
    bool converged = false;
    bool boundary_active = false;
    std::vector<double> objective_trace;
};

// Theta shrunk by the interior margin; feasibility for the fitter means
// every fitted natural parameter lies in this interval.
Interval feasible_box(const NaturalFamily& fam, double margin = FitOptions{}.margin);

// Constrained MLE over {beta : supp(beta) in M, X beta in Theta}. Damped
// Newton (IRLS) steps; constraints that become active are kept in a working
// set so boundary optima are reached exactly.
FitResult fit_mle(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                  const ModelSpec& M, const FitOptions& opts = {});

// Same optimisation with the response replaced by the mean b'(theta). The
// population log-likelihood shares its maximiser with KL(theta, X beta), so
// this returns the KL projection of theta onto the model's feasible set.
FitResult kl_projection(const NaturalFamily& fam, const DesignMatrix& X,
                        const VectorXd& theta, const ModelSpec& M,
                        const FitOptions& opts = {});

// Y^t (X beta) - sum_i b((X beta)_i). Throws when X beta leaves Theta.
double log_likelihood(const NaturalFamily& fam, const MatrixXd& X, const VectorXd& Y,
                      const VectorXd& beta);

// Validates a response vector against the family's support.
void validate_response(const NaturalFamily& fam, const VectorXd& Y, int n);

}  // namespace glmselect
