#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glmselect {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr std::uint64_t kDefaultSubsetBudget = 1'000'000;

// Number of singular values above tol. The default cutoff is
// max(n, p) * eps * sigma_max(X).
int rank_of(const MatrixXd& X, std::optional<double> tol = std::nullopt);

// Deterministic n x p design. Rank is computed once at construction; zero
// columns are rejected.
class DesignMatrix {
public:
    explicit DesignMatrix(MatrixXd X, std::optional<double> rank_tol = std::nullopt);

    const MatrixXd& X() const { return X_; }
    const MatrixXd& gram() const { return gram_; }
    int n() const { return static_cast<int>(X_.rows()); }
    int p() const { return static_cast<int>(X_.cols()); }
    int rank() const { return rank_; }
    double rank_tol() const { return rank_tol_; }

    // X restricted to the given (0-based) columns.
    MatrixXd columns(const std::vector<int>& idx) const;

private:
    MatrixXd X_;
    MatrixXd gram_;
    int rank_ = 0;
    double rank_tol_ = 0.0;
};

struct SparseSpectrum {
    int k = 0;
    double phi_min = 0.0;
    double phi_max = 0.0;
    double tau = 0.0;
    bool exhaustive = true;
    std::uint64_t subsets_examined = 0;
};

struct SpectrumOptions {
    std::uint64_t budget = kDefaultSubsetBudget;
    std::uint64_t seed = 0;  // drives sampling when C(p, k) > budget
    int threads = 1;
};

// Extreme eigenvalues over all k x k principal submatrices of X^t X.
// Exhaustive when C(p, k) <= budget; otherwise `budget` uniformly sampled
// subsets, in which case phi_min is an over- and phi_max an under-estimate.
SparseSpectrum sparse_spectrum(const DesignMatrix& X, int k,
                               const SpectrumOptions& opts = {});

struct CollinearityVerdict {
    double tau_r = 0.0;
    bool weakly_collinear = false;
    bool exhaustive = true;
};

CollinearityVerdict weak_collinearity(const DesignMatrix& X, double c,
                                      const SpectrumOptions& opts = {});

// Probabilistic check that random r-column subsets are linearly independent.
// Never throws on a violation; callers surface it as a warning.
struct IndependenceCheck {
    std::uint64_t subsets_checked = 0;
    std::uint64_t dependent_subsets = 0;
    bool exhaustive = false;
};

IndependenceCheck check_column_independence(const DesignMatrix& X,
                                            const SpectrumOptions& opts = {});

// Smallest/largest eigenvalue of a symmetric matrix, with eigenvalues below
// a relative round-off floor snapped to zero.
std::pair<double, double> extreme_eigenvalues(const MatrixXd& sym);

// log C(p, k); -inf when k is out of [0, p].
double log_binomial(int p, int k);

// C(p, k) saturating at UINT64_MAX.
std::uint64_t binomial(int p, int k);

}  // namespace glmselect
