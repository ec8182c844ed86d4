#include "glmselect/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glmselect/errors.hpp"
#include "glmselect/parallel.hpp"
#include "glmselect/random.hpp"

namespace glmselect {

namespace {

constexpr std::size_t kBlock = 4096;

struct MinMax {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void merge(const MinMax& o) {
        lo = std::min(lo, o.lo);
        hi = std::max(hi, o.hi);
    }
};

MinMax subset_extremes(const MatrixXd& gram, const std::vector<int>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = gram(idx[a], idx[b]);
    const auto [lo, hi] = extreme_eigenvalues(sub);
    return {lo, hi};
}

// Evaluates blocks of subsets in parallel; min/max reduction is exact, so the
// result does not depend on the thread count.
MinMax reduce_blocks(const MatrixXd& gram, const std::vector<std::vector<int>>& block,
                     int threads) {
    std::vector<MinMax> parts(block.size());
    parallel_for(block.size(), threads,
                 [&](std::size_t i) { parts[i] = subset_extremes(gram, block[i]); });
    MinMax out;
    for (const auto& m : parts) out.merge(m);
    return out;
}

}  // namespace

double log_binomial(int p, int k) {
    if (k < 0 || k > p) return -std::numeric_limits<double>::infinity();
    return std::lgamma(p + 1.0) - std::lgamma(k + 1.0) - std::lgamma(p - k + 1.0);
}

std::uint64_t binomial(int p, int k) {
    if (k < 0 || k > p) return 0;
    k = std::min(k, p - k);
    constexpr auto cap = std::numeric_limits<std::uint64_t>::max();
    unsigned __int128 c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * static_cast<unsigned>(p - k + i) / static_cast<unsigned>(i);
        if (c > cap) return cap;
    }
    return static_cast<std::uint64_t>(c);
}

int rank_of(const MatrixXd& X, std::optional<double> tol) {
    if (X.size() == 0) throw InputError("rank_of: empty matrix");
    Eigen::JacobiSVD<MatrixXd> svd(X);
    const VectorXd& s = svd.singularValues();
    const double cutoff =
        tol ? *tol
            : static_cast<double>(std::max(X.rows(), X.cols())) *
                  std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff) ++r;
    return r;
}

std::pair<double, double> extreme_eigenvalues(const MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const VectorXd& ev = es.eigenvalues();
    double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    const double floor = 8.0 * static_cast<double>(sym.rows()) *
                         std::numeric_limits<double>::epsilon() * std::max(hi, 0.0);
    if (lo < floor) lo = 0.0;
    return {lo, std::max(hi, 0.0)};
}

DesignMatrix::DesignMatrix(MatrixXd X, std::optional<double> rank_tol) : X_(std::move(X)) {
    if (X_.rows() == 0 || X_.cols() == 0) throw InputError("design matrix is empty");
    if (!X_.allFinite()) throw InputError("design matrix has non-finite entries");
    for (Eigen::Index j = 0; j < X_.cols(); ++j)
        if (X_.col(j).cwiseAbs().maxCoeff() == 0.0)
            throw InputError("design column " + std::to_string(j + 1) + " is all zero");
    Eigen::JacobiSVD<MatrixXd> svd(X_);
    const VectorXd& s = svd.singularValues();
    rank_tol_ = rank_tol ? *rank_tol
                         : static_cast<double>(std::max(X_.rows(), X_.cols())) *
                               std::numeric_limits<double>::epsilon() * s[0];
    rank_ = static_cast<int>((s.array() > rank_tol_).count());
    gram_ = X_.transpose() * X_;
}

MatrixXd DesignMatrix::columns(const std::vector<int>& idx) const {
    MatrixXd out(X_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X_.col(idx[j]);
    return out;
}

SparseSpectrum sparse_spectrum(const DesignMatrix& X, int k, const SpectrumOptions& opts) {
    if (k < 1 || k > X.rank())
        throw InputError("sparse_spectrum: k must lie in [1, rank(X)]");
    if (opts.budget < 1) throw InputError("sparse_spectrum: budget must be >= 1");

    const int p = X.p();
    const std::uint64_t total = binomial(p, k);
    SparseSpectrum out;
    out.k = k;
    MinMax acc;

    if (total <= opts.budget) {
        out.exhaustive = true;
        std::vector<int> c(static_cast<std::size_t>(k));
        std::iota(c.begin(), c.end(), 0);
        std::vector<std::vector<int>> block;
        block.reserve(kBlock);
        bool more = true;
        while (more) {
            block.push_back(c);
            more = next_combination(c, p);
            if (block.size() == kBlock || !more) {
                acc.merge(reduce_blocks(X.gram(), block, opts.threads));
                out.subsets_examined += block.size();
                block.clear();
            }
        }
    } else {
        out.exhaustive = false;
        std::vector<MinMax> parts(static_cast<std::size_t>(opts.budget));
        parallel_for(parts.size(), opts.threads, [&](std::size_t i) {
            Engine rng = make_engine(opts.seed, static_cast<std::uint64_t>(k), i);
            parts[i] = subset_extremes(X.gram(), random_subset(p, k, rng));
        });
        for (const auto& m : parts) acc.merge(m);
        out.subsets_examined = opts.budget;
    }
    out.phi_min = acc.lo;
    out.phi_max = acc.hi;
    out.tau = out.phi_max > 0.0 ? out.phi_min / out.phi_max : 0.0;
    return out;
}

CollinearityVerdict weak_collinearity(const DesignMatrix& X, double c,
                                      const SpectrumOptions& opts) {
    if (!(c > 0.0)) throw InputError("weak_collinearity: c must be positive");
    const SparseSpectrum s = sparse_spectrum(X, X.rank(), opts);
    return {s.tau, s.tau >= c, s.exhaustive};
}

IndependenceCheck check_column_independence(const DesignMatrix& X,
                                            const SpectrumOptions& opts) {
    const int p = X.p();
    const int r = X.rank();
    IndependenceCheck out;
    const std::uint64_t total = binomial(p, r);
    const auto dependent = [&](const std::vector<int>& idx) {
        return rank_of(X.columns(idx), X.rank_tol()) < r;
    };
    if (total <= opts.budget) {
        out.exhaustive = true;
        std::vector<int> c(static_cast<std::size_t>(r));
        std::iota(c.begin(), c.end(), 0);
        do {
            ++out.subsets_checked;
            if (dependent(c)) ++out.dependent_subsets;
        } while (next_combination(c, p));
    } else {
        std::vector<char> flags(static_cast<std::size_t>(opts.budget), 0);
        parallel_for(flags.size(), opts.threads, [&](std::size_t i) {
            Engine rng = make_engine(opts.seed, 0x1d3e, i);
            flags[i] = dependent(random_subset(p, r, rng)) ? 1 : 0;
        });
        out.subsets_checked = opts.budget;
        out.dependent_subsets =
            static_cast<std::uint64_t>(std::count(flags.begin(), flags.end(), 1));
    }
    return out;
}

}  // namespace glmselect
