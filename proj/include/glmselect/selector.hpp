#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "glmselect/design.hpp"
#include "glmselect/exp_family.hpp"
#include "glmselect/fitter.hpp"
#include "glmselect/penalties.hpp"

namespace glmselect {

enum class Structure { complete, ordered, grouped, hierarchical, custom };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

// The admissible-model universe. Indices are 0-based throughout.
struct ModelFamily {
    Structure kind = Structure::complete;
    int p = 0;
    int max_size = -1;  // -1: no cap beyond rank(X)
    std::vector<std::vector<int>> groups;   // grouped: a partition of {0..p-1}
    std::vector<std::vector<int>> parents;  // hierarchical: parents[j] must accompany j
    std::vector<ModelSpec> models;          // custom: the listed models

    static ModelFamily complete(int p, int max_size = -1);
    static ModelFamily ordered(int p, int max_size = -1);
    static ModelFamily grouped(int p, std::vector<std::vector<int>> groups, int max_size = -1);
    static ModelFamily hierarchical(int p, std::vector<std::vector<int>> parents,
                                    int max_size = -1);
    static ModelFamily custom(int p, std::vector<ModelSpec> models, int max_size = -1);

    void validate() const;
    int size_cap() const { return max_size < 0 ? p : std::min(max_size, p); }
    bool admits(const ModelSpec& M) const;
};

// All admissible models of size k (m(k) = result size). The empty model is
// admissible in every family.
std::vector<ModelSpec> enumerate_admissible(const ModelFamily& fam, int k);

// m(k) without materialising the list where a closed form exists.
std::uint64_t admissible_count(const ModelFamily& fam, int k);

// Penalty context carrying ln m(k) for k = 1..r.
PenaltyContext penalty_context(const ModelFamily& fam, const DesignMatrix& X);
PenaltyContext penalty_context(const ModelFamily& fam, int p, int r, int n);

inline constexpr std::uint64_t kDefaultSelectionGuard = 10'000'000;

struct SelectOptions {
    std::uint64_t guard = kDefaultSelectionGuard;
    int threads = 1;
    bool keep_trace = false;
    // Skip a whole model size when the saturated log-likelihood plus Pen(k)
    // already exceeds the incumbent objective. Exact: never changes the argmin.
    bool prune = false;
    FitOptions fit;
};

struct TraceEntry {
    ModelSpec model;
    double objective = 0.0;
    bool failed = false;
};

struct SelectionResult {
    ModelSpec model;
    FitResult fit;
    double objective = 0.0;
    double penalty = 0.0;
    std::uint64_t models_evaluated = 0;
    std::uint64_t fit_failures = 0;
    int sizes_pruned = 0;
    std::vector<TraceEntry> trace;
};

// (1/a)(b(X beta)^t 1 - Y^t X beta) + Pen(|M|)
double selection_objective(const NaturalFamily& fam, const FitResult& fit, double penalty);

// Exhaustive minimiser of the penalised criterion over admissible models of
// size <= min(max_size, r). Ties go to the smaller model, then the
// lexicographically smaller index list.
SelectionResult select_model(const NaturalFamily& fam, const DesignMatrix& X,
                             const VectorXd& Y, const ModelFamily& models,
                             const PenaltyRule& rule, const SelectOptions& opts = {});

// Forward selection: grow from the empty model by the admissible increment
// with the largest likelihood; report the best penalised objective on the
// path. Heuristic, for complete/ordered/grouped families.
SelectionResult greedy_select(const NaturalFamily& fam, const DesignMatrix& X,
                              const VectorXd& Y, const ModelFamily& models,
                              const PenaltyRule& rule, const SelectOptions& opts = {});

// Strict-weak ordering used for the argmin: objective, then size, then indices.
bool better_candidate(double obj_a, const ModelSpec& a, double obj_b, const ModelSpec& b);

}  // namespace glmselect
