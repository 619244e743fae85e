#pragma once

// Monotone gradient-boosted depth-2 tree ensembles, subtree ensemble
// wrappers around an MLP, and their VRA procedures.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/mlp.hpp"
#include "verdoc/properties.hpp"
#include "verdoc/verify.hpp"

namespace verdoc {

/// Node 0 is the root. A split tests feature == 1 and goes to `hi`, else `lo`.
struct TreeNode {
    int feature = -1;  // -1 for a leaf
    int lo = -1;
    int hi = -1;
    double value = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double score(const FeatureVector& x) const;
    /// Leaf index reached by x.
    int leaf(const FeatureVector& x) const;
};

struct BoostConfig {
    double eta = 0.3;
    double lambda = 1.0;
    std::size_t max_depth = 2;
    double min_child_weight = 1e-3;
};

class BoostedTree {
public:
    std::size_t dim = 0;
    double base = 0;
    std::vector<RegressionTree> trees;

    double score(const FeatureVector& x) const;
    /// Malicious iff score > 0.
    int predict(const FeatureVector& x) const { return score(x) > 0 ? 1 : 0; }
    /// Every split's hi side is at least as large as its lo side everywhere.
    bool is_monotone() const;
    /// Features tested by some split, ascending.
    std::vector<std::size_t> used_features() const;

    nlohmann::json to_json() const;
    static BoostedTree from_json(const nlohmann::json& j);
};

std::string save_boosted(const BoostedTree& model);
BoostedTree load_boosted(const std::string& text);

BoostedTree train_monotonic(const std::vector<LabeledVector>& train, std::size_t n_learners,
                            const BoostConfig& cfg = {});

enum class EnsembleMode { AB, D };

struct EnsembleWrapper {
    MlpModel base;
    EnsembleMode mode = EnsembleMode::AB;
    Vocabulary vocab;
};

/// Base training set of a wrapper: single full deletions (AB) or single
/// subtree projections (D) of every sample, keeping the sample label.
std::vector<LabeledVector> ensemble_training_set(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                                                 EnsembleMode mode);
EnsembleWrapper train_ensemble(const std::vector<LabeledVector>& train, const Vocabulary& vocab, EnsembleMode mode,
                               const TrainConfig& cfg);

int ensemble_ab_predict(const EnsembleWrapper& w, const FeatureVector& x);
int ensemble_d_predict(const EnsembleWrapper& w, const FeatureVector& x);
int ensemble_predict(const EnsembleWrapper& w, const FeatureVector& x);

/// `samples` are malicious. A region counts as verified when for some
/// subtree the base verifies the region with that subtree deleted.
VraResult vra_ensemble_ab(const EnsembleWrapper& w, const std::vector<LabeledVector>& samples,
                          const PropertySpec& spec, BoundMethod method = BoundMethod::Symbolic,
                          std::size_t workers = 1);
/// A region counts as verified when its projection on some subtree is.
VraResult vra_ensemble_d(const EnsembleWrapper& w, const std::vector<LabeledVector>& samples,
                         const PropertySpec& spec, BoundMethod method = BoundMethod::Symbolic,
                         std::size_t workers = 1);
/// Checks the lower corner of every region. Exact for insertions; for
/// deletions it is the full-deletion lower bound.
VraResult vra_monotonic(const BoostedTree& model, const std::vector<LabeledVector>& samples, const Vocabulary& vocab,
                        const PropertySpec& spec);

struct DeletionEvasion {
    std::vector<std::size_t> deleted;
    std::size_t l0 = 0;
    std::size_t nodes_explored = 0;
};

/// Minimum set of bits of x to clear so the model predicts benign.
/// Throws Infeasible when clearing every bit is not enough.
DeletionEvasion minimal_deletion_evasion(const BoostedTree& model, const FeatureVector& x);

/// CPLEX LP text: predicate p_f and deletion d_f indicators, leaf
/// indicators l_t_j, consistency, score <= 0, minimise sum d_f.
std::string export_milp(const BoostedTree& model, const FeatureVector& x);

}  // namespace verdoc
