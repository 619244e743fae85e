#pragma once

// Evasion attacks: bounded/unbounded gradient attacks on feature vectors,
// realization of vectors as documents, the evolutionary attack with its
// adaptive variants, and reverse mimicry.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "verdoc/doctree.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/mlp.hpp"
#include "verdoc/properties.hpp"

namespace verdoc {

/// Anything that maps a feature vector to a malicious-vs-benign score.
/// Score >= 0 means benign.
using FitnessFn = std::function<double(const FeatureVector&)>;

FitnessFn mlp_fitness(const MlpModel& model);

struct AttackResult {
    std::string seed_id;
    std::string attack;
    bool success = false;
    FeatureVector x;
    std::optional<DocTree> tree;
    std::size_t l0 = 0;
    std::size_t iterations = 0;
    std::vector<std::string> trace;
    bool still_malicious = true;
    double fitness = 0;
    /// Bounded attack only: subtree choice of the region the result lies in.
    std::vector<std::string> region_choice;

    nlohmann::json to_json() const;
};

AttackResult bounded_gradient_attack(const MlpModel& model, const FeatureVector& x, const Vocabulary& vocab,
                                     const PropertySpec& spec);

struct UnboundedCurvePoint {
    std::size_t l0;
    double fitness;
};

AttackResult unbounded_gradient_attack(const MlpModel& model, const FeatureVector& x, std::size_t max_iters = 200000,
                                       std::vector<UnboundedCurvePoint>* curve = nullptr);

struct RealizeResult {
    DocTree tree;
    std::size_t residual_l0 = 0;
};

/// Deletes paths cleared in `target` and grafts the donor object with the
/// fewest children for paths set in `target`. With `strict`, a set path that
/// no donor provides raises NoDonorForPath; otherwise it stays in the residual.
RealizeResult realize_vector(const DocTree& seed_tree, const FeatureVector& target, const Vocabulary& vocab,
                             const std::vector<DocTree>& donors, bool strict = false);

/// Prefix trie over the structural paths of donor subtrees.
class GenomeTrie {
public:
    GenomeTrie();
    ~GenomeTrie();
    GenomeTrie(GenomeTrie&&) noexcept;
    GenomeTrie& operator=(GenomeTrie&&) noexcept;

    /// Indexes the spanning subtree of every non-root node of each donor.
    static GenomeTrie build(const std::vector<DocTree>& donors, std::size_t max_per_path = 8);

    void add(const Path& path, DocTree genome);
    /// Genomes whose root sits exactly at `path`.
    const std::vector<DocTree>& at(const Path& path) const;
    /// (key, genome) pairs one level below `path`.
    std::vector<std::pair<std::string, const DocTree*>> children_of(const Path& path) const;
    std::size_t size() const { return count_; }

private:
    struct Node;
    std::unique_ptr<Node> root_;
    std::size_t count_ = 0;
    std::size_t max_per_path_ = 8;
};

enum class AdaptivePolicy { None, Move, Scatter, MoveScatter };

std::string_view policy_name(AdaptivePolicy p);
AdaptivePolicy policy_from_name(std::string_view name);

struct EvoConfig {
    std::size_t population = 48;
    std::size_t generations_per_round = 20;
    std::size_t rounds = 5;
    double fitness_stop = 0.0;
    double mutation_rate = 0.1;
    std::size_t pool_window = 4;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    AdaptivePolicy policy = AdaptivePolicy::None;

    nlohmann::json to_json() const;
    static EvoConfig from_json(const nlohmann::json& j);
};

struct MutationOp {
    enum class Kind { Delete, Insert, Replace, Move } kind;
    Path path;
    Path target;  // Move destination

    std::string str() const;
};

/// Genetic search over document trees. Success needs the model to score the
/// variant benign while the proxy oracle still reports the payload.
/// Running out of budget yields success = false with the best variant found.
AttackResult evolutionary_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, const EvoConfig& cfg,
                                 const ExploitMarker& marker);

AttackResult move_exploit_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                                 const ExploitMarker& marker);
AttackResult scatter_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                            const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                            const ExploitMarker& marker);
AttackResult move_scatter_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                                 const ExploitMarker& marker);

/// Subtree selection used by the scatter policy: the root key among
/// `candidates` with the fewest earlier ops of `kind` in `history`; ties are
/// broken uniformly at random.
std::string scatter_pick_subtree(const std::vector<std::string>& candidates, const std::vector<MutationOp>& history,
                                 MutationOp::Kind kind, std::mt19937_64& rng);

struct Payload {
    DocTree objects;
    Path source_path;
};

/// Payload object at its hosting trigger plus everything it references.
/// With `closure` false, references leaving the spanning subtree are dropped.
Payload extract_payload(const DocTree& malicious, const ExploitMarker& marker, bool closure = true);
DocTree reverse_mimicry(const DocTree& benign, const Payload& payload);

struct CurvePoint {
    std::size_t x;
    double era;
};

struct AttackReport {
    std::vector<CurvePoint> era_vs_l0;
    std::vector<CurvePoint> era_vs_trace;
};

/// Step curves of the fraction of seeds not yet evaded at each L0 / trace length.
AttackReport attack_report(const std::vector<AttackResult>& results);
std::string report_csv(const std::map<std::string, AttackReport>& reports);
std::string report_svg(const std::map<std::string, AttackReport>& reports, bool trace_axis);

/// Median over results; failures count as +infinity.
double median_l0(const std::vector<AttackResult>& results);
double median_trace(const std::vector<AttackResult>& results);

}  // namespace verdoc
