#pragma once

// Sound output bounds over input boxes: naive interval arithmetic and a
// symbolic linear relaxation that keeps input dependency. Bounds computed
// symbolically are intersected with a parallel interval track, so they are
// never wider than the naive ones.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "verdoc/mlp.hpp"
#include "verdoc/properties.hpp"

namespace verdoc {

enum class BoundMethod { Naive, Symbolic };

std::string_view method_name(BoundMethod m);
BoundMethod method_from_name(std::string_view name);

/// Real-valued input box.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    static Box from_region(const IntervalRegion& region);
    static Box point(const Eigen::VectorXd& x) { return {x, x}; }
};

struct OutputBounds {
    Eigen::Vector2d lo;
    Eigen::Vector2d hi;
    BoundMethod method = BoundMethod::Naive;
};

/// Post-activation linear expressions of one hidden layer over the free
/// inputs (coefficient rows plus constants), before intersection with the
/// interval track, and the concrete pre-activation bounds used by the ReLU.
struct SymbolicLayer {
    Eigen::MatrixXd lower_coef, upper_coef;
    Eigen::VectorXd lower_const, upper_const;
    Eigen::VectorXd pre_lo, pre_hi;
};

struct SymbolicState {
    std::vector<Eigen::Index> free;
    std::vector<SymbolicLayer> hidden;
    OutputBounds output;
};

OutputBounds propagate_naive(const MlpModel& model, const Box& box);
OutputBounds propagate_naive(const MlpModel& model, const IntervalRegion& region);
OutputBounds propagate_symbolic(const MlpModel& model, const Box& box);
OutputBounds propagate_symbolic(const MlpModel& model, const IntervalRegion& region);
SymbolicState symbolic_state(const MlpModel& model, const Box& box);

struct RegionVerdict {
    bool verified = false;
    /// lower(true class) - upper(other class); > 0 iff verified.
    double margin = 0;
};

RegionVerdict verify_region(const MlpModel& model, const IntervalRegion& region, int true_class,
                            BoundMethod method = BoundMethod::Symbolic);

/// Differentiable worst-case bound computation. The pseudo-logits carry the
/// true class at its lower bound and the other class at its upper bound.
/// Relaxation slopes u/(u-l) are constants for differentiation; passing the
/// slopes of an earlier evaluation freezes them for the forward pass too.
class WorstCaseBound {
public:
    struct Options {
        BoundMethod method = BoundMethod::Symbolic;
        const std::vector<Eigen::VectorXd>* frozen_slopes = nullptr;
    };

    WorstCaseBound(const MlpModel& model, const Box& box, int true_class, Options options);
    WorstCaseBound(const MlpModel& model, const Box& box, int true_class)
        : WorstCaseBound(model, box, true_class, Options{}) {}

    const Eigen::Vector2d& logits() const { return logits_; }
    OutputBounds bounds() const;
    double loss() const;
    /// Parameter gradients for an upstream dL/dlogits.
    Gradients backward(const Eigen::Vector2d& dlogits) const;
    /// Gradients of loss().
    Gradients loss_gradients() const;
    /// True when a ReLU bound or a symbolic/interval intersection is within
    /// `tol` of switching; the bound is not differentiable there.
    bool near_boundary(double tol) const;
    /// Relaxation slope per hidden neuron (0 for stable neurons).
    const std::vector<Eigen::VectorXd>& slopes() const { return slopes_; }

private:
    struct Layer {
        Eigen::MatrixXd AL, AU;  // pre-activation expressions
        Eigen::VectorXd cL, cU;
        Eigen::VectorXd l, u;  // pre-activation bounds after intersection
        Eigen::VectorXd gap;
        std::vector<std::uint8_t> pick_sym_l, pick_sym_u;
        // post-activation state (hidden layers only)
        std::vector<std::uint8_t> phase;  // 0 dead, 1 active, 2 crossing
        Eigen::VectorXd scale;
        Eigen::MatrixXd pAL, pAU;
        Eigen::VectorXd pcL, pcU, pl, pu;
    };

    const MlpModel* model_;
    int true_class_;
    bool symbolic_;
    std::vector<Eigen::Index> free_;
    Eigen::VectorXd lo_, hi_, x0_, vlo_, vhi_;
    std::vector<Layer> layers_;
    std::vector<Eigen::VectorXd> slopes_;
    Eigen::Vector2d logits_;
};

Eigen::Vector2d worst_case_logits(const MlpModel& model, const IntervalRegion& region, int true_class,
                                  BoundMethod method = BoundMethod::Symbolic);

struct SampleVerification {
    std::string sample_id;
    std::string property;
    std::size_t regions_total = 0;
    std::size_t regions_verified = 0;
    bool verified = false;
    double worst_margin = 0;
};

struct VraResult {
    double vra = 0;
    std::vector<SampleVerification> rows;
};

/// Samples with no region (e.g. deletion of more subtrees than present) are
/// checked on the point region of the seed.
VraResult vra(const MlpModel& model, const std::vector<LabeledVector>& samples, const Vocabulary& vocab,
              const PropertySpec& spec, BoundMethod method = BoundMethod::Symbolic, std::size_t workers = 1);

std::string verification_csv(const std::vector<SampleVerification>& rows);

}  // namespace verdoc
