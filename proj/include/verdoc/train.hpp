#pragma once

// Regular training, verifiably robust training (mixed regular and robust
// batches), adversarial retraining, and evaluation metrics.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/mlp.hpp"
#include "verdoc/properties.hpp"
#include "verdoc/verify.hpp"

namespace verdoc {

struct Dataset {
    std::vector<LabeledVector> train;
    std::vector<LabeledVector> test;

    static std::vector<LabeledVector> malicious(const std::vector<LabeledVector>& rows);
    /// Seeded shuffle then split; each class is split separately.
    static Dataset split(std::vector<LabeledVector> rows, double test_fraction, std::uint64_t seed);
};

struct EpochLog {
    std::size_t epoch = 0;
    double regular_loss = 0;
    double robust_loss = 0;
    std::size_t regular_batches = 0;
    std::size_t robust_batches = 0;
};

struct RobustOptions {
    BoundMethod method = BoundMethod::Symbolic;
    std::size_t workers = 1;
    /// Also train robust objectives on benign samples.
    bool include_benign = false;
};

MlpModel train_regular(const std::vector<LabeledVector>& train, std::size_t input_dim, const TrainConfig& cfg,
                       std::vector<EpochLog>* log = nullptr);

/// Per-sample robust loss for one spec: cross-entropy of the worst-case
/// logits, maximised over the sample's regions.
struct RobustSampleLoss {
    double loss = 0;
    std::size_t region = 0;
    std::size_t regions = 0;
};
RobustSampleLoss robust_sample_loss(const MlpModel& model, const LabeledVector& s, const Vocabulary& vocab,
                                    const PropertySpec& spec, BoundMethod method, Gradients* grads = nullptr);

MlpModel train_robust(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                      const std::vector<PropertySpec>& specs, const TrainConfig& cfg, const RobustOptions& opts = {},
                      std::vector<EpochLog>* log = nullptr, const MlpModel* init = nullptr);

/// Full-subtree deletion/insertion variants of malicious samples; variants
/// equal to their seed are skipped.
std::vector<LabeledVector> augment_variants(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                                            const std::vector<PropertySpec>& specs);

/// Regular training on the augmented set; each epoch also adds the bounded
/// gradient attack evasions found against the current model.
MlpModel adv_retrain(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                     const std::vector<PropertySpec>& specs, const TrainConfig& cfg, std::size_t workers = 1,
                     std::vector<EpochLog>* log = nullptr);

struct Metrics {
    double accuracy = 0;
    double fpr = 0;
    double precision = 0;
    double recall = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::map<std::string, double> vra;
    std::map<std::string, double> era;

    nlohmann::json to_json() const;
};

/// predictions[i] is the class predicted for labels[i].
Metrics classification_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

Metrics evaluate(const MlpModel& model, const std::vector<LabeledVector>& test, const Vocabulary& vocab,
                 const std::vector<PropertySpec>& specs, BoundMethod method = BoundMethod::Symbolic,
                 std::size_t workers = 1);

/// Fraction of malicious samples the bounded gradient attack fails to evade.
double era_bounded(const MlpModel& model, const std::vector<LabeledVector>& malicious, const Vocabulary& vocab,
                   const PropertySpec& spec, std::size_t workers = 1);

}  // namespace verdoc
