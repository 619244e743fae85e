#pragma once

// Dense ReLU network with softmax output. Class 0 is benign, class 1 malicious.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "verdoc/featurespace.hpp"

namespace verdoc {

constexpr int kBenign = 0;
constexpr int kMalicious = 1;

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
};

struct TrainConfig {
    std::vector<std::size_t> hidden{200, 200};
    std::size_t epochs = 20;
    std::size_t batch_size = 50;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct ForwardResult {
    Eigen::Vector2d logits;
    Eigen::Vector2d probs;
};

class MlpModel {
public:
    MlpModel() = default;
    explicit MlpModel(std::vector<DenseLayer> layers);

    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    static MlpModel random(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::uint64_t seed);

    std::size_t input_dim() const;
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    std::size_t parameter_count() const;
    void check_finite() const;

    ForwardResult forward(const Eigen::VectorXd& x) const;
    ForwardResult forward(const FeatureVector& x) const;
    /// Logits for a batch stored column-wise.
    Eigen::MatrixXd logits_batch(const Eigen::MatrixXd& X) const;
    int predict(const FeatureVector& x) const;

    bool operator==(const MlpModel& other) const;

private:
    std::vector<DenseLayer> layers_;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    Eigen::VectorXd dx;

    static Gradients zeros_like(const MlpModel& model);
    void add(const Gradients& other, double scale = 1.0);
    void scale(double s);
};

Eigen::Vector2d softmax(const Eigen::Vector2d& z);
double loss_ce(const Eigen::Vector2d& probs, int y);
/// Cross-entropy computed from logits (numerically stable form).
double loss_ce_logits(const Eigen::Vector2d& z, int y);

/// Gradient of an arbitrary upstream signal dL/dlogits through the network.
Gradients backward_logits(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::Vector2d& dlogits);
/// Cross-entropy loss and its gradients.
double backward(const MlpModel& model, const Eigen::VectorXd& x, int y, Gradients& out);
/// Mean cross-entropy over a batch (columns of X) and accumulated mean gradients (no dx).
double backward_batch(const MlpModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y, Gradients& out);

struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    std::uint64_t t = 0;

    static AdamState for_model(const MlpModel& model);
};

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

/// log p_benign - log p_malicious; >= 0 means benign.
double fitness_score(const MlpModel& model, const FeatureVector& x);
double fitness_score(const MlpModel& model, const Eigen::VectorXd& x);

std::string save_model(const MlpModel& model);
MlpModel load_model(std::string_view bytes);
nlohmann::json model_sidecar(const MlpModel& model, std::uint64_t vocab_hash, const TrainConfig& cfg,
                             const std::string& training);

Eigen::VectorXd to_eigen(const FeatureVector& x);

}  // namespace verdoc
