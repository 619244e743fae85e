#include "verdoc/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "verdoc/error.hpp"

namespace verdoc {

nlohmann::json TrainConfig::to_json() const {
    return {{"hidden", hidden},       {"epochs", epochs}, {"batch_size", batch_size},
            {"learning_rate", learning_rate}, {"beta1", beta1},   {"beta2", beta2},
            {"epsilon", epsilon},     {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.hidden = j.value("hidden", c.hidden);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    if (c.epochs == 0 || c.batch_size == 0 || !(c.learning_rate > 0) || !(c.epsilon > 0)) {
        throw ConfigError("training config values must be positive");
    }
    return c;
}

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionMismatch("model needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].W.rows() != layers_[i].b.size()) throw DimensionMismatch("bias size does not match layer");
        if (i > 0 && layers_[i].W.cols() != layers_[i - 1].W.rows()) throw DimensionMismatch("layer dims do not chain");
    }
    if (layers_.back().W.rows() != 2) throw DimensionMismatch("output layer must have 2 classes");
}

MlpModel MlpModel::random(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t in = input_dim;
    auto dims = hidden;
    dims.push_back(2);
    for (auto out : dims) {
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = u(rng);
        }
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = u(rng);
        layers.push_back(std::move(l));
        in = out;
    }
    return MlpModel(std::move(layers));
}

std::size_t MlpModel::input_dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_[0].W.cols()); }

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

void MlpModel::check_finite() const {
    for (const auto& l : layers_) {
        if (!l.W.allFinite() || !l.b.allFinite()) throw NonFiniteWeights("model contains non-finite parameters");
    }
}

ForwardResult MlpModel::forward(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
        throw DimensionMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(input_dim()));
    }
    Eigen::VectorXd a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::VectorXd z = layers_[i].W * a + layers_[i].b;
        a = (i + 1 < layers_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    if (!a.allFinite()) throw NonFiniteWeights("forward pass produced non-finite logits");
    ForwardResult r;
    r.logits = a;
    r.probs = softmax(r.logits);
    return r;
}

ForwardResult MlpModel::forward(const FeatureVector& x) const { return forward(to_eigen(x)); }

Eigen::MatrixXd MlpModel::logits_batch(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.rows()) != input_dim()) throw DimensionMismatch("batch rows do not match input dim");
    Eigen::MatrixXd A = X;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd Z = (layers_[i].W * A).colwise() + layers_[i].b;
        A = (i + 1 < layers_.size()) ? Eigen::MatrixXd(Z.cwiseMax(0.0)) : Z;
    }
    return A;
}

int MlpModel::predict(const FeatureVector& x) const { return fitness_score(*this, x) >= 0.0 ? kBenign : kMalicious; }

bool MlpModel::operator==(const MlpModel& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.W.rows() != b.W.rows() || a.W.cols() != b.W.cols() || a.W != b.W || a.b != b.b) return false;
    }
    return true;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
        g.dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        g.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    g.dx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.input_dim()));
    return g;
}

void Gradients::add(const Gradients& other, double s) {
    for (std::size_t i = 0; i < dW.size(); ++i) {
        dW[i] += s * other.dW[i];
        db[i] += s * other.db[i];
    }
    if (dx.size() == other.dx.size()) dx += s * other.dx;
}

void Gradients::scale(double s) {
    for (auto& w : dW) w *= s;
    for (auto& b : db) b *= s;
    dx *= s;
}

Eigen::Vector2d softmax(const Eigen::Vector2d& z) {
    double m = z.maxCoeff();
    Eigen::Vector2d e = (z.array() - m).exp();
    return e / e.sum();
}

double loss_ce(const Eigen::Vector2d& probs, int y) { return -std::log(std::max(probs(y), 1e-12)); }

double loss_ce_logits(const Eigen::Vector2d& z, int y) {
    double m = z.maxCoeff();
    double lse = m + std::log((z.array() - m).exp().sum());
    return std::min(lse - z(y), -std::log(1e-12));
}

Gradients backward_logits(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::Vector2d& dlogits) {
    const auto& layers = model.layers();
    std::vector<Eigen::VectorXd> acts{x};
    std::vector<Eigen::VectorXd> pre;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::VectorXd z = layers[i].W * acts.back() + layers[i].b;
        pre.push_back(z);
        acts.push_back(i + 1 < layers.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z);
    }
    Gradients g = Gradients::zeros_like(model);
    Eigen::VectorXd delta = dlogits;
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (i + 1 < layers.size()) delta = delta.cwiseProduct((pre[i].array() > 0.0).cast<double>().matrix());
        g.dW[i] = delta * acts[i].transpose();
        g.db[i] = delta;
        delta = layers[i].W.transpose() * delta;
    }
    g.dx = delta;
    return g;
}

double backward(const MlpModel& model, const Eigen::VectorXd& x, int y, Gradients& out) {
    auto f = model.forward(x);
    Eigen::Vector2d d = f.probs;
    d(y) -= 1.0;
    out = backward_logits(model, x, d);
    return loss_ce_logits(f.logits, y);
}

double backward_batch(const MlpModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y, Gradients& out) {
    const auto& layers = model.layers();
    const Eigen::Index n = X.cols();
    std::vector<Eigen::MatrixXd> acts{X};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::MatrixXd Z = (layers[i].W * acts.back()).colwise() + layers[i].b;
        pre.push_back(Z);
        acts.push_back(i + 1 < layers.size() ? Eigen::MatrixXd(Z.cwiseMax(0.0)) : Z);
    }
    double loss = 0;
    Eigen::MatrixXd delta(2, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Vector2d z = acts.back().col(c);
        loss += loss_ce_logits(z, y[static_cast<std::size_t>(c)]);
        Eigen::Vector2d p = softmax(z);
        p(y[static_cast<std::size_t>(c)]) -= 1.0;
        delta.col(c) = p / static_cast<double>(n);
    }
    out = Gradients::zeros_like(model);
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (i + 1 < layers.size()) delta = delta.cwiseProduct((pre[i].array() > 0.0).cast<double>().matrix());
        out.dW[i] = delta * acts[i].transpose();
        out.db[i] = delta.rowwise().sum();
        if (i > 0) delta = layers[i].W.transpose() * delta;
    }
    return loss / static_cast<double>(n);
}

AdamState AdamState::for_model(const MlpModel& model) {
    AdamState s;
    for (const auto& l : model.layers()) {
        s.mW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        s.vW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
        s.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
        s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return s;
}

namespace {

template <typename M>
void adam_update(M& param, const M& g, M& m, M& v, const TrainConfig& cfg, double c1, double c2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
    auto& layers = model.layers();
    if (state.mW.size() != layers.size() || grads.dW.size() != layers.size()) {
        throw DimensionMismatch("optimizer state does not match model");
    }
    ++state.t;
    double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_update(layers[i].W, grads.dW[i], state.mW[i], state.vW[i], cfg, c1, c2);
        adam_update(layers[i].b, grads.db[i], state.mb[i], state.vb[i], cfg, c1, c2);
    }
}

double fitness_score(const MlpModel& model, const Eigen::VectorXd& x) {
    auto f = model.forward(x);
    return f.logits(kBenign) - f.logits(kMalicious);
}

double fitness_score(const MlpModel& model, const FeatureVector& x) { return fitness_score(model, to_eigen(x)); }

namespace {

constexpr char kMagic[8] = {'V', 'D', 'M', 'L', 'P', 0, 0, 0};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw CorruptModelFile("model file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
};

}  // namespace

std::string save_model(const MlpModel& model) {
    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    const auto& layers = model.layers();
    put_u32(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        put_u32(out, static_cast<std::uint32_t>(l.W.rows()));
        put_u32(out, static_cast<std::uint32_t>(l.W.cols()));
    }
    for (const auto& l : layers) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) put_f64(out, l.W(r, c));
        }
        for (Eigen::Index r = 0; r < l.b.size(); ++r) put_f64(out, l.b(r));
    }
    return out;
}

MlpModel load_model(std::string_view bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CorruptModelFile("bad model magic");
    }
    Reader rd{bytes, sizeof(kMagic)};
    auto version = rd.u32();
    if (version != kVersion) throw CorruptModelFile("unsupported model version " + std::to_string(version));
    auto n = rd.u32();
    if (n == 0 || n > 64) throw CorruptModelFile("bad layer count");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dims;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto r = rd.u32();
        auto c = rd.u32();
        if (r == 0 || c == 0 || r > (1u << 20) || c > (1u << 20)) throw CorruptModelFile("bad layer shape");
        dims.emplace_back(r, c);
    }
    std::vector<DenseLayer> layers;
    for (auto [r, c] : dims) {
        rd.need(8ull * (static_cast<std::size_t>(r) * c + r));
        DenseLayer l{Eigen::MatrixXd(r, c), Eigen::VectorXd(r)};
        for (std::uint32_t i = 0; i < r; ++i) {
            for (std::uint32_t j = 0; j < c; ++j) l.W(i, j) = rd.f64();
        }
        for (std::uint32_t i = 0; i < r; ++i) l.b(i) = rd.f64();
        layers.push_back(std::move(l));
    }
    if (rd.pos != bytes.size()) throw CorruptModelFile("trailing bytes after model");
    try {
        return MlpModel(std::move(layers));
    } catch (const DimensionMismatch& e) {
        throw CorruptModelFile(e.what());
    }
}

nlohmann::json model_sidecar(const MlpModel& model, std::uint64_t vocab_hash, const TrainConfig& cfg,
                             const std::string& training) {
    std::vector<std::size_t> dims{model.input_dim()};
    for (const auto& l : model.layers()) dims.push_back(static_cast<std::size_t>(l.W.rows()));
    return {{"format", "verdoc-mlp/1"},
            {"dims", dims},
            {"vocab_hash", std::to_string(vocab_hash)},
            {"training", training},
            {"config", cfg.to_json()}};
}

Eigen::VectorXd to_eigen(const FeatureVector& x) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
    return v;
}

}  // namespace verdoc
