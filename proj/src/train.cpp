#include "verdoc/train.hpp"

#include <algorithm>
#include <random>

#include "verdoc/attacks.hpp"
#include "verdoc/error.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

std::vector<LabeledVector> Dataset::malicious(const std::vector<LabeledVector>& rows) {
    std::vector<LabeledVector> out;
    for (const auto& r : rows) {
        if (r.label == kMalicious) out.push_back(r);
    }
    return out;
}

Dataset Dataset::split(std::vector<LabeledVector> rows, double test_fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dataset d;
    for (int cls : {kBenign, kMalicious}) {
        std::vector<LabeledVector> part;
        for (const auto& r : rows) {
            if (r.label == cls) part.push_back(r);
        }
        std::shuffle(part.begin(), part.end(), rng);
        auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(part.size()) + 0.5);
        for (std::size_t i = 0; i < part.size(); ++i) (i < n_test ? d.test : d.train).push_back(part[i]);
    }
    return d;
}

namespace {

Eigen::MatrixXd batch_matrix(const std::vector<LabeledVector>& rows, const std::vector<std::size_t>& idx,
                             std::size_t dim) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
        for (auto i : rows[idx[c]].x.indices()) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return X;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
    }
    return out;
}

double regular_step(MlpModel& model, AdamState& opt, const std::vector<LabeledVector>& rows,
                    const std::vector<std::size_t>& idx, const TrainConfig& cfg) {
    Eigen::MatrixXd X = batch_matrix(rows, idx, model.input_dim());
    std::vector<int> y;
    for (auto i : idx) y.push_back(rows[i].label);
    Gradients g;
    double loss = backward_batch(model, X, y, g);
    adam_step(model, g, opt, cfg);
    return loss;
}

}  // namespace

MlpModel train_regular(const std::vector<LabeledVector>& train, std::size_t input_dim, const TrainConfig& cfg,
                       std::vector<EpochLog>* log) {
    if (train.empty()) throw DataError("empty training set");
    auto model = MlpModel::random(input_dim, cfg.hidden, derive_seed(cfg.seed, "init"));
    AdamState opt = AdamState::for_model(model);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle"));
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        EpochLog entry{e + 1, 0, 0, 0, 0};
        for (const auto& b : make_batches(train.size(), cfg.batch_size, rng)) {
            entry.regular_loss += regular_step(model, opt, train, b, cfg);
            ++entry.regular_batches;
        }
        entry.regular_loss /= static_cast<double>(std::max<std::size_t>(entry.regular_batches, 1));
        if (log) log->push_back(entry);
        verdoc::log(LogLevel::Debug, "regular epoch " + std::to_string(e + 1) + " loss " +
                                         std::to_string(entry.regular_loss));
    }
    model.check_finite();
    return model;
}

RobustSampleLoss robust_sample_loss(const MlpModel& model, const LabeledVector& s, const Vocabulary& vocab,
                                    const PropertySpec& spec, BoundMethod method, Gradients* grads) {
    auto regions = regions_for(s.x, vocab, spec, s.id);
    if (regions.empty()) regions.push_back({s.x, s.x, s.id, {}});
    RobustSampleLoss out{-1.0, 0, regions.size()};
    std::optional<WorstCaseBound> worst;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        WorstCaseBound wc(model, Box::from_region(regions[r]), s.label, {method, nullptr});
        double l = wc.loss();
        if (!worst || l > out.loss) {
            out.loss = l;
            out.region = r;
            if (grads) worst.emplace(std::move(wc));
        }
    }
    if (grads) *grads = worst->loss_gradients();
    return out;
}

MlpModel train_robust(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                      const std::vector<PropertySpec>& specs, const TrainConfig& cfg, const RobustOptions& opts,
                      std::vector<EpochLog>* log, const MlpModel* init) {
    if (train.empty()) throw DataError("empty training set");
    if (specs.empty()) throw ConfigError("robust training needs at least one property");
    std::vector<LabeledVector> robust_rows;
    for (const auto& r : train) {
        if (r.label == kMalicious || opts.include_benign) robust_rows.push_back(r);
    }
    for (const auto& spec : specs) {
        std::size_t total = 0;
        for (const auto& r : robust_rows) total += region_count(r.x, vocab, spec);
        if (total == 0) throw NoRegions("property " + spec.label() + " yields no regions for any training sample");
    }
    auto model = init ? *init : MlpModel::random(vocab.dim(), cfg.hidden, derive_seed(cfg.seed, "init"));
    AdamState opt = AdamState::for_model(model);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle"));

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        // stream 0 is the regular objective, stream s+1 the robust objective of specs[s]
        std::vector<std::pair<std::size_t, std::vector<std::size_t>>> schedule;
        for (auto& b : make_batches(train.size(), cfg.batch_size, rng)) schedule.emplace_back(0, std::move(b));
        for (std::size_t s = 0; s < specs.size(); ++s) {
            for (auto& b : make_batches(robust_rows.size(), cfg.batch_size, rng)) schedule.emplace_back(s + 1, std::move(b));
        }
        std::shuffle(schedule.begin(), schedule.end(), rng);
        EpochLog entry{e + 1, 0, 0, 0, 0};
        for (const auto& [stream, idx] : schedule) {
            if (stream == 0) {
                entry.regular_loss += regular_step(model, opt, train, idx, cfg);
                ++entry.regular_batches;
                continue;
            }
            const auto& spec = specs[stream - 1];
            std::vector<Gradients> grads(idx.size());
            std::vector<double> losses(idx.size());
            parallel_for(idx.size(), opts.workers, [&](std::size_t k) {
                losses[k] = robust_sample_loss(model, robust_rows[idx[k]], vocab, spec, opts.method, &grads[k]).loss;
            });
            Gradients total = Gradients::zeros_like(model);
            double loss = 0;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                total.add(grads[k]);
                loss += losses[k];
            }
            total.scale(1.0 / static_cast<double>(idx.size()));
            adam_step(model, total, opt, cfg);
            entry.robust_loss += loss / static_cast<double>(idx.size());
            ++entry.robust_batches;
        }
        entry.regular_loss /= static_cast<double>(std::max<std::size_t>(entry.regular_batches, 1));
        entry.robust_loss /= static_cast<double>(std::max<std::size_t>(entry.robust_batches, 1));
        if (log) log->push_back(entry);
        verdoc::log(LogLevel::Info, "robust epoch " + std::to_string(e + 1) + " regular " +
                                        std::to_string(entry.regular_loss) + " robust " +
                                        std::to_string(entry.robust_loss));
    }
    model.check_finite();
    return model;
}

std::vector<LabeledVector> augment_variants(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                                            const std::vector<PropertySpec>& specs) {
    std::vector<LabeledVector> out;
    for (const auto& r : train) {
        if (r.label != kMalicious) continue;
        for (const auto& spec : specs) {
            for (const auto& region : regions_for(r.x, vocab, spec, r.id)) {
                // the full manipulation is the far corner of the region
                const FeatureVector& v = spec.is_insertion() ? region.upper : region.lower;
                if (v == r.x) continue;
                std::string tag = spec.label();
                for (const auto& c : region.subtree_choice) tag += ":" + c;
                out.push_back({r.id + "~" + tag, v, kMalicious});
            }
        }
    }
    return out;
}

MlpModel adv_retrain(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                     const std::vector<PropertySpec>& specs, const TrainConfig& cfg, std::size_t workers,
                     std::vector<EpochLog>* log) {
    if (train.empty()) throw DataError("empty training set");
    std::vector<LabeledVector> base = train;
    auto extra = augment_variants(train, vocab, specs);
    base.insert(base.end(), extra.begin(), extra.end());
    auto model = MlpModel::random(vocab.dim(), cfg.hidden, derive_seed(cfg.seed, "init"));
    AdamState opt = AdamState::for_model(model);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle"));
    auto mal = Dataset::malicious(train);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::vector<LabeledVector> rows = base;
        if (e > 0) {
            for (const auto& spec : specs) {
                std::vector<std::optional<LabeledVector>> found(mal.size());
                parallel_for(mal.size(), workers, [&](std::size_t i) {
                    if (model.predict(mal[i].x) != kMalicious) return;
                    auto res = bounded_gradient_attack(model, mal[i].x, vocab, spec);
                    if (res.success) found[i] = LabeledVector{mal[i].id + "~adv", res.x, kMalicious};
                });
                for (auto& f : found) {
                    if (f) rows.push_back(std::move(*f));
                }
            }
        }
        EpochLog entry{e + 1, 0, 0, 0, 0};
        for (const auto& b : make_batches(rows.size(), cfg.batch_size, rng)) {
            entry.regular_loss += regular_step(model, opt, rows, b, cfg);
            ++entry.regular_batches;
        }
        entry.regular_loss /= static_cast<double>(std::max<std::size_t>(entry.regular_batches, 1));
        if (log) log->push_back(entry);
    }
    model.check_finite();
    return model;
}

nlohmann::json Metrics::to_json() const {
    return {{"accuracy", accuracy}, {"fpr", fpr}, {"precision", precision}, {"recall", recall},
            {"tp", tp},             {"fp", fp},   {"tn", tn},               {"fn", fn},
            {"vra", vra},           {"era", era}};
}

Metrics classification_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw DimensionMismatch("predictions and labels differ in length");
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bool pm = predictions[i] == kMalicious, lm = labels[i] == kMalicious;
        if (pm && lm) ++m.tp;
        if (pm && !lm) ++m.fp;
        if (!pm && !lm) ++m.tn;
        if (!pm && lm) ++m.fn;
    }
    auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
    m.accuracy = ratio(m.tp + m.tn, labels.size());
    m.fpr = ratio(m.fp, m.fp + m.tn);
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    return m;
}

double era_bounded(const MlpModel& model, const std::vector<LabeledVector>& malicious, const Vocabulary& vocab,
                   const PropertySpec& spec, std::size_t workers) {
    if (malicious.empty()) return 0.0;
    std::vector<std::uint8_t> robust(malicious.size(), 0);
    parallel_for(malicious.size(), workers, [&](std::size_t i) {
        robust[i] = !bounded_gradient_attack(model, malicious[i].x, vocab, spec).success;
    });
    std::size_t n = 0;
    for (auto r : robust) n += r;
    return static_cast<double>(n) / static_cast<double>(malicious.size());
}

Metrics evaluate(const MlpModel& model, const std::vector<LabeledVector>& test, const Vocabulary& vocab,
                 const std::vector<PropertySpec>& specs, BoundMethod method, std::size_t workers) {
    if (test.empty()) throw DataError("empty test split");
    std::vector<int> pred, lab;
    for (const auto& r : test) {
        pred.push_back(model.predict(r.x));
        lab.push_back(r.label);
    }
    Metrics m = classification_metrics(pred, lab);
    auto mal = Dataset::malicious(test);
    for (const auto& spec : specs) {
        m.vra[spec.label()] = vra(model, mal, vocab, spec, method, workers).vra;
        m.era[spec.label()] = era_bounded(model, mal, vocab, spec, workers);
    }
    return m;
}

}  // namespace verdoc
