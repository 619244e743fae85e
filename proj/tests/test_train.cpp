#include <gtest/gtest.h>

#include <random>
#include <set>

#include "verdoc/error.hpp"
#include "verdoc/synth.hpp"
#include "verdoc/train.hpp"

using namespace verdoc;

namespace {

FeatureVector from_mask(std::size_t dim, std::uint64_t m) {
    FeatureVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v.set(i, (m >> i) & 1);
    return v;
}

Vocabulary toy_vocab() { return Vocabulary({{"a"}, {"a", "x"}, {"b"}, {"b", "x"}, {"c"}, {"c", "x"}}); }

struct Corpus {
    Vocabulary vocab;
    Dataset data;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        auto docs = generate_synthetic(60, 40, 11);
        std::vector<DocTree> trees;
        for (const auto& d : docs) trees.push_back(d.tree);
        Corpus c;
        c.vocab = build_vocabulary(trees, 2);
        std::vector<LabeledVector> rows;
        for (const auto& d : docs) rows.push_back({d.id, extract_features(d.tree, c.vocab), d.label == 1});
        c.data = Dataset::split(rows, 0.3, 1);
        return c;
    }();
    return c;
}

TrainConfig small_cfg() {
    TrainConfig cfg;
    cfg.hidden = {32, 32};
    cfg.epochs = 10;
    cfg.batch_size = 10;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST(Dataset, SplitIsStratifiedDisjointAndSeeded) {
    std::vector<LabeledVector> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({"r" + std::to_string(i), from_mask(4, i % 16), i < 20});
    auto a = Dataset::split(rows, 0.3, 5);
    auto b = Dataset::split(rows, 0.3, 5);
    EXPECT_EQ(a.train.size() + a.test.size(), 50u);
    std::set<std::string> ids;
    for (const auto& r : a.train) ids.insert(r.id);
    for (const auto& r : a.test) EXPECT_FALSE(ids.count(r.id)) << r.id;
    EXPECT_EQ(Dataset::malicious(a.test).size(), 6u);
    EXPECT_EQ(a.test.size(), 15u);
    for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].id, b.test[i].id);
}

TEST(TrainRegular, SeparableToyReachesFullAccuracy) {
    std::vector<LabeledVector> rows;
    for (int rep = 0; rep < 10; ++rep) {
        for (std::uint64_t m = 0; m < 4; ++m) rows.push_back({"t", from_mask(2, m), (m & 1) != 0});
    }
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 40;
    cfg.batch_size = 4;
    auto model = train_regular(rows, 2, cfg);
    for (std::uint64_t m = 0; m < 4; ++m) EXPECT_EQ(model.predict(from_mask(2, m)), static_cast<int>(m & 1));
}

TEST(TrainRegular, LossFallsOverEpochs) {
    const auto& c = corpus();
    std::vector<EpochLog> log;
    train_regular(c.data.train, c.vocab.dim(), small_cfg(), &log);
    ASSERT_EQ(log.size(), 10u);
    double first = (log[0].regular_loss + log[1].regular_loss) / 2;
    double last = (log[8].regular_loss + log[9].regular_loss) / 2;
    EXPECT_LT(last, first);
    EXPECT_LT(log.back().regular_loss, log.front().regular_loss);
}

TEST(TrainRegular, Deterministic) {
    const auto& c = corpus();
    auto a = train_regular(c.data.train, c.vocab.dim(), small_cfg());
    auto b = train_regular(c.data.train, c.vocab.dim(), small_cfg());
    EXPECT_EQ(save_model(a), save_model(b));
    auto cfg = small_cfg();
    cfg.seed = 4;
    EXPECT_NE(save_model(train_regular(c.data.train, c.vocab.dim(), cfg)), save_model(a));
}

TEST(RobustLoss, PointSpecEqualsRegularLoss) {
    auto vocab = toy_vocab();
    auto model = MlpModel::random(6, {7, 5}, 2);
    for (std::uint64_t m = 0; m < 64; ++m) {
        LabeledVector s{"s", from_mask(6, m), m % 3 == 0};
        Gradients rg;
        auto r = robust_sample_loss(model, s, vocab, PropertySpec::point(), BoundMethod::Symbolic, &rg);
        Gradients g;
        double l = backward(model, to_eigen(s.x), s.label ? 1 : 0, g);
        EXPECT_NEAR(r.loss, l, 1e-12);
        EXPECT_EQ(r.regions, 1u);
        for (std::size_t k = 0; k < g.dW.size(); ++k) {
            EXPECT_LT((g.dW[k] - rg.dW[k]).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((g.db[k] - rg.db[k]).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(RobustLoss, DominatesSeedLoss) {
    auto vocab = toy_vocab();
    auto model = MlpModel::random(6, {7, 5}, 6);
    for (char p : std::string("ABCDE")) {
        auto spec = PropertySpec::preset(p, 3);
        for (std::uint64_t m = 0; m < 64; ++m) {
            LabeledVector s{"s", from_mask(6, m), true};
            if (region_count(s.x, vocab, spec) == 0) continue;
            auto r = robust_sample_loss(model, s, vocab, spec, BoundMethod::Symbolic);
            double l = loss_ce_logits(model.forward(s.x).logits, 1);
            EXPECT_GE(r.loss, l - 1e-12) << p << " " << m;
            EXPECT_GE(r.loss, 0.0);
            EXPECT_LT(r.region, r.regions);
        }
    }
}

TEST(TrainRobust, NoRegionsRejected) {
    auto vocab = toy_vocab();
    std::vector<LabeledVector> rows{{"m", from_mask(6, 0b000011), true}, {"b", from_mask(6, 0b111111), false}};
    TrainConfig cfg;
    cfg.hidden = {4};
    cfg.epochs = 1;
    EXPECT_THROW(train_robust(rows, vocab, {PropertySpec::preset('C', 3)}, cfg), NoRegions);
    EXPECT_NO_THROW(train_robust(rows, vocab, {PropertySpec::preset('A', 3)}, cfg));
}

TEST(TrainRobust, RaisesVerifiedAccuracy) {
    const auto& c = corpus();
    auto spec = PropertySpec::preset('B', c.vocab.n_subtrees());
    auto mal = Dataset::malicious(c.data.test);
    auto cfg = small_cfg();
    auto regular = train_regular(c.data.train, c.vocab.dim(), cfg);
    std::vector<EpochLog> log;
    auto robust = train_robust(c.data.train, c.vocab, {spec}, cfg, {}, &log);
    double before = vra(regular, mal, c.vocab, spec).vra;
    double after = vra(robust, mal, c.vocab, spec).vra;
    EXPECT_GT(after, before);
    ASSERT_EQ(log.size(), cfg.epochs);
    for (const auto& e : log) {
        EXPECT_GT(e.regular_batches, 0u);
        EXPECT_GT(e.robust_batches, 0u);
        EXPECT_GE(e.robust_loss, 0.0);
    }
}

TEST(TrainRobust, WorkerCountDoesNotChangeModel) {
    const auto& c = corpus();
    auto spec = PropertySpec::preset('A', c.vocab.n_subtrees());
    auto cfg = small_cfg();
    cfg.epochs = 2;
    RobustOptions one, three;
    three.workers = 3;
    auto a = train_robust(c.data.train, c.vocab, {spec}, cfg, one);
    auto b = train_robust(c.data.train, c.vocab, {spec}, cfg, three);
    EXPECT_EQ(save_model(a), save_model(b));
}

TEST(AdvRetrain, AugmentationBookkeeping) {
    auto vocab = toy_vocab();
    std::vector<LabeledVector> rows;
    for (std::uint64_t m = 0; m < 64; ++m) rows.push_back({"r" + std::to_string(m), from_mask(6, m), m % 2 == 1});
    std::vector<PropertySpec> specs{PropertySpec::preset('A', 3), PropertySpec::preset('B', 3)};
    auto extra = augment_variants(rows, vocab, specs);
    std::size_t expected = 0;
    for (const auto& r : rows) {
        if (!r.label) continue;
        for (const auto& range : vocab.subtree_ranges()) {
            bool any = false, all = true;
            for (std::size_t i = range.begin; i < range.end; ++i) {
                any = any || r.x[i];
                all = all && r.x[i];
            }
            expected += any;   // deleting a non-empty subtree changes x
            expected += !all;  // filling a subtree changes x unless already full
        }
    }
    EXPECT_EQ(extra.size(), expected);
    for (const auto& v : extra) EXPECT_TRUE(v.label);
    EXPECT_TRUE(augment_variants(rows, vocab, {PropertySpec::point()}).empty());
}

TEST(AdvRetrain, TrainsAndIsDeterministic) {
    const auto& c = corpus();
    auto cfg = small_cfg();
    cfg.epochs = 3;
    auto spec = PropertySpec::preset('B', c.vocab.n_subtrees());
    std::vector<EpochLog> log;
    auto a = adv_retrain(c.data.train, c.vocab, {spec}, cfg, 1, &log);
    auto b = adv_retrain(c.data.train, c.vocab, {spec}, cfg, 2);
    EXPECT_EQ(save_model(a), save_model(b));
    EXPECT_EQ(log.size(), 3u);
    auto m = evaluate(a, c.data.test, c.vocab, {});
    EXPECT_GT(m.accuracy, 0.8);
}

TEST(Metrics, TrivialPredictors) {
    std::vector<int> labels(10, 0);
    auto m = classification_metrics(std::vector<int>(10, 0), labels);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.fpr, 0.0);
    auto all_mal = classification_metrics(std::vector<int>(10, 1), labels);
    EXPECT_EQ(all_mal.fpr, 1.0);
    EXPECT_EQ(all_mal.accuracy, 0.0);
}

TEST(Metrics, ConfusionMatrixHandCount) {
    std::vector<int> labels{1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    std::vector<int> preds{1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    auto m = classification_metrics(preds, labels);
    EXPECT_EQ(m.tp, 5u);
    EXPECT_EQ(m.fn, 3u);
    EXPECT_EQ(m.fp, 2u);
    EXPECT_EQ(m.tn, 10u);
    EXPECT_DOUBLE_EQ(m.accuracy, 15.0 / 20.0);
    EXPECT_DOUBLE_EQ(m.precision, 5.0 / 7.0);
    EXPECT_DOUBLE_EQ(m.recall, 5.0 / 8.0);
    EXPECT_DOUBLE_EQ(m.fpr, 2.0 / 12.0);
    EXPECT_THROW(classification_metrics({1}, {1, 0}), DimensionMismatch);
}

TEST(Metrics, EvaluateReportsVraAndEra) {
    const auto& c = corpus();
    auto model = train_regular(c.data.train, c.vocab.dim(), small_cfg());
    auto spec = PropertySpec::preset('A', c.vocab.n_subtrees());
    auto m = evaluate(model, c.data.test, c.vocab, {spec});
    ASSERT_TRUE(m.vra.count("A"));
    ASSERT_TRUE(m.era.count("A"));
    EXPECT_GE(m.era.at("A"), m.vra.at("A"));
    auto j = m.to_json();
    EXPECT_TRUE(j.contains("accuracy"));
    EXPECT_TRUE(j.contains("vra"));
}
