#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "verdoc/attacks.hpp"
#include "verdoc/error.hpp"
#include "verdoc/synth.hpp"
#include "verdoc/train.hpp"
#include "verdoc/verify.hpp"

using namespace verdoc;

namespace {

Vocabulary toy_vocab() { return Vocabulary({{"a"}, {"a", "x"}, {"b"}, {"b", "x"}, {"c"}, {"c", "x"}}); }

FeatureVector from_mask(std::size_t dim, std::uint64_t m) {
    FeatureVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v.set(i, (m >> i) & 1);
    return v;
}

MlpModel constant_model(std::size_t dim, bool malicious) {
    DenseLayer l{Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(dim)), Eigen::VectorXd(2)};
    l.b << (malicious ? -1.0 : 1.0), (malicious ? 1.0 : -1.0);
    return MlpModel({l});
}

struct Fixture {
    std::vector<CorpusDoc> docs;
    Vocabulary vocab;
    std::vector<DocTree> benign;
    std::vector<const CorpusDoc*> malicious;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture f;
        f.docs = generate_synthetic(40, 20, 5);
        std::vector<DocTree> trees;
        for (const auto& d : f.docs) trees.push_back(d.tree);
        f.vocab = build_vocabulary(trees, 1);
        for (const auto& d : f.docs) {
            if (d.label == 0) f.benign.push_back(d.tree);
        }
        for (const auto& d : f.docs) {
            if (d.label == 1) f.malicious.push_back(&d);
        }
        return f;
    }();
    return f;
}

}  // namespace

TEST(BoundedAttack, ConstantMaliciousFailsInsideRegion) {
    auto vocab = toy_vocab();
    auto m = constant_model(6, true);
    auto x = from_mask(6, 0b010011);
    for (char p : std::string("ABCDE")) {
        auto spec = PropertySpec::preset(p, 3);
        auto r = bounded_gradient_attack(m, x, vocab, spec);
        EXPECT_FALSE(r.success) << p;
        bool inside = false;
        for (const auto& reg : regions_for(x, vocab, spec)) inside = inside || contains(reg, r.x);
        EXPECT_TRUE(inside) << p;
    }
}

TEST(BoundedAttack, SuccessesTrulyEvadeAndRespectVerification) {
    auto vocab = toy_vocab();
    int successes = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto m = MlpModel::random(6, {8}, 40 + seed);
        for (std::uint64_t mask = 0; mask < 64; ++mask) {
            auto x = from_mask(6, mask);
            if (m.predict(x) != 1) continue;
            for (char p : std::string("ABCDE")) {
                auto spec = PropertySpec::preset(p, 3);
                auto regions = regions_for(x, vocab, spec);
                if (regions.empty()) continue;
                auto r = bounded_gradient_attack(m, x, vocab, spec);
                bool inside = false;
                for (const auto& reg : regions) inside = inside || contains(reg, r.x);
                EXPECT_TRUE(inside);
                bool exists = false;
                for (const auto& reg : regions) {
                    for (const auto& y : enumerate_region(reg)) exists = exists || m.predict(y) == 0;
                }
                if (r.success) {
                    ++successes;
                    EXPECT_GE(fitness_score(m, r.x), 0.0);
                    EXPECT_TRUE(exists);
                }
                auto v = vra(m, {{"s", x, true}}, vocab, spec);
                if (v.vra == 1.0) {
                    EXPECT_FALSE(r.success);
                }
            }
        }
    }
    EXPECT_GT(successes, 0);
}

TEST(UnboundedAttack, AlreadyBenignNeedsNoFlips) {
    auto r = unbounded_gradient_attack(constant_model(5, false), from_mask(5, 0b10110));
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.l0, 0u);
    EXPECT_TRUE(r.trace.empty());
}

TEST(UnboundedAttack, LinearModelFlipsInWeightOrder) {
    // fitness = w . x + c with distinct |w|
    std::vector<double> w{0.3, -1.2, 0.7, -0.1, 2.0, -0.5};
    DenseLayer l{Eigen::MatrixXd::Zero(2, 6), Eigen::VectorXd(2)};
    for (int i = 0; i < 6; ++i) l.W(0, i) = w[static_cast<std::size_t>(i)];
    l.b << -2.0, 0.0;
    MlpModel m({l});
    auto x = from_mask(6, 0b001010);
    // gain of flipping i: +w_i when 0 -> 1, -w_i when 1 -> 0
    std::vector<std::pair<double, std::size_t>> gains;
    for (std::size_t i = 0; i < 6; ++i) gains.push_back({x[i] ? -w[i] : w[i], i});
    std::sort(gains.begin(), gains.end(), [](auto a, auto b) { return a.first > b.first; });
    std::vector<UnboundedCurvePoint> curve;
    auto r = unbounded_gradient_attack(m, x, 100, &curve);
    ASSERT_TRUE(r.success);
    double fit = fitness_score(m, x);
    std::size_t steps = 0;
    while (fit < 0) {
        fit += gains[steps].first;
        ++steps;
    }
    ASSERT_EQ(r.trace.size(), steps);
    for (std::size_t k = 0; k < steps; ++k) {
        auto i = gains[k].second;
        EXPECT_EQ(r.trace[k], (x[i] ? "-" : "+") + std::to_string(i));
    }
    EXPECT_EQ(r.l0, steps);
    EXPECT_EQ(curve.size(), steps + 1);
    EXPECT_EQ(curve.front().l0, 0u);
    EXPECT_NEAR(curve.back().fitness, r.fitness, 1e-12);
}

TEST(UnboundedAttack, RespectsIterationCap) {
    auto r = unbounded_gradient_attack(constant_model(8, true), from_mask(8, 0xff), 3);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.iterations, 3u);
    EXPECT_EQ(r.l0, 3u);
}

TEST(Realize, IdentityForSeedFeatures) {
    const auto& f = fixture();
    for (const auto* d : f.malicious) {
        auto x = extract_features(d->tree, f.vocab);
        auto r = realize_vector(d->tree, x, f.vocab, f.benign);
        EXPECT_EQ(r.residual_l0, 0u);
        EXPECT_EQ(r.tree, d->tree);
    }
}

TEST(Realize, CoveredTargetsRealizeExactly) {
    const auto& f = fixture();
    std::size_t k = 0;
    for (const auto* d : f.malicious) {
        const auto& donor = f.benign[k++ % f.benign.size()];
        auto x = extract_features(d->tree, f.vocab);
        auto y = extract_features(donor, f.vocab);
        FeatureVector target(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) target.set(i, x[i] || y[i]);
        auto r = realize_vector(d->tree, target, f.vocab, {donor});
        EXPECT_EQ(r.residual_l0, 0u) << d->id;
        EXPECT_EQ(extract_features(r.tree, f.vocab), target) << d->id;
    }
}

TEST(Realize, DeletionOnlyTarget) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    auto x = extract_features(d->tree, f.vocab);
    const auto& pay = *d->marker->marker_paths.begin();
    auto target = extract_features(d->tree.delete_subtree({pay.front()}), f.vocab);
    auto r = realize_vector(d->tree, target, f.vocab, {});
    EXPECT_EQ(r.residual_l0, 0u);
    EXPECT_FALSE(r.tree.is_malicious_proxy(*d->marker));
    EXPECT_LT(target.count(), x.count());
}

TEST(Realize, StrictModeNeedsDonor) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    auto x = extract_features(d->tree, f.vocab);
    std::size_t missing = x.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!x[i]) {
            missing = i;
            break;
        }
    }
    ASSERT_LT(missing, x.size());
    auto target = x;
    target.set(missing, true);
    EXPECT_THROW(realize_vector(d->tree, target, f.vocab, {}, true), NoDonorForPath);
    auto loose = realize_vector(d->tree, target, f.vocab, {});
    EXPECT_GE(loose.residual_l0, 1u);
    EXPECT_THROW(realize_vector(d->tree, FeatureVector(3), f.vocab, {}), DimensionMismatch);
}

TEST(GenomeTrie, IndexesDonorSubtrees) {
    const auto& f = fixture();
    auto trie = GenomeTrie::build(f.benign, 4);
    EXPECT_GT(trie.size(), 0u);
    const auto& pages = trie.at({"Pages"});
    ASSERT_FALSE(pages.empty());
    EXPECT_LE(pages.size(), 4u);
    std::set<std::string> forms;
    for (const auto& g : pages) forms.insert(g.canonical());
    EXPECT_EQ(forms.size(), pages.size());
    bool has_pages = false;
    for (const auto& [k, g] : trie.children_of({})) has_pages = has_pages || k == "Pages";
    EXPECT_TRUE(has_pages);
    EXPECT_TRUE(trie.at({"NoSuchKey"}).empty());
    EXPECT_TRUE(trie.children_of({"NoSuchKey"}).empty());
}

TEST(Evolutionary, InsertionFlipWinsInOneStep) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    auto seed_x = extract_features(d->tree, f.vocab);
    FitnessFn fit = [&](const FeatureVector& x) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] && !seed_x[i]) return 1.0;
        }
        return -1.0;
    };
    auto trie = GenomeTrie::build(f.benign);
    EvoConfig cfg;
    cfg.mutation_rate = 1e-9;
    cfg.population = 16;
    auto r = evolutionary_attack(fit, f.vocab, d->tree, d->id, trie, cfg, *d->marker);
    ASSERT_TRUE(r.success);
    EXPECT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.iterations, 1u);
    EXPECT_TRUE(r.still_malicious);
    ASSERT_TRUE(r.tree.has_value());
    EXPECT_TRUE(r.tree->is_malicious_proxy(*d->marker));
}

TEST(Evolutionary, HopelessModelExhaustsBudget) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    auto trie = GenomeTrie::build(f.benign);
    EvoConfig cfg;
    cfg.population = 8;
    cfg.generations_per_round = 3;
    cfg.rounds = 2;
    auto r = evolutionary_attack([](const FeatureVector&) { return -1.0; }, f.vocab, d->tree, d->id, trie, cfg,
                                 *d->marker);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.iterations, 6u);
    EXPECT_TRUE(std::isinf(median_l0({r})));
}

TEST(Evolutionary, ReplayDeterministicAcrossWorkers) {
    const auto& f = fixture();
    std::vector<LabeledVector> rows;
    for (const auto& doc : f.docs) rows.push_back({doc.id, extract_features(doc.tree, f.vocab), doc.label == 1});
    TrainConfig tc;
    tc.hidden = {16};
    tc.epochs = 5;
    tc.seed = 1;
    auto model = train_regular(rows, f.vocab.dim(), tc);
    auto trie = GenomeTrie::build(f.benign);
    for (auto policy : {AdaptivePolicy::None, AdaptivePolicy::MoveScatter}) {
        EvoConfig cfg;
        cfg.population = 12;
        cfg.generations_per_round = 5;
        cfg.rounds = 2;
        cfg.seed = 9;
        cfg.policy = policy;
        const auto* d = f.malicious[1];
        auto a = evolutionary_attack(mlp_fitness(model), f.vocab, d->tree, d->id, trie, cfg, *d->marker);
        auto b = evolutionary_attack(mlp_fitness(model), f.vocab, d->tree, d->id, trie, cfg, *d->marker);
        cfg.workers = 3;
        auto c = evolutionary_attack(mlp_fitness(model), f.vocab, d->tree, d->id, trie, cfg, *d->marker);
        EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
        EXPECT_EQ(a.to_json().dump(), c.to_json().dump());
    }
}

TEST(Evolutionary, MovePolicyRelocatesPayload) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    const Path from = *d->marker->marker_paths.begin();
    FitnessFn fit = [&](const FeatureVector& x) {
        auto i = f.vocab.index_of(from);
        return (i && x[*i]) ? -1.0 : 1.0;
    };
    auto trie = GenomeTrie::build(f.benign);
    EvoConfig cfg;
    cfg.population = 24;
    cfg.seed = 4;
    auto r = move_exploit_attack(fit, f.vocab, d->tree, d->id, trie, cfg, *d->marker);
    ASSERT_TRUE(r.success);
    EXPECT_TRUE(r.tree->is_malicious_proxy(*d->marker));
    EXPECT_EQ(r.attack, "move");
}

TEST(Scatter, FirstPicksTouchDistinctSubtrees) {
    std::vector<std::string> subtrees{"Names", "OpenAction", "Pages", "Type", "Metadata"};
    for (auto kind : {MutationOp::Kind::Insert, MutationOp::Kind::Delete}) {
        std::mt19937_64 rng(3);
        std::vector<MutationOp> history{{MutationOp::Kind::Replace, {"Pages"}, {}}};
        std::set<std::string> seen;
        for (std::size_t k = 0; k < subtrees.size(); ++k) {
            auto s = scatter_pick_subtree(subtrees, history, kind, rng);
            EXPECT_TRUE(seen.insert(s).second) << s;
            history.push_back({kind, {s, "X"}, {}});
        }
        EXPECT_EQ(seen.size(), subtrees.size());
    }
    std::mt19937_64 rng(1);
    EXPECT_EQ(scatter_pick_subtree({"Only"}, {}, MutationOp::Kind::Delete, rng), "Only");
    EXPECT_EQ(scatter_pick_subtree({}, {}, MutationOp::Kind::Delete, rng), "");
}

TEST(Scatter, PolicyNames) {
    for (auto p : {AdaptivePolicy::None, AdaptivePolicy::Move, AdaptivePolicy::Scatter, AdaptivePolicy::MoveScatter}) {
        EXPECT_EQ(policy_from_name(policy_name(p)), p);
    }
    EXPECT_THROW(policy_from_name("bogus"), ConfigError);
}

TEST(Mimicry, PayloadIntoEmptyTree) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    auto pay = extract_payload(d->tree, *d->marker);
    TreeBuilder b;
    auto empty = b.build(b.dict());
    auto t = reverse_mimicry(empty, pay);
    EXPECT_TRUE(t.is_malicious_proxy(*d->marker));
    for (const auto& p : t.structural_paths()) EXPECT_EQ(p.front(), pay.source_path.front());
}

TEST(Mimicry, ClosureKeepsProxyMalicious) {
    const auto& f = fixture();
    for (const auto* d : f.malicious) {
        auto pay = extract_payload(d->tree, *d->marker);
        auto t = reverse_mimicry(f.benign.front(), pay);
        EXPECT_TRUE(t.is_malicious_proxy(*d->marker)) << d->id;
    }
}

TEST(Mimicry, OpenPayloadLosesSharedObject) {
    // The payload's DecodeParms lives under /Shared, outside its spanning subtree.
    TreeBuilder b;
    NodeId root = b.dict();
    NodeId parms = b.dict();
    b.set(parms, "Predictor", b.integer(12));
    NodeId pay = b.stream(300, "FlateDecode");
    b.set(pay, "DecodeParms", b.ref(parms));
    NodeId oa = b.dict();
    b.set(oa, "S", b.name("JavaScript"));
    b.set(oa, "JS", b.ref(pay));
    b.set(root, "OpenAction", oa);
    b.set(root, "Shared", parms);
    auto tree = b.build(root);
    ExploitMarker marker;
    marker.trigger_points = ExploitMarker::default_trigger_points();
    marker.marker_paths = {{"OpenAction", "JS"}};
    marker.payload_fingerprint = tree.fingerprint(pay);
    ASSERT_TRUE(tree.is_malicious_proxy(marker));
    const auto& host = fixture().benign.front();
    auto closed = extract_payload(tree, marker);
    auto open = extract_payload(tree, marker, false);
    EXPECT_LT(open.objects.size(), closed.objects.size());
    EXPECT_TRUE(reverse_mimicry(host, closed).is_malicious_proxy(marker));
    EXPECT_FALSE(reverse_mimicry(host, open).is_malicious_proxy(marker));
}

TEST(Mimicry, PayloadNeedsSource) {
    const auto& f = fixture();
    const auto* d = f.malicious.front();
    EXPECT_THROW(extract_payload(f.benign.front(), *d->marker), NoPayloadAtSource);
}

TEST(Report, EmptyAndSingleStep) {
    auto empty = attack_report({});
    EXPECT_TRUE(empty.era_vs_l0.empty());
    EXPECT_TRUE(empty.era_vs_trace.empty());
    AttackResult r;
    r.success = true;
    r.l0 = 5;
    r.trace = {"a", "b"};
    auto rep = attack_report({r});
    ASSERT_EQ(rep.era_vs_l0.size(), 2u);
    EXPECT_EQ(rep.era_vs_l0[0].x, 0u);
    EXPECT_EQ(rep.era_vs_l0[0].era, 1.0);
    EXPECT_EQ(rep.era_vs_l0[1].x, 5u);
    EXPECT_EQ(rep.era_vs_l0[1].era, 0.0);
    EXPECT_EQ(rep.era_vs_trace[1].x, 2u);
}

TEST(Report, CurvesNonIncreasing) {
    std::mt19937_64 rng(2);
    std::vector<AttackResult> results(50);
    for (auto& r : results) {
        r.success = rng() % 4 != 0;
        r.l0 = rng() % 30;
        r.trace.resize(rng() % 10);
    }
    auto rep = attack_report(results);
    for (const auto* c : {&rep.era_vs_l0, &rep.era_vs_trace}) {
        for (std::size_t i = 1; i < c->size(); ++i) {
            EXPECT_LT((*c)[i - 1].x, (*c)[i].x);
            EXPECT_LE((*c)[i].era, (*c)[i - 1].era);
        }
    }
    std::size_t failed = 0;
    for (const auto& r : results) failed += !r.success;
    EXPECT_DOUBLE_EQ(rep.era_vs_l0.back().era, static_cast<double>(failed) / 50.0);
    auto csv = report_csv({{"m", rep}});
    EXPECT_EQ(csv.rfind("model,axis,x,era\n", 0), 0u);
    auto svg = report_svg({{"m", rep}}, false);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
}

TEST(Report, MediansTreatFailuresAsInfinite) {
    std::vector<AttackResult> rs(3);
    rs[0].success = true;
    rs[0].l0 = 4;
    rs[1].success = true;
    rs[1].l0 = 10;
    rs[2].success = false;
    rs[2].l0 = 1;
    EXPECT_EQ(median_l0(rs), 10.0);
    rs.pop_back();
    EXPECT_EQ(median_l0(rs), 7.0);
    rs[0].trace = {"x"};
    rs[1].trace = {"x", "y", "z"};
    EXPECT_EQ(median_trace(rs), 2.0);
}
