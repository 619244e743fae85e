#include "verdoc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "verdoc/error.hpp"
#include "verdoc/train.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

int RegressionTree::leaf(const FeatureVector& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] ? n.hi : n.lo;
    }
    return i;
}

double RegressionTree::score(const FeatureVector& x) const { return nodes[static_cast<std::size_t>(leaf(x))].value; }

double BoostedTree::score(const FeatureVector& x) const {
    if (x.size() != dim) {
        throw DimensionMismatch("boosted model dim " + std::to_string(dim) + ", input " + std::to_string(x.size()));
    }
    double s = base;
    for (const auto& t : trees) s += t.score(x);
    return s;
}

namespace {

void leaf_range(const RegressionTree& t, int i, double& lo, double& hi) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) {
        lo = std::min(lo, n.value);
        hi = std::max(hi, n.value);
        return;
    }
    leaf_range(t, n.lo, lo, hi);
    leaf_range(t, n.hi, lo, hi);
}

}  // namespace

bool BoostedTree::is_monotone() const {
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) continue;
            double llo = std::numeric_limits<double>::infinity(), lhi = -llo;
            double hlo = llo, hhi = -llo;
            leaf_range(t, n.lo, llo, lhi);
            leaf_range(t, n.hi, hlo, hhi);
            if (lhi > hlo) return false;
        }
    }
    return true;
}

std::vector<std::size_t> BoostedTree::used_features() const {
    std::vector<std::size_t> out;
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
            if (!n.is_leaf()) out.push_back(static_cast<std::size_t>(n.feature));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

nlohmann::json BoostedTree::to_json() const {
    nlohmann::json trees_j = nlohmann::json::array();
    for (const auto& t : trees) {
        nlohmann::json nodes_j = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) {
                nodes_j.push_back({{"leaf", n.value}});
            } else {
                nodes_j.push_back({{"feature", n.feature}, {"lo", n.lo}, {"hi", n.hi}});
            }
        }
        trees_j.push_back(nodes_j);
    }
    return {{"format", "verdoc-gbdt"}, {"version", 1}, {"dim", dim}, {"base", base}, {"trees", trees_j}};
}

BoostedTree BoostedTree::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "verdoc-gbdt" || j.at("version") != 1) throw CorruptModelFile("not a verdoc-gbdt v1 model");
        BoostedTree m;
        m.dim = j.at("dim").get<std::size_t>();
        m.base = j.at("base").get<double>();
        for (const auto& tj : j.at("trees")) {
            RegressionTree t;
            for (const auto& nj : tj) {
                TreeNode n;
                if (nj.contains("leaf")) {
                    n.value = nj.at("leaf").get<double>();
                } else {
                    n.feature = nj.at("feature").get<int>();
                    n.lo = nj.at("lo").get<int>();
                    n.hi = nj.at("hi").get<int>();
                }
                t.nodes.push_back(n);
            }
            const int size = static_cast<int>(t.nodes.size());
            if (size == 0) throw CorruptModelFile("empty tree");
            for (const auto& n : t.nodes) {
                if (n.is_leaf()) continue;
                if (n.lo <= 0 || n.hi <= 0 || n.lo >= size || n.hi >= size ||
                    static_cast<std::size_t>(n.feature) >= m.dim) {
                    throw CorruptModelFile("tree node out of range");
                }
            }
            m.trees.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptModelFile(std::string("boosted model: ") + e.what());
    }
}

std::string save_boosted(const BoostedTree& model) { return model.to_json().dump(1) + "\n"; }

BoostedTree load_boosted(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptModelFile(std::string("boosted model: ") + e.what());
    }
    return BoostedTree::from_json(j);
}

namespace {

struct Booster {
    const std::vector<std::vector<std::size_t>>& on;  // set bits per sample
    const std::vector<double>& g;
    const std::vector<double>& h;
    std::size_t dim;
    BoostConfig cfg;

    double weight(double G, double H, double lo, double hi) const {
        return std::clamp(-G / (H + cfg.lambda), lo, hi);
    }
    double objective(double G, double H, double w) const { return G * w + 0.5 * (H + cfg.lambda) * w * w; }

    int build(RegressionTree& t, const std::vector<std::size_t>& rows, std::size_t depth, double lo, double hi,
              std::vector<int>& path) {
        double G = 0, H = 0;
        for (auto r : rows) G += g[r], H += h[r];
        const double w = weight(G, H, lo, hi);
        const int me = static_cast<int>(t.nodes.size());
        t.nodes.push_back(TreeNode{-1, -1, -1, w});
        if (depth >= cfg.max_depth || rows.size() < 2) return me;

        std::vector<double> G1(dim, 0.0), H1(dim, 0.0);
        for (auto r : rows) {
            for (auto f : on[r]) G1[f] += g[r], H1[f] += h[r];
        }
        const double parent = objective(G, H, w);
        double best_gain = 1e-12;
        int best = -1;
        double bw0 = 0, bw1 = 0;
        for (std::size_t f = 0; f < dim; ++f) {
            if (std::find(path.begin(), path.end(), static_cast<int>(f)) != path.end()) continue;
            const double H0 = H - H1[f];
            if (H1[f] < cfg.min_child_weight || H0 < cfg.min_child_weight) continue;
            const double G0 = G - G1[f];
            const double w0 = weight(G0, H0, lo, hi);
            const double w1 = weight(G1[f], H1[f], lo, hi);
            if (w0 > w1) continue;
            const double gain = parent - objective(G0, H0, w0) - objective(G1[f], H1[f], w1);
            if (gain > best_gain) {
                best_gain = gain;
                best = static_cast<int>(f);
                bw0 = w0;
                bw1 = w1;
            }
        }
        if (best < 0) return me;
        std::vector<std::size_t> r0, r1;
        for (auto r : rows) {
            (std::binary_search(on[r].begin(), on[r].end(), static_cast<std::size_t>(best)) ? r1 : r0).push_back(r);
        }
        const double mid = 0.5 * (bw0 + bw1);
        path.push_back(best);
        const int lo_child = build(t, r0, depth + 1, lo, mid, path);
        const int hi_child = build(t, r1, depth + 1, mid, hi, path);
        path.pop_back();
        auto& n = t.nodes[static_cast<std::size_t>(me)];
        n.feature = best;
        n.lo = lo_child;
        n.hi = hi_child;
        return me;
    }
};

}  // namespace

BoostedTree train_monotonic(const std::vector<LabeledVector>& train, std::size_t n_learners, const BoostConfig& cfg) {
    BoostedTree m;
    if (train.empty()) return m;
    m.dim = train.front().x.size();
    std::vector<std::vector<std::size_t>> on;
    std::size_t pos = 0;
    for (const auto& s : train) {
        if (s.x.size() != m.dim) throw DimensionMismatch("mixed feature dims in training set");
        on.push_back(s.x.indices());
        pos += s.label == 1;
    }
    const double n = static_cast<double>(train.size());
    const double p = std::clamp(static_cast<double>(pos) / n, 1e-6, 1 - 1e-6);
    m.base = std::log(p / (1 - p));
    std::vector<double> F(train.size(), m.base), g(train.size()), h(train.size());
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t round = 0; round < n_learners; ++round) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            const double pi = 1.0 / (1.0 + std::exp(-F[i]));
            g[i] = pi - train[i].label;
            h[i] = std::max(pi * (1 - pi), 1e-6);
        }
        Booster b{on, g, h, m.dim, cfg};
        RegressionTree t;
        std::vector<std::size_t> rows(train.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        std::vector<int> path;
        b.build(t, rows, 0, -inf, inf, path);
        for (auto& node : t.nodes) node.value *= cfg.eta;
        for (std::size_t i = 0; i < train.size(); ++i) F[i] += t.score(train[i].x);
        m.trees.push_back(std::move(t));
    }
    return m;
}

namespace {

FeatureVector zero_range(FeatureVector x, const SubtreeRange& r) {
    for (std::size_t i = r.begin; i < r.end; ++i) x.set(i, false);
    return x;
}

FeatureVector project_range(const FeatureVector& x, const SubtreeRange& r) {
    FeatureVector y(x.size());
    for (std::size_t i = r.begin; i < r.end; ++i) y.set(i, x[i]);
    return y;
}

bool has_bits(const FeatureVector& x, const SubtreeRange& r) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
        if (x[i]) return true;
    }
    return false;
}

}  // namespace

std::vector<LabeledVector> ensemble_training_set(const std::vector<LabeledVector>& train, const Vocabulary& vocab,
                                                 EnsembleMode mode) {
    std::vector<LabeledVector> out;
    for (const auto& s : train) {
        if (mode == EnsembleMode::AB) out.push_back(s);
        for (const auto& r : vocab.subtree_ranges()) {
            if (!has_bits(s.x, r)) continue;
            FeatureVector y = mode == EnsembleMode::AB ? zero_range(s.x, r) : project_range(s.x, r);
            out.push_back({s.id + (mode == EnsembleMode::AB ? "-del:" : "-only:") + r.name, std::move(y), s.label});
        }
    }
    return out;
}

EnsembleWrapper train_ensemble(const std::vector<LabeledVector>& train, const Vocabulary& vocab, EnsembleMode mode,
                               const TrainConfig& cfg) {
    auto set = ensemble_training_set(train, vocab, mode);
    return {train_regular(set, vocab.dim(), cfg), mode, vocab};
}

int ensemble_ab_predict(const EnsembleWrapper& w, const FeatureVector& x) {
    if (w.mode != EnsembleMode::AB) throw ModeMismatch("ensemble_ab_predict on a D wrapper");
    for (const auto& r : w.vocab.subtree_ranges()) {
        if (w.base.predict(zero_range(x, r)) == 1) return 1;
    }
    return 0;
}

int ensemble_d_predict(const EnsembleWrapper& w, const FeatureVector& x) {
    if (w.mode != EnsembleMode::D) throw ModeMismatch("ensemble_d_predict on an AB wrapper");
    for (const auto& r : w.vocab.subtree_ranges()) {
        if (w.base.predict(project_range(x, r)) == 1) return 1;
    }
    return 0;
}

int ensemble_predict(const EnsembleWrapper& w, const FeatureVector& x) {
    return w.mode == EnsembleMode::AB ? ensemble_ab_predict(w, x) : ensemble_d_predict(w, x);
}

namespace {

template <typename Transform>
VraResult vra_any_subtree(const EnsembleWrapper& w, const std::vector<LabeledVector>& samples,
                          const PropertySpec& spec, BoundMethod method, std::size_t workers, Transform transform) {
    VraResult res;
    res.rows.resize(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        auto regions = regions_for(s.x, w.vocab, spec, s.id);
        if (regions.empty()) regions.push_back({s.x, s.x, s.id, {}});
        SampleVerification row{s.id, spec.label(), regions.size(), 0, true, -std::numeric_limits<double>::infinity()};
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& reg : regions) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& r : w.vocab.subtree_ranges()) {
                IntervalRegion t{transform(reg.lower, r), transform(reg.upper, r), reg.origin, reg.subtree_choice};
                auto v = verify_region(w.base, t, 1, method);
                best = std::max(best, v.margin);
                if (v.verified) break;
            }
            row.regions_verified += best > 0;
            worst = std::min(worst, best);
        }
        row.worst_margin = worst;
        row.verified = row.regions_verified == row.regions_total;
        res.rows[i] = std::move(row);
    });
    std::size_t ok = 0;
    for (const auto& r : res.rows) ok += r.verified;
    res.vra = samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
    return res;
}

}  // namespace

VraResult vra_ensemble_ab(const EnsembleWrapper& w, const std::vector<LabeledVector>& samples,
                          const PropertySpec& spec, BoundMethod method, std::size_t workers) {
    if (w.mode != EnsembleMode::AB) throw ModeMismatch("vra_ensemble_ab on a D wrapper");
    if (spec.is_insertion() && spec.distance == 1) {
        VraResult res;
        std::size_t ok = 0;
        for (const auto& s : samples) {
            bool m = ensemble_ab_predict(w, s.x) == 1;
            ok += m;
            res.rows.push_back({s.id, spec.label(), 1, m ? 1u : 0u, m, m ? 1.0 : -1.0});
        }
        res.vra = samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
        return res;
    }
    return vra_any_subtree(w, samples, spec, method, workers, zero_range);
}

VraResult vra_ensemble_d(const EnsembleWrapper& w, const std::vector<LabeledVector>& samples,
                         const PropertySpec& spec, BoundMethod method, std::size_t workers) {
    if (w.mode != EnsembleMode::D) throw ModeMismatch("vra_ensemble_d on an AB wrapper");
    return vra_any_subtree(w, samples, spec, method, workers, project_range);
}

VraResult vra_monotonic(const BoostedTree& model, const std::vector<LabeledVector>& samples, const Vocabulary& vocab,
                        const PropertySpec& spec) {
    VraResult res;
    std::size_t ok = 0;
    for (const auto& s : samples) {
        auto regions = regions_for(s.x, vocab, spec, s.id);
        if (regions.empty()) regions.push_back({s.x, s.x, s.id, {}});
        SampleVerification row{s.id, spec.label(), regions.size(), 0, true, std::numeric_limits<double>::infinity()};
        for (const auto& r : regions) {
            double sc = model.score(r.lower);
            row.regions_verified += sc > 0;
            row.worst_margin = std::min(row.worst_margin, sc);
        }
        row.verified = row.regions_verified == row.regions_total;
        ok += row.verified;
        res.rows.push_back(std::move(row));
    }
    res.vra = samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
    return res;
}

namespace {

// 0 cleared, 1 set, 2 undecided
double optimistic(const RegressionTree& t, int i, const std::vector<std::uint8_t>& state) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return n.value;
    switch (state[static_cast<std::size_t>(n.feature)]) {
        case 0: return optimistic(t, n.lo, state);
        case 1: return optimistic(t, n.hi, state);
        default: return std::min(optimistic(t, n.lo, state), optimistic(t, n.hi, state));
    }
}

struct Search {
    const BoostedTree& model;
    std::vector<std::size_t> cand;
    std::vector<std::uint8_t> state;
    std::vector<std::size_t> current, best;
    bool found = false;
    std::size_t explored = 0;

    double bound() const {
        double s = model.base;
        for (const auto& t : model.trees) s += optimistic(t, 0, state);
        return s;
    }
    double actual() {
        // undecided bits stay set
        double s = model.base;
        for (const auto& t : model.trees) {
            int i = 0;
            while (!t.nodes[static_cast<std::size_t>(i)].is_leaf()) {
                const auto& n = t.nodes[static_cast<std::size_t>(i)];
                i = state[static_cast<std::size_t>(n.feature)] == 0 ? n.lo : n.hi;
            }
            s += t.nodes[static_cast<std::size_t>(i)].value;
        }
        return s;
    }

    void dfs(std::size_t pos) {
        ++explored;
        if (bound() > 0) return;
        if (actual() <= 0) {
            if (!found || current.size() < best.size()) best = current, found = true;
            return;
        }
        if (found && current.size() + 1 >= best.size()) return;
        if (pos == cand.size()) return;
        const auto f = cand[pos];
        state[f] = 0;
        current.push_back(f);
        dfs(pos + 1);
        current.pop_back();
        state[f] = 1;
        dfs(pos + 1);
        state[f] = 2;
    }
};

}  // namespace

DeletionEvasion minimal_deletion_evasion(const BoostedTree& model, const FeatureVector& x) {
    if (model.predict(x) == 0) return {};
    Search s{model, {}, std::vector<std::uint8_t>(x.size(), 0), {}, {}};
    for (std::size_t i = 0; i < x.size(); ++i) s.state[i] = x[i] ? 1 : 0;
    for (auto f : model.used_features()) {
        if (x[f]) {
            s.cand.push_back(f);
            s.state[f] = 2;
        }
    }
    s.dfs(0);
    if (!s.found) throw Infeasible("no deletion set evades the model");
    std::sort(s.best.begin(), s.best.end());
    return {s.best, s.best.size(), s.explored};
}

std::string export_milp(const BoostedTree& model, const FeatureVector& x) {
    if (x.size() != model.dim) throw DimensionMismatch("export_milp: input dim mismatch");
    auto used = model.used_features();
    std::ostringstream os;
    os << std::setprecision(17);
    os << "\\ verdoc minimal evasion, dim=" << model.dim << " features=" << used.size() << "\n";
    os << "Minimize\n obj:";
    for (std::size_t k = 0; k < used.size(); ++k) os << (k ? " + " : " ") << "d_" << used[k];
    os << "\nSubject To\n";
    for (auto f : used) {
        if (x[f]) {
            os << " flip_" << f << ": p_" << f << " + d_" << f << " = 1\n";
        } else {
            os << " flip_" << f << ": d_" << f << " - p_" << f << " = 0\n";
        }
    }
    std::vector<std::string> binaries;
    for (auto f : used) {
        binaries.push_back("p_" + std::to_string(f));
        binaries.push_back("d_" + std::to_string(f));
    }
    std::ostringstream evade;
    evade << " evade:";
    bool first_term = true;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto& tree = model.trees[t];
        // walk with the split conditions leading to each leaf
        std::vector<std::pair<int, std::vector<std::pair<int, bool>>>> stack{{0, {}}};
        std::vector<std::pair<int, std::vector<std::pair<int, bool>>>> found;
        while (!stack.empty()) {
            auto [i, conds] = stack.back();
            stack.pop_back();
            const auto& n = tree.nodes[static_cast<std::size_t>(i)];
            if (n.is_leaf()) {
                found.push_back({i, conds});
                continue;
            }
            auto c1 = conds;
            c1.push_back({n.feature, true});
            conds.push_back({n.feature, false});
            stack.push_back({n.hi, c1});
            stack.push_back({n.lo, conds});
        }
        std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        os << " one_" << t << ":";
        for (std::size_t k = 0; k < found.size(); ++k) {
            os << (k ? " + " : " ") << "l_" << t << "_" << found[k].first;
        }
        os << " = 1\n";
        for (const auto& [leaf, conds] : found) {
            std::string var = "l_" + std::to_string(t) + "_" + std::to_string(leaf);
            binaries.push_back(var);
            for (std::size_t k = 0; k < conds.size(); ++k) {
                const auto& [f, side] = conds[k];
                os << " path_" << t << "_" << leaf << "_" << k << ": " << var << (side ? " - p_" : " + p_") << f
                   << " <= " << (side ? 0 : 1) << "\n";
            }
            const double v = tree.nodes[static_cast<std::size_t>(leaf)].value;
            evade << (v < 0 ? " - " : (first_term ? " " : " + ")) << std::abs(v) << " " << var;
            first_term = false;
        }
    }
    if (first_term) evade << " 0 p_none";
    evade << " <= " << 0.0 - model.base << "\n";
    os << evade.str();
    os << "Binary\n";
    for (const auto& b : binaries) os << " " << b << "\n";
    os << "End\n";
    return os.str();
}

}  // namespace verdoc
