#include "verdoc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "verdoc/error.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

FitnessFn mlp_fitness(const MlpModel& model) {
    return [&model](const FeatureVector& x) { return fitness_score(model, x); };
}

nlohmann::json AttackResult::to_json() const {
    nlohmann::json j{{"seed_id", seed_id},       {"attack", attack},   {"success", success},
                     {"l0", l0},                 {"iterations", iterations},
                     {"trace", trace},           {"trace_length", trace.size()},
                     {"still_malicious", still_malicious}, {"fitness", fitness},
                     {"features", x.indices()}};
    if (!region_choice.empty()) j["region_choice"] = region_choice;
    return j;
}

namespace {

Eigen::VectorXd fitness_gradient(const MlpModel& model, const FeatureVector& x) {
    return backward_logits(model, to_eigen(x), Eigen::Vector2d(1.0, -1.0)).dx;
}

}  // namespace

AttackResult bounded_gradient_attack(const MlpModel& model, const FeatureVector& x, const Vocabulary& vocab,
                                     const PropertySpec& spec) {
    AttackResult res;
    res.attack = "bounded-gradient:" + spec.label();
    res.x = x;
    res.fitness = fitness_score(model, x);
    if (res.fitness >= 0) {
        res.success = true;
        return res;
    }
    auto regions = regions_for(x, vocab, spec);
    for (const auto& region : regions) {
        FeatureVector cur = x;
        auto free = region.free_indices();
        std::vector<std::uint8_t> done(free.size(), 0);
        double fit = res.fitness;
        std::vector<std::string> trace;
        for (std::size_t step = 0; step < free.size(); ++step) {
            auto g = fitness_gradient(model, cur);
            std::size_t best = free.size();
            double best_gain = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < free.size(); ++j) {
                if (done[j]) continue;
                auto i = static_cast<Eigen::Index>(free[j]);
                double gain = cur[free[j]] ? -g(i) : g(i);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = j;
                }
            }
            done[best] = 1;
            cur.flip(free[best]);
            trace.push_back((cur[free[best]] ? "+" : "-") + std::to_string(free[best]));
            ++res.iterations;
            fit = fitness_score(model, cur);
            if (fit >= 0) break;
        }
        res.x = cur;
        res.fitness = fit;
        res.trace = trace;
        res.region_choice = region.subtree_choice;
        if (fit >= 0) {
            res.success = true;
            break;
        }
    }
    res.l0 = l0_distance(x, res.x);
    return res;
}

AttackResult unbounded_gradient_attack(const MlpModel& model, const FeatureVector& x, std::size_t max_iters,
                                       std::vector<UnboundedCurvePoint>* curve) {
    AttackResult res;
    res.attack = "unbounded-gradient";
    FeatureVector cur = x;
    double fit = fitness_score(model, cur);
    if (curve) curve->push_back({0, fit});
    std::vector<std::uint8_t> locked(x.size(), 0);
    while (fit < 0 && res.iterations < max_iters && res.iterations < x.size()) {
        auto g = fitness_gradient(model, cur);
        std::size_t best = x.size();
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (locked[i]) continue;
            double gain = cur[i] ? -g(static_cast<Eigen::Index>(i)) : g(static_cast<Eigen::Index>(i));
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        locked[best] = 1;
        cur.flip(best);
        res.trace.push_back((cur[best] ? "+" : "-") + std::to_string(best));
        ++res.iterations;
        fit = fitness_score(model, cur);
        if (curve) curve->push_back({l0_distance(x, cur), fit});
    }
    res.x = cur;
    res.fitness = fit;
    res.success = fit >= 0;
    res.l0 = l0_distance(x, cur);
    return res;
}

RealizeResult realize_vector(const DocTree& seed_tree, const FeatureVector& target, const Vocabulary& vocab,
                             const std::vector<DocTree>& donors, bool strict) {
    if (target.size() != vocab.dim()) throw DimensionMismatch("target vector does not match vocabulary");
    const auto& paths = vocab.paths();
    auto wanted_below = [&](std::size_t i) {
        for (std::size_t j = i + 1; j < paths.size() && is_prefix(paths[i], paths[j]); ++j) {
            if (target[j]) return true;
        }
        return false;
    };
    auto delete_pass = [&](DocTree t) {
        auto x = extract_features(t, vocab);
        for (std::size_t i = 0; i < paths.size(); ++i) {
            if (!x[i] || target[i] || wanted_below(i)) continue;
            if (t.nodes_at(paths[i]).empty()) continue;
            t = t.delete_subtree(paths[i]);
        }
        return t;
    };
    DocTree cur = delete_pass(seed_tree);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!target[i] || !cur.nodes_at(paths[i]).empty()) continue;
        const DocTree* best_donor = nullptr;
        NodeId best_node = 0;
        std::size_t best_children = std::numeric_limits<std::size_t>::max();
        for (const auto& d : donors) {
            for (auto id : d.nodes_at(paths[i])) {
                if (d.node(id).kind == NodeKind::Reference) continue;
                auto c = d.tree_children(id).size();
                if (c < best_children) {
                    best_children = c;
                    best_donor = &d;
                    best_node = id;
                }
            }
        }
        if (!best_donor) {
            // reference-only path: point at the same object in the variant
            bool linked = false;
            for (const auto& d : donors) {
                for (auto id : d.nodes_at(paths[i])) {
                    const DocNode& n = d.node(id);
                    if (linked || n.kind != NodeKind::Reference || !d.in_tree(n.target)) continue;
                    try {
                        cur = cur.link_at(paths[i], d.path_of(n.target));
                        linked = true;
                    } catch (const KindMismatch&) {
                    } catch (const PathNotFound&) {
                    }
                }
            }
            if (linked) continue;
            if (strict) throw NoDonorForPath("no donor object at " + format_path(paths[i]));
            continue;
        }
        try {
            cur = cur.graft_at(paths[i], best_donor->extract(best_node));
        } catch (const KindMismatch&) {
        } catch (const PathNotFound&) {
        }
    }
    cur = delete_pass(cur);
    RealizeResult out{cur, 0};
    out.residual_l0 = l0_distance(extract_features(cur, vocab), target);
    return out;
}

// ---- genome trie ----

struct GenomeTrie::Node {
    std::map<std::string, std::unique_ptr<Node>> kids;
    std::vector<DocTree> genomes;
    std::set<std::string> seen;
};

GenomeTrie::GenomeTrie() : root_(std::make_unique<Node>()) {}
GenomeTrie::~GenomeTrie() = default;
GenomeTrie::GenomeTrie(GenomeTrie&&) noexcept = default;
GenomeTrie& GenomeTrie::operator=(GenomeTrie&&) noexcept = default;

GenomeTrie GenomeTrie::build(const std::vector<DocTree>& donors, std::size_t max_per_path) {
    GenomeTrie t;
    t.max_per_path_ = max_per_path;
    for (const auto& d : donors) {
        for (auto id : d.bfs_order()) {
            if (id == d.root() || d.node(id).kind == NodeKind::Reference) continue;
            t.add(d.path_of(id), d.extract(id));
        }
    }
    return t;
}

void GenomeTrie::add(const Path& path, DocTree genome) {
    Node* n = root_.get();
    for (const auto& k : path) {
        auto& slot = n->kids[k];
        if (!slot) slot = std::make_unique<Node>();
        n = slot.get();
    }
    if (n->genomes.size() >= max_per_path_) return;
    if (!n->seen.insert(genome.canonical()).second) return;
    n->genomes.push_back(std::move(genome));
    ++count_;
}

const std::vector<DocTree>& GenomeTrie::at(const Path& path) const {
    static const std::vector<DocTree> empty;
    const Node* n = root_.get();
    for (const auto& k : path) {
        auto it = n->kids.find(k);
        if (it == n->kids.end()) return empty;
        n = it->second.get();
    }
    return n->genomes;
}

std::vector<std::pair<std::string, const DocTree*>> GenomeTrie::children_of(const Path& path) const {
    std::vector<std::pair<std::string, const DocTree*>> out;
    const Node* n = root_.get();
    for (const auto& k : path) {
        auto it = n->kids.find(k);
        if (it == n->kids.end()) return out;
        n = it->second.get();
    }
    for (const auto& [k, child] : n->kids) {
        for (const auto& g : child->genomes) out.emplace_back(k, &g);
    }
    return out;
}

// ---- evolutionary engine ----

std::string_view policy_name(AdaptivePolicy p) {
    switch (p) {
        case AdaptivePolicy::Move: return "move";
        case AdaptivePolicy::Scatter: return "scatter";
        case AdaptivePolicy::MoveScatter: return "move-scatter";
        default: return "evolutionary";
    }
}

AdaptivePolicy policy_from_name(std::string_view name) {
    if (name == "evolutionary" || name == "none") return AdaptivePolicy::None;
    if (name == "move") return AdaptivePolicy::Move;
    if (name == "scatter") return AdaptivePolicy::Scatter;
    if (name == "move-scatter") return AdaptivePolicy::MoveScatter;
    throw ConfigError("unknown evolutionary policy '" + std::string(name) + "'");
}

nlohmann::json EvoConfig::to_json() const {
    return {{"population", population},     {"generations_per_round", generations_per_round},
            {"rounds", rounds},             {"fitness_stop", fitness_stop},
            {"mutation_rate", mutation_rate}, {"pool_window", pool_window},
            {"seed", seed},                 {"policy", policy_name(policy)}};
}

EvoConfig EvoConfig::from_json(const nlohmann::json& j) {
    EvoConfig c;
    try {
        c.population = j.value("population", c.population);
        c.generations_per_round = j.value("generations_per_round", c.generations_per_round);
        c.rounds = j.value("rounds", c.rounds);
        c.fitness_stop = j.value("fitness_stop", c.fitness_stop);
        c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
        c.pool_window = j.value("pool_window", c.pool_window);
        c.seed = j.value("seed", c.seed);
        c.policy = policy_from_name(j.value("policy", std::string("evolutionary")));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("evolutionary config: ") + e.what());
    }
    if (c.population == 0 || !(c.mutation_rate > 0 && c.mutation_rate <= 1)) {
        throw ConfigError("population must be > 0 and mutation rate in (0, 1]");
    }
    return c;
}

std::string MutationOp::str() const {
    switch (kind) {
        case Kind::Delete: return "delete " + format_path(path);
        case Kind::Insert: return "insert " + format_path(path);
        case Kind::Replace: return "replace " + format_path(path);
        case Kind::Move: return "move " + format_path(path) + " -> " + format_path(target);
    }
    return {};
}

std::string scatter_pick_subtree(const std::vector<std::string>& candidates, const std::vector<MutationOp>& history,
                                 MutationOp::Kind kind, std::mt19937_64& rng) {
    if (candidates.empty()) return {};
    std::map<std::string, std::size_t> touched;
    for (const auto& c : candidates) touched[c] = 0;
    for (const auto& op : history) {
        if (op.kind != kind || op.path.empty()) continue;
        auto it = touched.find(op.path.front());
        if (it != touched.end()) ++it->second;
    }
    std::size_t least = std::numeric_limits<std::size_t>::max();
    for (const auto& [k, n] : touched) least = std::min(least, n);
    std::vector<std::string> best;
    for (const auto& [k, n] : touched) {
        if (n == least) best.push_back(k);
    }
    return best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
}

namespace {

struct Variant {
    DocTree tree;
    FeatureVector x;
    double fitness = -std::numeric_limits<double>::infinity();
    bool alive = false;
    std::vector<MutationOp> ops;
    std::size_t generation = 0;
};

struct Engine {
    const FitnessFn& fitness;
    const Vocabulary& vocab;
    const GenomeTrie& donors;
    const EvoConfig& cfg;
    const ExploitMarker& marker;

    bool uses_move() const {
        return cfg.policy == AdaptivePolicy::Move || cfg.policy == AdaptivePolicy::MoveScatter;
    }
    bool uses_scatter() const {
        return cfg.policy == AdaptivePolicy::Scatter || cfg.policy == AdaptivePolicy::MoveScatter;
    }

    void evaluate(Variant& v) const {
        v.x = extract_features(v.tree, vocab);
        v.fitness = fitness(v.x);
        v.alive = v.tree.is_malicious_proxy(marker);
    }

    MutationOp::Kind pick_kind(std::mt19937_64& rng) const {
        std::size_t n = uses_move() ? 4 : 3;
        return static_cast<MutationOp::Kind>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    }

    // Applies one op at `path`; returns false when it is not applicable.
    bool apply(Variant& v, MutationOp::Kind kind, const Path& path, std::mt19937_64& rng) const {
        try {
            switch (kind) {
                case MutationOp::Kind::Delete: {
                    if (path.empty() || v.tree.nodes_at(path).empty()) return false;
                    v.tree = v.tree.delete_subtree(path);
                    v.ops.push_back({kind, path, {}});
                    return true;
                }
                case MutationOp::Kind::Insert: {
                    Path at = path;
                    auto holders = v.tree.nodes_at(at);
                    auto is_dict = [&](NodeId id) {
                        const DocNode& n = v.tree.node(id);
                        if (n.kind == NodeKind::Reference && v.tree.contains(n.target)) {
                            return v.tree.node(n.target).has_keys();
                        }
                        return n.has_keys();
                    };
                    if (!at.empty() && (holders.empty() || !is_dict(holders.front()))) at.pop_back();
                    auto cands = donors.children_of(at);
                    if (cands.empty()) return false;
                    const auto& [key, genome] =
                        cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
                    Path dest = at;
                    dest.push_back(key);
                    v.tree = at.empty() ? v.tree.graft_at(dest, *genome) : v.tree.insert_subtree(at, key, *genome);
                    v.ops.push_back({kind, dest, {}});
                    return true;
                }
                case MutationOp::Kind::Replace: {
                    if (path.empty()) return false;
                    const auto& cands = donors.at(path);
                    if (cands.empty()) return false;
                    const auto& genome = cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
                    v.tree = v.tree.replace_subtree(path, genome);
                    v.ops.push_back({kind, path, {}});
                    return true;
                }
                case MutationOp::Kind::Move: {
                    std::optional<Path> from;
                    for (const auto& t : marker.hosting_paths()) {
                        if (v.tree.find_payload(t, marker)) {
                            from = t;
                            break;
                        }
                    }
                    if (!from) return false;
                    std::vector<Path> dests;
                    for (const auto& t : marker.trigger_points) {
                        if (t != *from) dests.push_back(t);
                    }
                    if (dests.empty()) return false;
                    const Path& to = dests[std::uniform_int_distribution<std::size_t>(0, dests.size() - 1)(rng)];
                    v.tree = v.tree.move_exploit(*from, to, marker);
                    v.ops.push_back({kind, *from, to});
                    return true;
                }
            }
        } catch (const Error&) {
            return false;
        }
        return false;
    }

    std::vector<Path> mutation_points(const DocTree& t) const {
        std::vector<Path> pts;
        std::set<Path> seen;
        for (auto id : t.bfs_order()) {
            if (id == t.root()) continue;
            const Path& p = t.path_of(id);
            if (seen.insert(p).second) pts.push_back(p);
        }
        return pts;
    }

    void mutate(Variant& v, std::mt19937_64& rng) const {
        auto pts = mutation_points(v.tree);
        std::bernoulli_distribution pick(cfg.mutation_rate);
        std::size_t n_ops = 0;
        std::vector<Path> chosen;
        for (const auto& p : pts) {
            if (pick(rng)) chosen.push_back(p);
        }
        if (chosen.empty()) {
            if (pts.empty()) {
                chosen.push_back({});
            } else {
                chosen.push_back(pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)]);
            }
        }
        n_ops = chosen.size();
        for (std::size_t i = 0; i < n_ops; ++i) {
            auto kind = pick_kind(rng);
            Path at = chosen[i];
            if (uses_scatter() && kind != MutationOp::Kind::Move) {
                std::vector<std::string> subtrees = v.tree.root_keys();
                if (kind == MutationOp::Kind::Insert) {
                    for (const auto& [k, g] : donors.children_of({})) subtrees.push_back(k);
                    std::sort(subtrees.begin(), subtrees.end());
                    subtrees.erase(std::unique(subtrees.begin(), subtrees.end()), subtrees.end());
                }
                auto s = scatter_pick_subtree(subtrees, v.ops, kind, rng);
                if (s.empty()) continue;
                std::vector<Path> in_subtree;
                for (const auto& p : mutation_points(v.tree)) {
                    if (!p.empty() && p.front() == s) in_subtree.push_back(p);
                }
                if (in_subtree.empty()) {
                    at = {};
                } else {
                    at = in_subtree[std::uniform_int_distribution<std::size_t>(0, in_subtree.size() - 1)(rng)];
                }
            }
            apply(v, kind, at, rng);
        }
    }
};

}  // namespace

AttackResult evolutionary_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, const EvoConfig& cfg,
                                 const ExploitMarker& marker) {
    Engine eng{fitness, vocab, donors, cfg, marker};
    const std::uint64_t base_seed = derive_seed(cfg.seed, "evo:" + seed_id);
    AttackResult res;
    res.seed_id = seed_id;
    res.attack = std::string(policy_name(cfg.policy));

    Variant seed{seed_tree, {}, 0, false, {}, 0};
    eng.evaluate(seed);
    const FeatureVector seed_x = seed.x;
    auto finish = [&](const Variant& v, bool success, std::size_t gens) {
        res.success = success;
        res.x = v.x;
        res.tree = v.tree;
        res.l0 = l0_distance(seed_x, v.x);
        res.iterations = gens;
        res.trace.clear();
        for (const auto& op : v.ops) res.trace.push_back(op.str());
        res.still_malicious = v.alive;
        res.fitness = v.fitness;
        return res;
    };
    if (seed.alive && seed.fitness >= cfg.fitness_stop) return finish(seed, true, 0);

    std::vector<Variant> pop(cfg.population, seed);
    std::vector<Variant> archive;  // best alive variants seen, fitness descending
    std::vector<std::vector<Variant>> window;
    Variant best = seed;
    const std::size_t total = cfg.generations_per_round * std::max<std::size_t>(cfg.rounds, 1);

    for (std::size_t gen = 1; gen <= total; ++gen) {
        std::vector<Variant> next(pop.size());
        parallel_for(pop.size(), cfg.workers, [&](std::size_t i) {
            std::mt19937_64 rng(derive_seed(base_seed, std::to_string(gen) + ":" + std::to_string(i)));
            Variant child = pop[i];
            child.generation = gen;
            eng.mutate(child, rng);
            eng.evaluate(child);
            next[i] = std::move(child);
        });
        pop = std::move(next);

        const Variant* winner = nullptr;
        for (const auto& v : pop) {
            if (v.alive && v.fitness >= cfg.fitness_stop) {
                if (!winner || v.fitness > winner->fitness) winner = &v;
            }
        }
        if (winner) return finish(*winner, true, gen);

        std::vector<Variant> alive;
        for (const auto& v : pop) {
            if (v.alive) {
                alive.push_back(v);
                if (v.fitness > best.fitness) best = v;
            }
        }
        for (const auto& v : alive) archive.push_back(v);
        std::stable_sort(archive.begin(), archive.end(), [](const Variant& a, const Variant& b) {
            if (a.fitness != b.fitness) return a.fitness > b.fitness;
            return a.generation > b.generation;
        });
        if (archive.size() > cfg.population) archive.resize(cfg.population);
        window.push_back(alive);
        if (window.size() > cfg.pool_window) window.erase(window.begin());

        std::mt19937_64 rng(derive_seed(base_seed, "select:" + std::to_string(gen)));
        std::vector<std::size_t> dead;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (!pop[i].alive) dead.push_back(i);
        }
        if (!dead.empty()) {
            std::vector<const Variant*> distinct;
            for (const auto& v : archive) {
                if (distinct.empty() || distinct.back()->fitness != v.fitness) distinct.push_back(&v);
            }
            std::vector<const Variant*> pool{&seed};
            for (const auto& g : window) {
                for (const auto& v : g) pool.push_back(&v);
            }
            std::size_t share = (dead.size() + 2) / 3;
            for (std::size_t k = 0; k < dead.size(); ++k) {
                const Variant* src = &seed;
                if (k < share) {
                    if (!archive.empty()) src = &archive[k % archive.size()];
                } else if (k < 2 * share) {
                    if (!distinct.empty()) src = distinct[(k - share) % distinct.size()];
                } else {
                    src = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
                }
                pop[dead[k]] = *src;
            }
        }

        // rank-weighted parent selection
        std::vector<std::size_t> order(pop.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return pop[a].fitness > pop[b].fitness; });
        std::vector<double> weights(order.size());
        for (std::size_t r = 0; r < order.size(); ++r) weights[r] = static_cast<double>(order.size() - r);
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        std::vector<Variant> parents(pop.size());
        for (auto& p : parents) p = pop[order[pick(rng)]];
        pop = std::move(parents);
    }
    return finish(best, false, total);
}

AttackResult move_exploit_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                                 const ExploitMarker& marker) {
    cfg.policy = AdaptivePolicy::Move;
    return evolutionary_attack(fitness, vocab, seed_tree, seed_id, donors, cfg, marker);
}

AttackResult scatter_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                            const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                            const ExploitMarker& marker) {
    cfg.policy = AdaptivePolicy::Scatter;
    return evolutionary_attack(fitness, vocab, seed_tree, seed_id, donors, cfg, marker);
}

AttackResult move_scatter_attack(const FitnessFn& fitness, const Vocabulary& vocab, const DocTree& seed_tree,
                                 const std::string& seed_id, const GenomeTrie& donors, EvoConfig cfg,
                                 const ExploitMarker& marker) {
    cfg.policy = AdaptivePolicy::MoveScatter;
    return evolutionary_attack(fitness, vocab, seed_tree, seed_id, donors, cfg, marker);
}

// ---- reverse mimicry ----

Payload extract_payload(const DocTree& malicious, const ExploitMarker& marker, bool closure) {
    for (const auto& t : marker.hosting_paths()) {
        auto id = malicious.find_payload(t, marker);
        if (!id) continue;
        if (!closure) return {malicious.extract(*id), t};
        std::map<NodeId, DocNode> keep;
        std::vector<NodeId> work{*id};
        while (!work.empty()) {
            NodeId cur = work.back();
            work.pop_back();
            if (keep.count(cur) || !malicious.contains(cur)) continue;
            const DocNode& n = malicious.node(cur);
            keep.emplace(cur, n);
            for (const auto& [k, c] : n.dict) work.push_back(c);
            for (auto c : n.items) work.push_back(c);
            if (n.kind == NodeKind::Reference) work.push_back(n.target);
        }
        return {DocTree(*id, std::move(keep)), t};
    }
    throw NoPayloadAtSource("no payload at any hosting path");
}

DocTree reverse_mimicry(const DocTree& benign, const Payload& payload) {
    try {
        return benign.graft_at(payload.source_path, payload.objects);
    } catch (const KindMismatch& e) {
        throw TriggerPathUnavailable(format_path(payload.source_path) + ": " + e.what());
    } catch (const PathNotFound& e) {
        throw TriggerPathUnavailable(format_path(payload.source_path) + ": " + e.what());
    }
}

// ---- reporting ----

namespace {

std::vector<CurvePoint> era_curve(const std::vector<AttackResult>& results, bool trace_axis) {
    std::vector<CurvePoint> out;
    if (results.empty()) return out;
    std::vector<std::size_t> xs;
    for (const auto& r : results) {
        if (r.success) xs.push_back(trace_axis ? r.trace.size() : r.l0);
    }
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(results.size());
    out.push_back({0, 1.0});
    std::size_t evaded = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        ++evaded;
        if (i + 1 < xs.size() && xs[i + 1] == xs[i]) continue;
        double era = 1.0 - static_cast<double>(evaded) / n;
        if (out.back().x == xs[i]) {
            out.back().era = era;
        } else {
            out.push_back({xs[i], era});
        }
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AttackReport attack_report(const std::vector<AttackResult>& results) {
    return {era_curve(results, false), era_curve(results, true)};
}

std::string report_csv(const std::map<std::string, AttackReport>& reports) {
    std::ostringstream os;
    os << "model,axis,x,era\n";
    for (const auto& [name, rep] : reports) {
        for (const auto& p : rep.era_vs_l0) os << name << ",l0," << p.x << ',' << p.era << '\n';
        for (const auto& p : rep.era_vs_trace) os << name << ",trace," << p.x << ',' << p.era << '\n';
    }
    return os.str();
}

std::string report_svg(const std::map<std::string, AttackReport>& reports, bool trace_axis) {
    const double W = 640, H = 400, left = 60, right = 150, top = 20, bottom = 50;
    std::size_t xmax = 1;
    for (const auto& [name, rep] : reports) {
        for (const auto& p : trace_axis ? rep.era_vs_trace : rep.era_vs_l0) xmax = std::max(xmax, p.x);
    }
    auto sx = [&](double x) { return left + (W - left - right) * x / static_cast<double>(xmax); };
    auto sy = [&](double y) { return top + (H - top - bottom) * (1.0 - y); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << W - right << "\" y2=\"" << sy(0)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << left << "\" y2=\"" << sy(1)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (W - right + left) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
       << (trace_axis ? "trace length" : "L0 distance") << "</text>\n";
    os << "<text x=\"15\" y=\"" << (H - bottom + top) / 2 << "\" transform=\"rotate(-90 15 "
       << (H - bottom + top) / 2 << ")\" text-anchor=\"middle\">ERA</text>\n";
    for (int t = 0; t <= 4; ++t) {
        double y = t / 4.0;
        os << "<text x=\"" << left - 5 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
           << y << "</text>\n";
    }
    os << "<text x=\"" << sx(static_cast<double>(xmax)) << "\" y=\"" << sy(0) + 15
       << "\" text-anchor=\"middle\" font-size=\"10\">" << xmax << "</text>\n";
    std::size_t ci = 0;
    for (const auto& [name, rep] : reports) {
        const auto& pts = trace_axis ? rep.era_vs_trace : rep.era_vs_l0;
        const char* color = colors[ci % 6];
        if (!pts.empty()) {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            double prev = pts.front().era;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                double x = sx(static_cast<double>(pts[i].x));
                if (i > 0) os << x << ',' << sy(prev) << ' ';
                os << x << ',' << sy(pts[i].era) << ' ';
                prev = pts[i].era;
            }
            os << sx(static_cast<double>(xmax)) << ',' << sy(prev) << "\"/>\n";
        }
        os << "<text x=\"" << W - right + 10 << "\" y=\"" << top + 15 + 15 * static_cast<double>(ci) << "\" fill=\""
           << color << "\" font-size=\"12\">" << name << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

double median_l0(const std::vector<AttackResult>& results) {
    std::vector<double> v;
    for (const auto& r : results) {
        v.push_back(r.success ? static_cast<double>(r.l0) : std::numeric_limits<double>::infinity());
    }
    return median_of(v);
}

double median_trace(const std::vector<AttackResult>& results) {
    std::vector<double> v;
    for (const auto& r : results) {
        v.push_back(r.success ? static_cast<double>(r.trace.size()) : std::numeric_limits<double>::infinity());
    }
    return median_of(v);
}

}  // namespace verdoc
