#include "verdoc/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "verdoc/baselines.hpp"
#include "verdoc/error.hpp"
#include "verdoc/featurespace.hpp"
#include "verdoc/synth.hpp"
#include "verdoc/train.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"seed",       "workers", "min_df", "test_fraction",
                                             "properties", "train",   "evo",    "method"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    ExperimentConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        c.min_df = j.value("min_df", c.min_df);
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        c.properties = j.value("properties", c.properties);
        c.method = j.value("method", c.method);
        if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
        if (j.contains("evo")) c.evo = EvoConfig::from_json(j.at("evo"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("test_fraction must be in (0, 1)");
    method_from_name(c.method);
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"seed", seed},
            {"workers", workers},
            {"min_df", min_df},
            {"test_fraction", test_fraction},
            {"properties", properties},
            {"train", train.to_json()},
            {"evo", evo.to_json()},
            {"method", method}};
}

std::string ExperimentConfig::provenance() const {
    // workers never change outputs, so they stay out of the hash
    auto j = to_json();
    j.erase("workers");
    std::uint64_t h = derive_seed(0, j.dump());
    std::ostringstream os;
    os << "verdoc/" << kVersion << " seed=" << seed << " config=" << std::hex << std::setw(16) << std::setfill('0')
       << h;
    return os.str();
}

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out = ".";
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON experiment config");
    sub->add_option("--seed", c.seed, "global seed");
    sub->add_option("--workers", c.workers, "worker threads");
    sub->add_option("--out", c.out, "output directory");
}

ExperimentConfig load_config(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config)) throw ConfigError("config file not found: " + c.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(c.config));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        cfg = ExperimentConfig::from_json(j);
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    if (cfg.workers == 0) cfg.workers = default_workers();
    cfg.train.seed = cfg.seed;
    cfg.evo.seed = cfg.seed;
    cfg.evo.workers = cfg.workers;
    return cfg;
}

void require_path(const std::string& p, const std::string& what) {
    if (p.empty()) throw ConfigError("missing --" + what);
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p);
}

std::string out_file(const Common& c, const std::string& name) {
    fs::create_directories(c.out);
    return (fs::path(c.out) / name).string();
}

Vocabulary load_vocab(const std::string& path) {
    require_path(path, "vocab");
    try {
        return Vocabulary::from_text(read_file(path));
    } catch (const SchemaViolation& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::vector<LabeledVector> load_features(const std::string& path, std::size_t dim) {
    require_path(path, "features");
    try {
        return read_feature_file(read_file(path), dim);
    } catch (const SchemaViolation& e) {
        throw DataError(path + ": " + e.what());
    } catch (const DimensionMismatch& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<PropertySpec> parse_properties(const std::vector<std::string>& names, std::size_t n_subtrees) {
    std::vector<PropertySpec> out;
    for (const auto& n : names) {
        if (n == "none") continue;
        try {
            out.push_back(parse_property(n, n_subtrees));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

// Models as loaded from disk: an MLP (possibly wrapped) or a boosted ensemble.
struct LoadedModel {
    std::string kind;
    MlpModel mlp;
    std::optional<EnsembleWrapper> ensemble;
    std::optional<BoostedTree> gbdt;
    double train_minutes = 0;

    int predict(const FeatureVector& x) const {
        if (gbdt) return gbdt->predict(x);
        if (ensemble) return ensemble_predict(*ensemble, x);
        return mlp.predict(x);
    }
    FitnessFn fitness() const {
        if (gbdt) {
            const BoostedTree* m = &*gbdt;
            return [m](const FeatureVector& x) { return -m->score(x); };
        }
        if (ensemble) {
            const EnsembleWrapper* w = &*ensemble;
            return [w](const FeatureVector& x) { return ensemble_predict(*w, x) == 1 ? -1.0 : 1.0; };
        }
        return mlp_fitness(mlp);
    }
    bool plain_mlp() const { return !gbdt && !ensemble; }
};

LoadedModel load_any_model(const std::string& path, const Vocabulary& vocab) {
    require_path(path, "model");
    LoadedModel m;
    std::string bytes = read_file(path);
    try {
        if (bytes.rfind("VDMLP", 0) == 0) {
            m.mlp = load_model(bytes);
            m.kind = "mlp";
            fs::path side = fs::path(path).replace_extension(".json");
            if (fs::exists(side)) {
                auto j = nlohmann::json::parse(read_file(side.string()));
                m.kind = j.value("training", std::string("mlp"));
                m.train_minutes = j.value("train_minutes", 0.0);
            }
            if (m.kind == "ensemble-ab" || m.kind == "ensemble-d") {
                m.ensemble = EnsembleWrapper{m.mlp, m.kind == "ensemble-ab" ? EnsembleMode::AB : EnsembleMode::D, vocab};
            }
            if (m.mlp.input_dim() != vocab.dim()) throw DataError("model input dim does not match vocabulary");
        } else {
            auto j = nlohmann::json::parse(bytes);
            m.gbdt = BoostedTree::from_json(j);
            m.kind = "monotonic";
            m.train_minutes = j.value("train_minutes", 0.0);
            if (m.gbdt->dim != vocab.dim()) throw DataError("model dim does not match vocabulary");
        }
    } catch (const CorruptModelFile& e) {
        throw DataError(path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return m;
}

VraResult model_vra(const LoadedModel& m, const std::vector<LabeledVector>& mal, const Vocabulary& vocab,
                    const PropertySpec& spec, BoundMethod method, std::size_t workers) {
    if (m.gbdt) return vra_monotonic(*m.gbdt, mal, vocab, spec);
    if (m.ensemble) {
        return m.ensemble->mode == EnsembleMode::AB ? vra_ensemble_ab(*m.ensemble, mal, spec, method, workers)
                                                   : vra_ensemble_d(*m.ensemble, mal, spec, method, workers);
    }
    return vra(m.mlp, mal, vocab, spec, method, workers);
}

// Monotone deletion VRA checks full deletions only.
std::string vra_suffix(const LoadedModel& m, const PropertySpec& spec) {
    return m.gbdt && !spec.is_insertion() ? " (lower bound)" : "";
}

std::string csv_with_header(const std::string& provenance, const std::string& body) {
    return "# " + provenance + "\n" + body;
}

int cmd_gen_synth(const Common& c, std::size_t n_benign, std::size_t n_malicious) {
    auto cfg = load_config(c);
    if (n_benign < 1 || n_malicious < 1) throw ConfigError("counts must be >= 1");
    auto docs = generate_synthetic(n_benign, n_malicious, cfg.seed);
    write_corpus(c.out, docs);
    nlohmann::json manifest{{"provenance", cfg.provenance()},
                            {"n_benign", n_benign},
                            {"n_malicious", n_malicious},
                            {"seed", cfg.seed}};
    write_file(out_file(c, "manifest.json"), manifest.dump(1) + "\n");
    std::cout << "wrote " << docs.size() << " documents to " << c.out << "\n";
    return 0;
}

int cmd_build_vocab(const Common& c, const std::string& corpus, std::optional<std::size_t> min_df) {
    auto cfg = load_config(c);
    if (min_df) cfg.min_df = *min_df;
    require_path(corpus, "corpus");
    auto docs = read_corpus(corpus);
    std::vector<DocTree> trees;
    for (const auto& d : docs) trees.push_back(d.tree);
    Vocabulary v = [&] {
        try {
            return build_vocabulary(trees, cfg.min_df);
        } catch (const EmptyVocabulary& e) {
            throw DataError(e.what());
        }
    }();
    write_file(out_file(c, "vocab.txt"), v.to_text(cfg.provenance()));
    std::cout << "dim " << v.dim() << " subtrees " << v.n_subtrees() << "\n";
    return 0;
}

int cmd_extract(const Common& c, const std::string& corpus, const std::string& vocab_path,
                std::optional<double> test_fraction) {
    auto cfg = load_config(c);
    if (test_fraction) cfg.test_fraction = *test_fraction;
    if (!(cfg.test_fraction > 0 && cfg.test_fraction < 1)) throw ConfigError("test fraction must be in (0, 1)");
    auto vocab = load_vocab(vocab_path);
    require_path(corpus, "corpus");
    auto docs = read_corpus(corpus);
    std::vector<LabeledVector> rows;
    for (const auto& d : docs) rows.push_back({d.id, extract_features(d.tree, vocab), d.label});
    auto ds = Dataset::split(rows, cfg.test_fraction, derive_seed(cfg.seed, "split"));
    const auto prov = cfg.provenance();
    write_file(out_file(c, "features.txt"), write_feature_file(rows, prov));
    write_file(out_file(c, "train.txt"), write_feature_file(ds.train, prov));
    write_file(out_file(c, "test.txt"), write_feature_file(ds.test, prov));
    std::cout << "rows " << rows.size() << " train " << ds.train.size() << " test " << ds.test.size() << "\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& features, const std::string& vocab_path,
              const std::string& property, const std::string& mode, std::size_t learners) {
    auto cfg = load_config(c);
    auto vocab = load_vocab(vocab_path);
    auto train = load_features(features, vocab.dim());
    if (train.empty()) throw DataError("no training rows in " + features);
    std::vector<std::string> names = property.empty() ? cfg.properties : split_list(property);
    auto specs = parse_properties(names, vocab.n_subtrees());
    const auto method = method_from_name(cfg.method);
    const auto prov = cfg.provenance();
    auto t0 = std::chrono::steady_clock::now();
    auto minutes = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60; };

    if (mode == "monotonic") {
        auto m = train_monotonic(train, learners);
        auto j = m.to_json();
        j["provenance"] = prov;
        j["train_minutes"] = minutes();
        write_file(out_file(c, "model.gbdt.json"), j.dump(1) + "\n");
        std::cout << "trained monotonic ensemble with " << m.trees.size() << " trees\n";
        return 0;
    }

    std::vector<EpochLog> log;
    MlpModel model;
    std::string training;
    if (mode == "ensemble-ab" || mode == "ensemble-d") {
        auto w = train_ensemble(train, vocab, mode == "ensemble-ab" ? EnsembleMode::AB : EnsembleMode::D, cfg.train);
        model = w.base;
        training = mode;
    } else if (mode == "adv") {
        if (specs.empty()) throw ConfigError("adversarial retraining needs --property");
        model = adv_retrain(train, vocab, specs, cfg.train, cfg.workers, &log);
        training = "adv";
    } else if (mode == "auto" || mode.empty()) {
        if (specs.empty()) {
            model = train_regular(train, vocab.dim(), cfg.train, &log);
            training = "regular";
        } else {
            RobustOptions opts{method, cfg.workers, false};
            try {
                model = train_robust(train, vocab, specs, cfg.train, opts, &log);
            } catch (const NoRegions& e) {
                throw DataError(e.what());
            }
            training = "robust";
        }
    } else {
        throw ConfigError("unknown training mode '" + mode + "'");
    }
    model.check_finite();
    auto side = model_sidecar(model, vocab.hash(), cfg.train, training);
    side["provenance"] = prov;
    side["train_minutes"] = minutes();
    std::vector<std::string> labels;
    for (const auto& s : specs) labels.push_back(s.label());
    side["properties"] = labels;
    write_file(out_file(c, "model.bin"), save_model(model));
    write_file(out_file(c, "model.json"), side.dump(1) + "\n");
    std::ostringstream lg;
    lg << std::setprecision(17) << "epoch,regular_loss,robust_loss,regular_batches,robust_batches\n";
    for (const auto& e : log) {
        lg << e.epoch << ',' << e.regular_loss << ',' << e.robust_loss << ',' << e.regular_batches << ','
           << e.robust_batches << '\n';
    }
    write_file(out_file(c, "train_log.csv"), csv_with_header(prov, lg.str()));
    std::cout << "trained " << training << " model\n";
    return 0;
}

int cmd_verify(const Common& c, const std::string& model_path, const std::string& features,
               const std::string& vocab_path, const std::string& property) {
    auto cfg = load_config(c);
    auto vocab = load_vocab(vocab_path);
    auto rows = load_features(features, vocab.dim());
    auto model = load_any_model(model_path, vocab);
    std::vector<std::string> names = property.empty() ? cfg.properties : split_list(property);
    if (names.empty()) names = {"B"};
    auto specs = parse_properties(names, vocab.n_subtrees());
    auto mal = Dataset::malicious(rows);
    std::vector<SampleVerification> all;
    for (const auto& spec : specs) {
        auto r = model_vra(model, mal, vocab, spec, method_from_name(cfg.method), cfg.workers);
        std::cout << "VRA " << spec.label() << vra_suffix(model, spec) << " " << std::setprecision(6) << r.vra << "\n";
        all.insert(all.end(), r.rows.begin(), r.rows.end());
    }
    write_file(out_file(c, "verification.csv"), csv_with_header(cfg.provenance(), verification_csv(all)));
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& model_path, const std::string& features,
                 const std::string& vocab_path, const std::string& property, const std::string& name) {
    auto cfg = load_config(c);
    auto vocab = load_vocab(vocab_path);
    auto rows = load_features(features, vocab.dim());
    auto model = load_any_model(model_path, vocab);
    auto specs = parse_properties(split_list(property.empty() ? "A,B,C,D,E" : property), vocab.n_subtrees());
    const auto method = method_from_name(cfg.method);
    Metrics m;
    if (model.plain_mlp()) {
        m = evaluate(model.mlp, rows, vocab, specs, method, cfg.workers);
    } else {
        std::vector<int> pred, lab;
        for (const auto& r : rows) {
            pred.push_back(model.predict(r.x));
            lab.push_back(r.label);
        }
        m = classification_metrics(pred, lab);
        auto mal = Dataset::malicious(rows);
        for (const auto& s : specs) m.vra[s.label()] = model_vra(model, mal, vocab, s, method, cfg.workers).vra;
    }
    auto j = m.to_json();
    j["model"] = name.empty() ? fs::path(model_path).stem().string() : name;
    j["kind"] = model.kind;
    j["train_minutes"] = model.train_minutes;
    if (model.gbdt) {
        j["vra_lower_bound"] = nlohmann::json::array();
        for (const auto& s : specs) {
            if (!s.is_insertion()) j["vra_lower_bound"].push_back(s.label());
        }
    }
    j["provenance"] = cfg.provenance();
    write_file(out_file(c, "metrics.json"), j.dump(1) + "\n");
    std::cout << std::setprecision(6) << "accuracy " << m.accuracy << " fpr " << m.fpr << "\n";
    for (const auto& [k, v] : m.vra) std::cout << "VRA " << k << " " << v << "\n";
    return 0;
}

int cmd_attack(const Common& c, const std::string& model_path, const std::string& corpus,
               const std::string& features, const std::string& vocab_path, const std::string& attack,
               const std::string& property, std::size_t max_seeds) {
    auto cfg = load_config(c);
    auto vocab = load_vocab(vocab_path);
    auto rows = load_features(features, vocab.dim());
    auto model = load_any_model(model_path, vocab);
    static const std::set<std::string> kinds{"bounded", "unbounded", "evolutionary", "move",
                                             "scatter", "move-scatter", "mimicry"};
    if (!kinds.count(attack)) throw ConfigError("unknown attack '" + attack + "'");
    const bool needs_trees = attack != "bounded" && attack != "unbounded";
    if ((attack == "bounded" || attack == "unbounded") && !model.plain_mlp()) {
        throw ConfigError("gradient attacks need a plain MLP model");
    }

    std::map<std::string, CorpusDoc> docs;
    std::vector<DocTree> donors;
    if (needs_trees) {
        require_path(corpus, "corpus");
        std::set<std::string> in_rows;
        for (const auto& r : rows) in_rows.insert(r.id);
        for (auto& d : read_corpus(corpus)) {
            if (d.label == 0 && !in_rows.count(d.id)) donors.push_back(d.tree);
            docs.emplace(d.id, std::move(d));
        }
        if (donors.empty()) throw DataError("no benign donor documents outside the attacked rows");
    }
    std::vector<const LabeledVector*> seeds;
    for (const auto& r : rows) {
        if (r.label == 1 && (max_seeds == 0 || seeds.size() < max_seeds)) seeds.push_back(&r);
    }

    std::vector<AttackResult> results(seeds.size());
    auto trie = needs_trees ? GenomeTrie::build(donors) : GenomeTrie();
    auto spec = parse_properties({property.empty() ? "B" : property}, vocab.n_subtrees());
    if (spec.empty()) throw ConfigError("bounded attack needs a property");
    EvoConfig evo = cfg.evo;
    evo.workers = 1;
    auto fitness = model.fitness();

    auto seed_doc = [&](const LabeledVector& s) -> const CorpusDoc& {
        auto it = docs.find(s.id);
        if (it == docs.end()) throw DataError("row " + s.id + " has no document in the corpus");
        if (!it->second.marker) throw DataError("document " + s.id + " carries no exploit marker");
        return it->second;
    };
    for (const auto* s : seeds) {
        if (needs_trees) seed_doc(*s);
    }
    parallel_for(seeds.size(), attack == "bounded" || attack == "unbounded" || attack == "mimicry" ? cfg.workers : 1,
                 [&](std::size_t i) {
        const auto& s = *seeds[i];
        if (attack == "bounded") {
            results[i] = bounded_gradient_attack(model.mlp, s.x, vocab, spec.front());
        } else if (attack == "unbounded") {
            results[i] = unbounded_gradient_attack(model.mlp, s.x);
        } else if (attack == "mimicry") {
            const auto& d = seed_doc(s);
            const auto& donor = donors[derive_seed(cfg.seed, "mimicry:" + s.id) % donors.size()];
            AttackResult r;
            r.seed_id = s.id;
            r.attack = "mimicry";
            try {
                auto variant = reverse_mimicry(donor, extract_payload(d.tree, *d.marker));
                r.x = extract_features(variant, vocab);
                r.still_malicious = variant.is_malicious_proxy(*d.marker);
                r.fitness = fitness(r.x);
                r.success = r.fitness >= 0 && r.still_malicious;
                r.l0 = l0_distance(s.x, r.x);
                r.iterations = 1;
                r.trace = {"mimicry " + format_path(*d.marker->marker_paths.begin())};
                r.tree = std::move(variant);
            } catch (const TriggerPathUnavailable&) {
                r.x = s.x;
            }
            results[i] = std::move(r);
        } else {
            const auto& d = seed_doc(s);
            if (attack == "evolutionary") {
                results[i] = evolutionary_attack(fitness, vocab, d.tree, d.id, trie, evo, *d.marker);
            } else if (attack == "move") {
                results[i] = move_exploit_attack(fitness, vocab, d.tree, d.id, trie, evo, *d.marker);
            } else if (attack == "scatter") {
                results[i] = scatter_attack(fitness, vocab, d.tree, d.id, trie, evo, *d.marker);
            } else {
                results[i] = move_scatter_attack(fitness, vocab, d.tree, d.id, trie, evo, *d.marker);
            }
        }
    });
    std::ostringstream jl;
    jl << "{\"provenance\":" << nlohmann::json(cfg.provenance()).dump() << "}\n";
    std::size_t ok = 0;
    for (const auto& r : results) {
        auto j = r.to_json();
        j.erase("tree");
        jl << j.dump() << "\n";
        ok += r.success;
    }
    write_file(out_file(c, "attacks.jsonl"), jl.str());
    std::map<std::string, AttackReport> rep{{attack, attack_report(results)}};
    write_file(out_file(c, "attack_curve.csv"), csv_with_header(cfg.provenance(), report_csv(rep)));
    nlohmann::json summary{{"attack", attack},
                           {"seeds", results.size()},
                           {"evaded", ok},
                           {"era", results.empty() ? 0.0 : 1.0 - double(ok) / double(results.size())},
                           {"median_l0", median_l0(results)},
                           {"median_trace", median_trace(results)},
                           {"provenance", cfg.provenance()}};
    write_file(out_file(c, "attack_summary.json"), summary.dump(1) + "\n");
    std::cout << "evaded " << ok << "/" << results.size() << " median_l0 " << median_l0(results) << "\n";
    return 0;
}

std::string fmt_pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100 * v;
    return os.str();
}

int cmd_report(const Common& c, const std::vector<std::string>& metrics, const std::vector<std::string>& attacks) {
    auto cfg = load_config(c);
    if (metrics.empty() && attacks.empty()) throw ConfigError("report needs --metrics or --attacks");
    if (!metrics.empty()) {
        std::ostringstream md, csv;
        md << "| Model | Acc | FPR | Train(m) | VRA A | VRA B | VRA C | VRA D | VRA E |\n";
        md << "|---|---|---|---|---|---|---|---|---|\n";
        csv << "model,acc,fpr,train_m,vra_a,vra_b,vra_c,vra_d,vra_e\n";
        for (const auto& path : metrics) {
            require_path(path, "metrics");
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(read_file(path));
            } catch (const nlohmann::json::exception& e) {
                throw DataError(path + ": " + e.what());
            }
            std::string name = j.value("model", fs::path(path).stem().string());
            std::ostringstream train_m;
            train_m << std::fixed << std::setprecision(2) << j.value("train_minutes", 0.0);
            md << "| " << name << " | " << fmt_pct(j.value("accuracy", 0.0)) << " | " << fmt_pct(j.value("fpr", 0.0))
               << " | " << train_m.str();
            csv << name << ',' << fmt_pct(j.value("accuracy", 0.0)) << ',' << fmt_pct(j.value("fpr", 0.0)) << ','
                << train_m.str();
            for (const char* p : {"A", "B", "C", "D", "E"}) {
                std::string cell = "-";
                if (j.contains("vra") && j["vra"].contains(p)) cell = fmt_pct(j["vra"][p].get<double>());
                md << " | " << cell;
                csv << ',' << cell;
            }
            md << " |\n";
            csv << '\n';
        }
        write_file(out_file(c, "table.md"), "<!-- " + cfg.provenance() + " -->\n" + md.str());
        write_file(out_file(c, "table.csv"), csv_with_header(cfg.provenance(), csv.str()));
        std::cout << md.str();
    }
    if (!attacks.empty()) {
        std::map<std::string, AttackReport> reps;
        for (const auto& spec : attacks) {
            auto eq = spec.find('=');
            std::string name = eq == std::string::npos ? fs::path(spec).parent_path().filename().string()
                                                       : spec.substr(0, eq);
            std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
            require_path(path, "attacks");
            std::vector<AttackResult> results;
            std::istringstream is(read_file(path));
            std::string line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception& e) {
                    throw DataError(path + ": " + e.what());
                }
                if (!j.contains("seed_id")) continue;
                AttackResult r;
                r.seed_id = j.value("seed_id", std::string());
                r.success = j.value("success", false);
                r.l0 = j.value("l0", std::size_t{0});
                r.trace = j.value("trace", std::vector<std::string>{});
                results.push_back(std::move(r));
            }
            reps[name] = attack_report(results);
        }
        write_file(out_file(c, "era.csv"), csv_with_header(cfg.provenance(), report_csv(reps)));
        write_file(out_file(c, "era_l0.svg"), report_svg(reps, false));
        write_file(out_file(c, "era_trace.svg"), report_svg(reps, true));
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"verdoc: verifiably robust PDF malware classifiers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    std::size_t n_benign = 250, n_malicious = 150, learners = 100, max_seeds = 0;
    std::optional<std::size_t> min_df;
    std::optional<double> test_fraction;
    std::string corpus, vocab, features, model, property, mode = "auto", attack = "evolutionary", name;
    std::vector<std::string> metrics, attacks;

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic tree-JSON corpus");
    add_common(gen, common);
    gen->add_option("--benign", n_benign, "benign documents");
    gen->add_option("--malicious", n_malicious, "malicious documents");

    auto* bv = app.add_subcommand("build-vocab", "build the structural-path vocabulary");
    add_common(bv, common);
    bv->add_option("--corpus", corpus, "corpus directory")->required();
    bv->add_option("--min-df", min_df, "minimum document frequency");

    auto* ex = app.add_subcommand("extract", "extract binary feature vectors and split train/test");
    add_common(ex, common);
    ex->add_option("--corpus", corpus, "corpus directory")->required();
    ex->add_option("--vocab", vocab, "vocabulary file")->required();
    ex->add_option("--test-fraction", test_fraction, "held-out fraction");

    auto* tr = app.add_subcommand("train", "train a model");
    add_common(tr, common);
    tr->add_option("--features", features, "training feature file")->required();
    tr->add_option("--vocab", vocab, "vocabulary file")->required();
    tr->add_option("--property", property, "comma-separated properties, or none");
    tr->add_option("--mode", mode, "auto|adv|monotonic|ensemble-ab|ensemble-d");
    tr->add_option("--learners", learners, "boosting rounds for --mode monotonic");

    auto* ve = app.add_subcommand("verify", "compute VRA and per-sample verdicts");
    add_common(ve, common);
    ve->add_option("--model", model, "model file")->required();
    ve->add_option("--features", features, "feature file")->required();
    ve->add_option("--vocab", vocab, "vocabulary file")->required();
    ve->add_option("--property", property, "comma-separated properties");

    auto* at = app.add_subcommand("attack", "run an attack campaign against a model");
    add_common(at, common);
    at->add_option("--model", model, "model file")->required();
    at->add_option("--features", features, "feature file of the attacked rows")->required();
    at->add_option("--vocab", vocab, "vocabulary file")->required();
    at->add_option("--corpus", corpus, "corpus directory (trees and donors)");
    at->add_option("--attack", attack, "bounded|unbounded|evolutionary|move|scatter|move-scatter|mimicry");
    at->add_option("--property", property, "property for the bounded attack");
    at->add_option("--max-seeds", max_seeds, "attack at most this many malicious rows (0 = all)");

    auto* ev = app.add_subcommand("evaluate", "accuracy, FPR, VRA and ERA of a model");
    add_common(ev, common);
    ev->add_option("--model", model, "model file")->required();
    ev->add_option("--features", features, "feature file")->required();
    ev->add_option("--vocab", vocab, "vocabulary file")->required();
    ev->add_option("--property", property, "comma-separated properties");
    ev->add_option("--name", name, "model name in the metrics");

    auto* rp = app.add_subcommand("report", "tables and ERA curves from earlier outputs");
    add_common(rp, common);
    rp->add_option("--metrics", metrics, "metrics.json files");
    rp->add_option("--attacks", attacks, "name=attacks.jsonl entries");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) return cmd_gen_synth(common, n_benign, n_malicious);
        if (*bv) return cmd_build_vocab(common, corpus, min_df);
        if (*ex) return cmd_extract(common, corpus, vocab, test_fraction);
        if (*tr) return cmd_train(common, features, vocab, property, mode, learners);
        if (*ve) return cmd_verify(common, model, features, vocab, property);
        if (*at) return cmd_attack(common, model, corpus, features, vocab, attack, property, max_seeds);
        if (*ev) return cmd_evaluate(common, model, features, vocab, property, name);
        if (*rp) return cmd_report(common, metrics, attacks);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const MalformedDocument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaViolation& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const CorruptModelFile& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}

}  // namespace verdoc
