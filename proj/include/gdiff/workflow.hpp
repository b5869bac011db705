#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdiff/checkpoint.hpp"
#include "gdiff/corpus.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/error.hpp"
#include "gdiff/eval.hpp"
#include "gdiff/hash.hpp"
#include "gdiff/io.hpp"
#include "gdiff/synth.hpp"
#include "gdiff/text.hpp"
#include "gdiff/train.hpp"

namespace gdiff {

inline constexpr int kConfigSchemaVersion = 1;

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Reads a JSON object section, remembering which keys were consumed so that
/// unknown keys can be rejected.
class ConfigSection {
public:
    ConfigSection(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <class T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        used_.insert(key);
        if (!has(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
        return convert<T>(key);
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        return convert<T>(key);
    }

    ConfigSection child(const std::string& key) {
        used_.insert(key);
        static const Json empty = Json::object();
        return ConfigSection(has(key) ? j_.at(key) : empty, where_ + "." + key);
    }

    const Json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

    const std::string& where() const { return where_; }

private:
    template <class T>
    T convert(const std::string& key) const {
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + ": key '" + key + "' has the wrong type");
        }
    }

    const Json& j_;
    std::string where_;
    std::set<std::string> used_;
};

struct RunOptions {
    std::string config_path;                  // used to resolve relative paths
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    bool quiet = true;
};

/// Run directory with an append-only log file.
class RunDir {
public:
    explicit RunDir(const std::string& path) : root_(path) {
        std::filesystem::create_directories(root_);
        log_.open(root_ / "log.txt", std::ios::binary | std::ios::trunc);
        if (!log_) throw Error("cannot create run log in " + root_.string());
    }

    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }
    const std::filesystem::path& root() const { return root_; }

    void log(const std::string& line) {
        log_ << line << '\n';
        log_.flush();
    }

private:
    std::filesystem::path root_;
    std::ofstream log_;
};

struct CommandResult {
    std::string summary;                 // one-line human readable result
    std::vector<std::string> artifacts;  // files written
};

namespace detail {

inline std::string resolve(const RunOptions& opt, const std::string& p) {
    namespace fs = std::filesystem;
    const fs::path path(p);
    if (path.is_absolute() || opt.config_path.empty()) return path.string();
    return (fs::path(opt.config_path).parent_path() / path).lexically_normal().string();
}

inline std::string out_dir(ConfigSection& cfg, const RunOptions& opt) {
    if (opt.out_override) {
        cfg.optional<std::string>("out");
        return *opt.out_override;
    }
    return resolve(opt, cfg.require<std::string>("out"));
}

inline void check_header(ConfigSection& cfg, const std::string& command) {
    const int v = cfg.require<int>("schema_version");
    if (v != kConfigSchemaVersion)
        throw ConfigError(cfg.where() + ": unsupported schema_version " + std::to_string(v) + " (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
    if (auto c = cfg.optional<std::string>("command"); c && *c != command)
        throw ConfigError(cfg.where() + ": config is for '" + *c + "', not '" + command + "'");
    cfg.optional<std::string>("description");
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void write_json(const std::filesystem::path& p, const OrderedJson& j) { write_text(p, j.dump(2) + "\n"); }

/// Content hash of a corpus: domains, splits, prompts and graph edge lists.
inline std::string corpus_hash(const Corpus& c) {
    Sha256 h;
    h.update(std::to_string(c.space.d_x) + " " + std::to_string(c.space.d_e) + "\n");
    for (const auto& e : c.entries) {
        h.update(e.domain + "\t" + to_string(e.split) + "\t" + e.name + "\t" + e.prompt.value_or("") + "\n");
        h.update(to_edge_list(e.graph));
    }
    return h.hex();
}

inline Corpus load_corpus_at(const RunOptions& opt, const std::string& path) {
    const std::string p = resolve(opt, path);
    if (!std::filesystem::exists(p)) throw Error("corpus manifest not found: " + p);
    return load_corpus(p);
}

// ---- prompt handling ------------------------------------------------------

enum class PromptMode { None, Domain, User, Property };

inline PromptMode parse_prompt_mode(const std::string& s) {
    if (s == "none") return PromptMode::None;
    if (s == "domain") return PromptMode::Domain;
    if (s == "user" || s == "user-prompt") return PromptMode::User;
    if (s == "property") return PromptMode::Property;
    throw ConfigError("unknown prompt_mode '" + s + "' (expected none, domain, user or property)");
}

inline std::string to_string(PromptMode m) {
    switch (m) {
        case PromptMode::None: return "none";
        case PromptMode::Domain: return "domain";
        case PromptMode::User: return "user";
        case PromptMode::Property: return "property";
    }
    return "none";
}

/// Prompt text for an entry under a prompt mode (nullopt in mode none).
inline std::optional<std::string> entry_prompt(const CorpusEntry& e, PromptMode mode) {
    if (mode == PromptMode::None) return std::nullopt;
    if (e.prompt) return e.prompt;
    if (mode == PromptMode::Domain) return render_domain_prompt(e.domain, e.name.empty() ? e.domain : e.name, 0).text;
    throw Error("corpus entry '" + e.name + "' (domain " + e.domain + ") has no prompt but prompt_mode is " +
                to_string(mode));
}

/// Maps prompt text to an embedding: the precomputed table when given, the
/// hashed encoder otherwise.
struct Embedder {
    int dim = 0;
    std::optional<EmbeddingTable> table;
    bool strict = true;

    std::string encoder_id() const {
        if (dim == 0) return "";
        return table ? (table->encoder_id.empty() ? "precomputed" : table->encoder_id) : std::string(kHashEncoderId);
    }

    std::vector<double> operator()(const std::string& text) const {
        if (table) return table->lookup(text, strict).vector;
        return encode(text, dim).vector;
    }
};

inline Embedder make_embedder(ConfigSection& cfg, const RunOptions& opt, int dim, PromptMode mode) {
    Embedder emb;
    emb.dim = dim;
    auto section = cfg.child("embeddings");
    const auto path = section.optional<std::string>("path");
    emb.strict = section.get<bool>("strict", true);
    section.finish();
    if (mode == PromptMode::None) return emb;
    if (dim <= 0) throw ConfigError("prompt_mode " + to_string(mode) + " needs denoiser.text_embed_dim > 0");
    if (path) emb.table = load_embeddings(resolve(opt, *path), dim);
    return emb;
}

// ---- denoiser / optimizer sections ------------------------------------------

inline DenoiserConfig read_denoiser(ConfigSection s) {
    DenoiserConfig d;
    d.hidden_dim = s.get<int>("hidden_dim", d.hidden_dim);
    d.layers = s.get<int>("layers", d.layers);
    d.n_spectral = s.get<int>("n_spectral", d.n_spectral);
    d.time_embed_dim = s.get<int>("time_embed_dim", d.time_embed_dim);
    d.text_embed_dim = s.get<int>("text_embed_dim", d.text_embed_dim);
    d.node_weight = s.get<double>("node_weight", d.node_weight);
    d.edge_weight = s.get<double>("edge_weight", d.edge_weight);
    s.finish();
    d.validate();
    return d;
}

inline OptimConfig read_optim(ConfigSection s, const RunOptions& opt) {
    OptimConfig o;
    o.lr = s.get<double>("lr", o.lr);
    o.epochs = s.get<int>("epochs", o.epochs);
    o.batch = s.get<int>("batch", o.batch);
    o.grad_accum = s.get<int>("grad_accum", o.grad_accum);
    o.seed = s.get<std::uint64_t>("seed", o.seed);
    o.weight_decay = s.get<double>("weight_decay", o.weight_decay);
    s.finish();
    if (opt.seed_override) o.seed = *opt.seed_override;
    o.validate();
    return o;
}

inline SplitRatios read_split(ConfigSection s) {
    SplitRatios r;
    r.train = s.get<double>("train", r.train);
    r.val = s.get<double>("val", r.val);
    r.test = s.get<double>("test", r.test);
    s.finish();
    return r;
}

inline OrderedJson report_json(const TrainReport& r) {
    OrderedJson j;
    j["epochs"] = r.epochs;
    j["final_loss"] = r.final_loss;
    j["epoch_loss"] = r.epoch_loss;
    return j;
}

inline void log_training(RunDir& run, const TrainReport& r) {
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
        run.log("epoch " + std::to_string(e + 1) + " loss " + format_double(r.epoch_loss[e]));
    run.log("training wall time " + format_double(r.wall_seconds) + " s");
}

inline std::vector<std::string> graph_hashes(std::span<const TrainItem> items) {
    std::vector<std::string> out;
    for (const auto& it : items) out.push_back(graph_hash(*it.graph));
    return out;
}

inline std::vector<std::string> item_domains(std::span<const TrainItem> items) {
    std::vector<std::string> out;
    for (const auto& it : items)
        if (it.domain && std::find(out.begin(), out.end(), *it.domain) == out.end()) out.push_back(*it.domain);
    return out;
}

inline TextProvider text_provider(PromptMode mode, const Embedder& emb) {
    if (mode == PromptMode::None) return {};
    return [mode, emb](const CorpusEntry& e) { return emb(*entry_prompt(e, mode)); };
}

inline Corpus without_domain(const Corpus& c, const std::optional<std::string>& held_out) {
    Corpus out;
    out.space = c.space;
    for (const auto& e : c.entries)
        if (!held_out || e.domain != *held_out) out.entries.push_back(e);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest

inline CommandResult cmd_ingest(const Json& config, const RunOptions& opt) {
    namespace fs = std::filesystem;
    ConfigSection cfg(config, "ingest");
    detail::check_header(cfg, "ingest");
    RunDir run(detail::out_dir(cfg, opt));
    std::uint64_t seed = cfg.get<std::uint64_t>("seed", 0);
    if (opt.seed_override) seed = *opt.seed_override;
    const auto ratios = detail::read_split(cfg.child("split"));
    const int max_nodes = cfg.get<int>("max_nodes", 0);
    const auto prompt_mode = detail::parse_prompt_mode(cfg.get<std::string>("prompts", "none"));
    auto ego_defaults = cfg.child("ego");
    const int ego_hops = ego_defaults.get<int>("hops", 2);
    const int ego_count = ego_defaults.get<int>("count", 64);
    ego_defaults.finish();
    std::vector<std::string> declared;
    std::vector<LabeledGraph> graphs;
    std::optional<CategorySpace> space;

    const Json& sources = cfg.raw("sources");
    if (!sources.is_array() || sources.empty()) throw ConfigError("ingest: 'sources' must be a non-empty array");
    for (std::size_t s = 0; s < sources.size(); ++s) {
        ConfigSection src(sources[s], "ingest.sources[" + std::to_string(s) + "]");
        const std::string path = detail::resolve(opt, src.require<std::string>("path"));
        const std::string domain = src.require<std::string>("domain");
        const auto prompt = src.optional<std::string>("prompt");
        auto ego = src.child("ego");
        const bool ego_forced = ego.has("max_nodes");
        const int hops = ego.get<int>("hops", ego_hops);
        const int budget = ego.get<int>("max_nodes", max_nodes);
        const int count = ego.get<int>("count", ego_count);
        ego.finish();
        src.finish();
        if (std::find(declared.begin(), declared.end(), domain) == declared.end()) declared.push_back(domain);

        std::vector<std::string> files;
        if (!fs::exists(path)) throw Error("ingest: input not found: " + path);
        if (fs::is_directory(path)) {
            for (const auto& f : fs::directory_iterator(path))
                if (f.is_regular_file()) files.push_back(f.path().string());
            std::sort(files.begin(), files.end());
        } else {
            files.push_back(path);
        }
        for (const auto& file : files) {
            Graph g = ingest(file, domain, space).front();
            if (!space) space = g.space();
            const std::string stem = fs::path(file).stem().string();
            if ((ego_forced || (budget > 0 && g.n() > budget)) && budget > 0) {
                auto res = ego_sample(g, hops, budget, count, derive_seed(seed, file));
                run.log("ego-sampled " + file + ": " + std::to_string(res.graphs.size()) + " subgraphs, " +
                        std::to_string(res.rejected) + " rejected draws" + (res.exhausted ? " (retry cap reached)" : ""));
                for (std::size_t k = 0; k < res.graphs.size(); ++k)
                    graphs.push_back({std::move(res.graphs[k]), domain, prompt, stem + "_ego" + std::to_string(k)});
            } else {
                graphs.push_back({std::move(g), domain, prompt, stem});
            }
            run.log("ingested " + file + " as domain " + domain);
        }
    }
    cfg.finish();
    if (prompt_mode == detail::PromptMode::Domain)
        for (auto& lg : graphs)
            if (!lg.prompt) lg.prompt = render_domain_prompt(lg.domain, lg.name, derive_seed(seed, lg.name)).text;

    Corpus corpus = split(std::move(graphs), ratios, seed);
    const std::string manifest = write_corpus(corpus, run.path("corpus").string());
    const auto stats = domain_stats(corpus, declared);
    for (const auto& w : stats.warnings) run.log("warning: " + w);
    detail::write_text(run.path("stats.tsv"), format_stats_tsv(stats));
    OrderedJson rep;
    rep["command"] = "ingest";
    rep["manifest"] = "corpus/manifest.json";
    rep["manifest_sha256"] = sha256_file(manifest);
    rep["corpus_hash"] = detail::corpus_hash(corpus);
    rep["entries"] = corpus.entries.size();
    rep["seed"] = seed;
    rep["warnings"] = stats.warnings;
    detail::write_json(run.path("report.json"), rep);
    return {"ingested " + std::to_string(corpus.entries.size()) + " graphs into " + manifest,
            {manifest, run.path("stats.tsv").string(), run.path("report.json").string()}};
}

// ---------------------------------------------------------------------------
// pretrain / finetune

inline CommandResult cmd_pretrain(const Json& config, const RunOptions& opt) {
    ConfigSection cfg(config, "pretrain");
    detail::check_header(cfg, "pretrain");
    RunDir run(detail::out_dir(cfg, opt));
    const Corpus corpus = detail::load_corpus_at(opt, cfg.require<std::string>("corpus"));
    const auto held_out = cfg.optional<std::string>("held_out");
    const auto kind = parse_transition_kind(cfg.get<std::string>("transition", "marginal"));
    const int T = cfg.get<int>("diffusion_steps", 500);
    const auto resume = cfg.optional<std::string>("resume");
    const auto mode = detail::parse_prompt_mode(cfg.get<std::string>("prompt_mode", "none"));
    const OptimConfig optim = detail::read_optim(cfg.child("optim"), opt);

    Checkpoint ck;
    std::optional<std::string> resumed_hash;
    if (resume) {
        if (cfg.has("denoiser")) throw ConfigError("pretrain: 'denoiser' cannot be combined with 'resume'");
        const std::string path = detail::resolve(opt, *resume);
        ck = load_checkpoint(path);
        resumed_hash = sha256_file(path);
        if (!(ck.params.space == corpus.space)) throw ShapeError(path + ": checkpoint category space differs from the corpus");
    } else {
        const DenoiserConfig dcfg = detail::read_denoiser(cfg.child("denoiser"));
        const Corpus fit_on = detail::without_domain(corpus, held_out);
        ck.transition = fit_marginals(fit_on, kind, cosine_schedule(T));
        ck.params = DenoiserParams::initialize(dcfg, corpus.space, derive_seed(optim.seed, "init"));
    }
    const detail::Embedder emb = detail::make_embedder(cfg, opt, ck.params.config.text_embed_dim, mode);
    cfg.finish();

    std::vector<std::string> exclude;
    if (held_out) exclude.push_back(*held_out);
    const auto items = training_items(corpus, Split::Train, detail::text_provider(mode, emb), exclude);
    if (items.empty()) throw Error("pretrain: no Train graphs left after excluding the held-out domain");
    run.log("pretrain on " + std::to_string(items.size()) + " graphs" + (held_out ? ", held out " + *held_out : ""));

    TrainReport report;
    if (optim.epochs > 0 || !resume) {
        try {
            report = train_in_place(ck.params, items, ck.transition, optim);
        } catch (const NumericError& e) {
            throw NumericError(std::string("pretrain: ") + e.what());
        }
        detail::log_training(run, report);
        TrainingStage st;
        st.stage = "pretrain";
        st.seed = optim.seed;
        st.epochs = optim.epochs;
        st.lr = optim.lr;
        st.batch = optim.batch;
        st.grad_accum = optim.grad_accum;
        st.corpus_hash = detail::corpus_hash(corpus);
        st.domains = detail::item_domains(items);
        st.graph_hashes = detail::graph_hashes(items);
        st.held_out = held_out;
        st.prompt_mode = detail::to_string(mode);
        st.final_loss = report.final_loss;
        ck.provenance.push_back(st);
        if (resumed_hash) ck.parent_hash = resumed_hash;
        ck.encoder_id = emb.encoder_id();
        if (!resume) {
            for (const auto& it : items) ck.node_counts[*it.domain].add(it.graph->n());
        }
    } else {
        run.log("resume with zero epochs: checkpoint left unchanged");
    }
    const auto ckpath = run.path("checkpoint.gdc");
    save_checkpoint(ck, ckpath.string());
    OrderedJson rep;
    rep["command"] = "pretrain";
    rep["checkpoint_sha256"] = sha256_file(ckpath.string());
    rep["train_graphs"] = items.size();
    rep["held_out"] = held_out ? OrderedJson(*held_out) : OrderedJson(nullptr);
    rep["train_report"] = detail::report_json(report);
    detail::write_json(run.path("report.json"), rep);
    return {"wrote " + ckpath.string(), {ckpath.string(), run.path("report.json").string()}};
}

inline CommandResult cmd_finetune(const Json& config, const RunOptions& opt) {
    ConfigSection cfg(config, "finetune");
    detail::check_header(cfg, "finetune");
    RunDir run(detail::out_dir(cfg, opt));
    const std::string parent_path = detail::resolve(opt, cfg.require<std::string>("checkpoint"));
    Checkpoint ck = load_checkpoint(parent_path);
    const std::string parent_hash = sha256_file(parent_path);
    const Corpus corpus = detail::load_corpus_at(opt, cfg.require<std::string>("corpus"));
    if (!(corpus.space == ck.params.space))
        throw ShapeError("finetune: corpus category space differs from checkpoint " + parent_path);
    const auto domain = cfg.optional<std::string>("domain");
    const double fraction = cfg.get<double>("train_fraction", 1.0);
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("finetune: train_fraction must lie in (0, 1]");
    const bool refit = cfg.get<bool>("refit_transition", false);
    const auto mode = detail::parse_prompt_mode(cfg.get<std::string>("prompt_mode", "none"));
    const OptimConfig optim = detail::read_optim(cfg.child("optim"), opt);
    const detail::Embedder emb = detail::make_embedder(cfg, opt, ck.params.config.text_embed_dim, mode);
    cfg.finish();

    Corpus sub;
    sub.space = corpus.space;
    for (const auto& e : corpus.entries)
        if (!domain || e.domain == *domain) sub.entries.push_back(e);
    auto items = training_items(sub, Split::Train, detail::text_provider(mode, emb));
    if (items.empty()) throw Error("finetune: no Train graphs" + (domain ? " in domain " + *domain : std::string()));
    if (fraction < 1.0) {
        Rng rng(derive_seed(optim.seed, "train-fraction"));
        rng.shuffle(items);
        const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(items.size()))));
        items.resize(keep);
    }
    if (refit) {
        Corpus fit_on;
        fit_on.space = sub.space;
        for (const auto& it : items) fit_on.entries.push_back({*it.graph, it.domain.value_or(""), Split::Train, {}, ""});
        ck.transition = fit_marginals(fit_on, ck.transition.kind, ck.transition.schedule);
    }
    run.log("finetune on " + std::to_string(items.size()) + " graphs from " + parent_path);
    TrainReport report;
    try {
        report = train_in_place(ck.params, items, ck.transition, optim);
    } catch (const NumericError& e) {
        throw NumericError(std::string("finetune: ") + e.what());
    }
    detail::log_training(run, report);

    TrainingStage st;
    st.stage = "finetune";
    st.seed = optim.seed;
    st.epochs = optim.epochs;
    st.lr = optim.lr;
    st.batch = optim.batch;
    st.grad_accum = optim.grad_accum;
    st.corpus_hash = detail::corpus_hash(sub);
    st.domains = detail::item_domains(items);
    st.graph_hashes = detail::graph_hashes(items);
    st.prompt_mode = detail::to_string(mode);
    st.final_loss = report.final_loss;
    ck.provenance.push_back(st);
    ck.parent_hash = parent_hash;
    if (mode != detail::PromptMode::None) ck.encoder_id = emb.encoder_id();
    std::map<std::string, NodeCountHistogram> counts;
    for (const auto& it : items) counts[*it.domain].add(it.graph->n());
    for (auto& [d, h] : counts) ck.node_counts[d] = h;

    const auto ckpath = run.path("checkpoint.gdc");
    save_checkpoint(ck, ckpath.string());
    OrderedJson rep;
    rep["command"] = "finetune";
    rep["parent_checkpoint_sha256"] = parent_hash;
    rep["checkpoint_sha256"] = sha256_file(ckpath.string());
    rep["train_graphs"] = items.size();
    rep["train_report"] = detail::report_json(report);
    detail::write_json(run.path("report.json"), rep);
    return {"wrote " + ckpath.string(), {ckpath.string(), run.path("report.json").string()}};
}

// ---------------------------------------------------------------------------
// sample

namespace detail {

struct SampleSlot {
    int n = 0;
    std::optional<std::string> domain;
    std::optional<std::string> prompt;
};

inline CommandResult run_sample(ConfigSection& cfg, const RunOptions& opt, RunDir& run, const std::string& subdir) {
    namespace fs = std::filesystem;
    const std::string ckpath = resolve(opt, cfg.require<std::string>("checkpoint"));
    const Checkpoint ck = load_checkpoint(ckpath);
    const std::string ck_hash = sha256_file(ckpath);
    const int count = cfg.get<int>("count", 100);
    if (count < 1) throw ConfigError(cfg.where() + ": count must be >= 1");
    std::uint64_t seed = cfg.get<std::uint64_t>("seed", 0);
    if (opt.seed_override) seed = *opt.seed_override;
    const auto fixed_n = cfg.optional<int>("n_nodes");
    const auto domain = cfg.optional<std::string>("domain");
    const auto mode = parse_prompt_mode(cfg.get<std::string>("prompt_mode", "none"));
    const bool shuffle = cfg.get<bool>("shuffle_prompts", false);
    const auto corpus_path = cfg.optional<std::string>("corpus");
    const auto split_name = cfg.get<std::string>("split", "test");
    const auto prompts = cfg.optional<std::vector<std::string>>("prompts");
    const Embedder emb = make_embedder(cfg, opt, ck.params.config.text_embed_dim, mode);

    Rng rng(derive_seed(seed, "slots"));
    std::vector<SampleSlot> slots(static_cast<std::size_t>(count));
    if (corpus_path) {
        const Corpus corpus = load_corpus_at(opt, *corpus_path);
        const Split sp = parse_split(split_name);
        const auto entries = corpus.select(sp, domain ? &*domain : nullptr);
        if (entries.empty())
            throw Error("sample: corpus " + *corpus_path + " has no " + split_name + " graphs" +
                        (domain ? " in domain " + *domain : std::string()));
        // Node counts follow the training histogram of the slot's domain; a
        // domain the model never saw falls back to the selected split.
        std::map<std::string, NodeCountHistogram> hist;
        for (const auto* e : entries)
            if (!ck.node_counts.count(e->domain)) hist[e->domain].add(e->graph.n());
        for (const auto& [d, h] : ck.node_counts) hist[d] = h;
        for (int i = 0; i < count; ++i) {
            const auto* e = entries[static_cast<std::size_t>(i) % entries.size()];
            auto& s = slots[static_cast<std::size_t>(i)];
            s.domain = e->domain;
            s.n = fixed_n ? *fixed_n : hist[e->domain].draw(rng);
            s.prompt = entry_prompt(*e, mode);
        }
    } else {
        NodeCountHistogram h;
        if (!fixed_n) {
            if (domain && ck.node_counts.count(*domain)) h = ck.node_counts.at(*domain);
            else if (domain) throw Error("sample: checkpoint has no node-count histogram for domain '" + *domain +
                                         "'; set n_nodes or give a corpus");
            else h = ck.pooled_node_counts();
        }
        if (mode != PromptMode::None && (!prompts || prompts->empty()))
            throw ConfigError(cfg.where() + ": prompt_mode " + to_string(mode) + " needs 'prompts' or 'corpus'");
        for (int i = 0; i < count; ++i) {
            auto& s = slots[static_cast<std::size_t>(i)];
            s.domain = domain;
            s.n = fixed_n ? *fixed_n : h.draw(rng);
            if (mode != PromptMode::None) s.prompt = (*prompts)[static_cast<std::size_t>(i) % prompts->size()];
        }
    }
    cfg.finish();
    if (shuffle) {
        std::vector<std::optional<std::string>> ps;
        for (const auto& s : slots) ps.push_back(s.prompt);
        Rng srng(derive_seed(seed, "shuffle-prompts"));
        srng.shuffle(ps);
        for (std::size_t i = 0; i < slots.size(); ++i) slots[i].prompt = ps[i];
    }

    const fs::path dir = run.path(subdir);
    fs::create_directories(dir);
    for (const auto& f : fs::directory_iterator(dir))
        if (f.is_regular_file()) fs::remove(f.path());
    OrderedJson manifest;
    manifest["format"] = kManifestFormat;
    manifest["version"] = kManifestVersion;
    manifest["category_space"] = {{"d_x", ck.params.space.d_x}, {"d_e", ck.params.space.d_e}};
    manifest["entries"] = OrderedJson::array();
    for (int i = 0; i < count; ++i) {
        const auto& s = slots[static_cast<std::size_t>(i)];
        std::vector<double> text;
        if (s.prompt) text = emb(*s.prompt);
        const auto tm_domain = ck.transition.kind == TransitionKind::DomainSpecific ? s.domain : std::nullopt;
        Rng grng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const Graph g = sample(ck.params, ck.transition, s.n, grng, tm_domain, text);
        char name[32];
        std::snprintf(name, sizeof name, "sample_%05d", i);
        write_text(dir / (std::string(name) + ".txt"), to_edge_list(g));
        OrderedJson row;
        row["path"] = std::string(name) + ".txt";
        row["domain"] = s.domain.value_or("generated");
        row["split"] = "test";
        row["name"] = name;
        if (s.prompt) row["prompt"] = *s.prompt;
        manifest["entries"].push_back(row);
    }
    manifest["provenance"] = {{"checkpoint_sha256", ck_hash},
                              {"seed", seed},
                              {"count", count},
                              {"prompt_mode", to_string(mode)},
                              {"shuffle_prompts", shuffle}};
    write_json(dir / "manifest.json", manifest);
    run.log("sampled " + std::to_string(count) + " graphs from " + ckpath);
    return {"wrote " + std::to_string(count) + " graphs to " + dir.string(), {(dir / "manifest.json").string()}};
}

}  // namespace detail

inline CommandResult cmd_sample(const Json& config, const RunOptions& opt) {
    ConfigSection cfg(config, "sample");
    detail::check_header(cfg, "sample");
    RunDir run(detail::out_dir(cfg, opt));
    auto res = detail::run_sample(cfg, opt, run, "samples");
    OrderedJson rep;
    rep["command"] = "sample";
    rep["manifest"] = "samples/manifest.json";
    rep["manifest_sha256"] = sha256_file(run.path("samples/manifest.json").string());
    detail::write_json(run.path("report.json"), rep);
    res.artifacts.push_back(run.path("report.json").string());
    return res;
}

// ---------------------------------------------------------------------------
// eval

namespace detail {

inline std::string generated_manifest(const RunOptions& opt, const std::string& p) {
    namespace fs = std::filesystem;
    const std::string path = resolve(opt, p);
    if (fs::is_directory(path)) return (fs::path(path) / "manifest.json").string();
    return path;
}

inline std::vector<Graph> graphs_of(const Corpus& c, std::optional<Split> split, const std::optional<std::string>& domain) {
    std::vector<Graph> out;
    for (const auto* e : c.select(split, domain ? &*domain : nullptr)) out.push_back(e->graph);
    return out;
}

inline OrderedJson mmd_json(const MmdReport& r) {
    OrderedJson j;
    j["deg"] = r.deg;
    j["cc"] = r.cc;
    j["spec"] = r.spec;
    j["orb"] = r.orb;
    j["reference_size"] = r.m;
    j["generated_size"] = r.n;
    return j;
}

}  // namespace detail

inline CommandResult cmd_eval(const Json& config, const RunOptions& opt) {
    namespace fs = std::filesystem;
    ConfigSection cfg(config, "eval");
    detail::check_header(cfg, "eval");
    RunDir run(detail::out_dir(cfg, opt));

    auto mcfg = cfg.child("mmd");
    MmdConfig mmd_cfg;
    mmd_cfg.sigma = mcfg.get<double>("sigma", mmd_cfg.sigma);
    mmd_cfg.cc_bins = mcfg.get<int>("cc_bins", mmd_cfg.cc_bins);
    mmd_cfg.spec_bins = mcfg.get<int>("spec_bins", mmd_cfg.spec_bins);
    mmd_cfg.distance = parse_hist_distance(mcfg.get<std::string>("distance", "squared_euclidean"));
    mcfg.finish();
    mmd_cfg.validate();

    auto ref = cfg.child("reference");
    const std::string ref_path = detail::resolve(opt, ref.require<std::string>("corpus"));
    const auto ref_split = parse_split(ref.get<std::string>("split", "test"));
    const auto ref_domain = ref.optional<std::string>("domain");
    ref.finish();
    const bool by_domain = cfg.get<bool>("group_by_domain", false);

    std::string gen_manifest;
    std::optional<Split> gen_split;
    OrderedJson sample_echo = nullptr;
    if (cfg.has("sample")) {
        if (cfg.has("generated")) throw ConfigError("eval: give either 'generated' or 'sample', not both");
        auto s = cfg.child("sample");
        detail::run_sample(s, opt, run, "samples");
        gen_manifest = run.path("samples/manifest.json").string();
        sample_echo = cfg.raw("sample");
    } else {
        auto gen = cfg.child("generated");
        gen_manifest = detail::generated_manifest(opt, gen.require<std::string>("corpus"));
        if (auto sp = gen.optional<std::string>("split")) gen_split = parse_split(*sp);
        gen.finish();
    }
    cfg.finish();
    if (!fs::exists(ref_path)) throw Error("eval: reference manifest not found: " + ref_path);
    if (!fs::exists(gen_manifest)) throw Error("eval: generated manifest not found: " + gen_manifest);
    const Corpus ref_corpus = load_corpus(ref_path);
    const Corpus gen_corpus = load_corpus(gen_manifest);

    OrderedJson rep;
    rep["command"] = "eval";
    rep["config"] = {{"sigma", mmd_cfg.sigma},
                     {"distance", to_string(mmd_cfg.distance)},
                     {"bins", {{"degree", "max_degree+1"}, {"cc", mmd_cfg.cc_bins}, {"spec", mmd_cfg.spec_bins}}}};
    rep["reference"] = {{"manifest_sha256", sha256_file(ref_path)},
                        {"split", to_string(ref_split)},
                        {"domain", ref_domain ? OrderedJson(*ref_domain) : OrderedJson(nullptr)}};
    rep["generated"] = {{"manifest_sha256", sha256_file(gen_manifest)}};
    {
        const auto gj = Json::parse(detail::read_text(gen_manifest));
        if (gj.contains("provenance")) rep["generated"]["provenance"] = gj.at("provenance");
    }
    if (!sample_echo.is_null()) rep["sample_config"] = sample_echo;

    const auto ref_graphs = detail::graphs_of(ref_corpus, ref_split, ref_domain);
    const auto gen_graphs = detail::graphs_of(gen_corpus, gen_split, std::nullopt);
    if (ref_graphs.empty()) throw Error("eval: reference set " + ref_path + " is empty for the chosen split/domain");
    if (gen_graphs.empty()) throw Error("eval: generated set " + gen_manifest + " is empty");
    const MmdReport overall = report(ref_graphs, gen_graphs, mmd_cfg);
    rep["mmd"] = detail::mmd_json(overall);
    std::string summary = "DEG " + detail::format_double(overall.deg) + " CC " + detail::format_double(overall.cc) +
                          " Spec " + detail::format_double(overall.spec) + " Orb " + detail::format_double(overall.orb);
    if (by_domain) {
        OrderedJson per = OrderedJson::object();
        for (const auto& d : gen_corpus.domains()) {
            const auto r = detail::graphs_of(ref_corpus, ref_split, d);
            const auto g = detail::graphs_of(gen_corpus, gen_split, d);
            if (r.empty() || g.empty()) {
                run.log("warning: domain " + d + " missing from the reference or generated set; skipped");
                continue;
            }
            per[d] = detail::mmd_json(report(r, g, mmd_cfg));
        }
        rep["per_domain"] = per;
    }
    detail::write_json(run.path("report.json"), rep);
    run.log("eval: " + summary);
    return {summary, {run.path("report.json").string()}};
}

// ---------------------------------------------------------------------------
// synth

inline CommandResult cmd_synth(const Json& config, const RunOptions& opt) {
    ConfigSection cfg(config, "synth");
    detail::check_header(cfg, "synth");
    RunDir run(detail::out_dir(cfg, opt));
    const std::string mode = cfg.get<std::string>("mode", "property");
    std::uint64_t seed = cfg.get<std::uint64_t>("seed", 0);
    if (opt.seed_override) seed = *opt.seed_override;
    const SplitRatios ratios = detail::read_split(cfg.child("split"));
    Corpus corpus;
    if (mode == "property") {
        PropertyCorpusConfig pc;
        pc.seed = seed;
        pc.ratios = ratios;
        pc.property = parse_property_kind(cfg.get<std::string>("property", "CC"));
        pc.budget = cfg.get<int>("budget", pc.budget);
        pc.n_min = cfg.get<int>("n_min", pc.n_min);
        pc.n_max = cfg.get<int>("n_max", pc.n_max);
        pc.k_min = cfg.get<int>("k_min", pc.k_min);
        if (cfg.has("thresholds")) {
            auto th = cfg.child("thresholds");
            pc.thresholds = PropertyThresholds{th.require<double>("low"), th.require<double>("high")};
            th.finish();
        }
        cfg.finish();
        corpus = build_property_corpus(pc);
    } else if (mode == "fixed") {
        auto ws = cfg.child("ws");
        WsCorpusConfig wc;
        wc.seed = seed;
        wc.ratios = ratios;
        wc.count = ws.get<int>("count", wc.count);
        wc.n = ws.get<int>("n", wc.n);
        wc.k = ws.get<int>("k", wc.k);
        wc.p_min = ws.get<double>("p_min", wc.p_min);
        wc.p_max = ws.get<double>("p_max", wc.p_max);
        wc.domain = ws.get<std::string>("domain", wc.domain);
        ws.finish();
        cfg.finish();
        corpus = build_ws_corpus(wc);
    } else {
        throw ConfigError("synth: unknown mode '" + mode + "' (expected property or fixed)");
    }
    const std::string manifest = write_corpus(corpus, run.path("corpus").string());
    const auto stats = domain_stats(corpus);
    detail::write_text(run.path("stats.tsv"), format_stats_tsv(stats));
    OrderedJson rep;
    rep["command"] = "synth";
    rep["mode"] = mode;
    rep["seed"] = seed;
    rep["entries"] = corpus.entries.size();
    rep["manifest_sha256"] = sha256_file(manifest);
    rep["corpus_hash"] = detail::corpus_hash(corpus);
    OrderedJson groups = OrderedJson::object();
    for (const auto& r : stats.rows)
        groups[r.domain] = {{"count", r.count}, {"avg_degree", r.avg_degree.mean}, {"avg_clustering", r.avg_clustering.mean}};
    rep["groups"] = groups;
    detail::write_json(run.path("report.json"), rep);
    run.log("synthesized " + std::to_string(corpus.entries.size()) + " graphs");
    return {"synthesized " + std::to_string(corpus.entries.size()) + " graphs into " + manifest,
            {manifest, run.path("report.json").string()}};
}

// ---------------------------------------------------------------------------

inline const std::map<std::string, std::function<CommandResult(const Json&, const RunOptions&)>>& commands() {
    static const std::map<std::string, std::function<CommandResult(const Json&, const RunOptions&)>> table{
        {"ingest", cmd_ingest}, {"pretrain", cmd_pretrain}, {"finetune", cmd_finetune},
        {"sample", cmd_sample}, {"eval", cmd_eval},         {"synth", cmd_synth},
    };
    return table;
}

inline Json read_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error("config file not found: " + path);
    try {
        return Json::parse(detail::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

inline CommandResult run_command(const std::string& verb, const std::string& config_path, RunOptions opt) {
    auto it = commands().find(verb);
    if (it == commands().end()) throw ConfigError("unknown command '" + verb + "'");
    opt.config_path = config_path;
    return it->second(read_config(config_path), opt);
}

}  // namespace gdiff
