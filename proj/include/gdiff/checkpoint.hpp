#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/error.hpp"
#include "gdiff/hash.hpp"
#include "gdiff/io.hpp"
#include "gdiff/train.hpp"

namespace gdiff {

/// One optimisation stage in a checkpoint's history.
struct TrainingStage {
    std::string stage;  // "pretrain" or "finetune"
    std::uint64_t seed = 0;
    int epochs = 0;
    double lr = 0.0;
    int batch = 0;
    int grad_accum = 0;
    std::string corpus_hash;
    std::vector<std::string> domains;
    std::vector<std::string> graph_hashes;  // SHA-256 of every training graph's edge list
    std::optional<std::string> held_out;
    std::string prompt_mode = "none";
    double final_loss = 0.0;

    friend bool operator==(const TrainingStage&, const TrainingStage&) = default;
};

struct Checkpoint {
    DenoiserParams params;
    TransitionModel transition;
    std::map<std::string, NodeCountHistogram> node_counts;  // per training domain
    std::string encoder_id;                                  // text encoder used for conditioning
    std::optional<std::string> parent_hash;                  // checkpoint this one was derived from
    std::vector<TrainingStage> provenance;

    /// Pooled node-count histogram across all domains.
    NodeCountHistogram pooled_node_counts() const {
        NodeCountHistogram h;
        for (const auto& [d, hist] : node_counts)
            for (auto [n, c] : hist.counts()) h.add(n, c);
        return h;
    }
};

// Binary layout (all integers and floats little-endian):
//   8 bytes  magic "GDIFFCKP"
//   u32      format version
//   u64      header length L
//   L bytes  JSON header (configs, provenance, tensor table)
//   f64[]    tensors in header order
inline constexpr char kCheckpointMagic[8] = {'G', 'D', 'I', 'F', 'F', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U u;
    std::memcpy(&u, &v, sizeof u);
    for (std::size_t k = 0; k < sizeof u; ++k) out.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos, const std::string& source) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (pos + sizeof(U) > in.size()) throw ParseError(source, 0, "truncated checkpoint");
    U u = 0;
    for (std::size_t k = 0; k < sizeof u; ++k) u |= static_cast<U>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
    pos += sizeof u;
    T v;
    std::memcpy(&v, &u, sizeof v);
    return v;
}

inline nlohmann::ordered_json stage_json(const TrainingStage& s) {
    nlohmann::ordered_json j;
    j["stage"] = s.stage;
    j["seed"] = s.seed;
    j["epochs"] = s.epochs;
    j["lr"] = s.lr;
    j["batch"] = s.batch;
    j["grad_accum"] = s.grad_accum;
    j["corpus_hash"] = s.corpus_hash;
    j["domains"] = s.domains;
    j["graph_hashes"] = s.graph_hashes;
    j["held_out"] = s.held_out ? nlohmann::ordered_json(*s.held_out) : nlohmann::ordered_json(nullptr);
    j["prompt_mode"] = s.prompt_mode;
    j["final_loss"] = s.final_loss;
    return j;
}

inline TrainingStage stage_from_json(const nlohmann::json& j) {
    TrainingStage s;
    s.stage = j.at("stage").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.epochs = j.at("epochs").get<int>();
    s.lr = j.at("lr").get<double>();
    s.batch = j.at("batch").get<int>();
    s.grad_accum = j.at("grad_accum").get<int>();
    s.corpus_hash = j.at("corpus_hash").get<std::string>();
    s.domains = j.at("domains").get<std::vector<std::string>>();
    s.graph_hashes = j.at("graph_hashes").get<std::vector<std::string>>();
    if (!j.at("held_out").is_null()) s.held_out = j.at("held_out").get<std::string>();
    s.prompt_mode = j.at("prompt_mode").get<std::string>();
    s.final_loss = j.at("final_loss").get<double>();
    return s;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    const auto& cfg = ck.params.config;
    const auto& tm = ck.transition;
    if (!(ck.params.space == tm.space)) throw ShapeError("checkpoint: denoiser and transition model spaces differ");
    nlohmann::ordered_json h;
    h["format"] = "gdiff-checkpoint";
    h["category_space"] = {{"d_x", ck.params.space.d_x}, {"d_e", ck.params.space.d_e}};
    h["denoiser"] = {{"hidden_dim", cfg.hidden_dim},         {"layers", cfg.layers},
                     {"n_spectral", cfg.n_spectral},         {"time_embed_dim", cfg.time_embed_dim},
                     {"text_embed_dim", cfg.text_embed_dim}, {"node_weight", cfg.node_weight},
                     {"edge_weight", cfg.edge_weight}};
    h["transition"] = {{"kind", to_string(tm.kind)}, {"T", tm.schedule.T}};
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [d, hist] : ck.node_counts) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (auto [n, c] : hist.counts()) rows.push_back({n, c});
        counts[d] = rows;
    }
    h["node_counts"] = counts;
    h["encoder_id"] = ck.encoder_id;
    h["parent_hash"] = ck.parent_hash ? nlohmann::ordered_json(*ck.parent_hash) : nlohmann::ordered_json(nullptr);
    h["provenance"] = nlohmann::ordered_json::array();
    for (const auto& s : ck.provenance) h["provenance"].push_back(detail::stage_json(s));

    std::vector<std::pair<std::string, const std::vector<double>*>> tensors{
        {"schedule.alpha", &tm.schedule.alpha},
        {"schedule.alpha_bar", &tm.schedule.alpha_bar},
        {"marginals.m_x", &tm.global.m_x},
        {"marginals.m_e", &tm.global.m_e},
    };
    for (const auto& [d, m] : tm.per_domain) {
        tensors.push_back({"domain." + d + ".m_x", &m.m_x});
        tensors.push_back({"domain." + d + ".m_e", &m.m_e});
    }
    tensors.push_back({"weights", &ck.params.weights});
    h["tensors"] = nlohmann::ordered_json::array();
    for (const auto& [name, v] : tensors) h["tensors"].push_back({{"name", name}, {"count", v->size()}});

    const std::string header = h.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint64_t>(out, header.size());
    out += header;
    for (const auto& [name, v] : tensors)
        for (double x : *v) detail::put_le<double>(out, x);
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "<checkpoint>") {
    if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw ParseError(source, 0, "not a checkpoint file (bad magic)");
    std::size_t pos = sizeof kCheckpointMagic;
    const auto version = detail::get_le<std::uint32_t>(bytes, pos, source);
    if (version != kCheckpointVersion)
        throw ParseError(source, 0, "unsupported checkpoint version " + std::to_string(version));
    const auto len = detail::get_le<std::uint64_t>(bytes, pos, source);
    if (pos + len > bytes.size()) throw ParseError(source, 0, "truncated checkpoint header");
    Checkpoint ck;
    try {
        const auto h = nlohmann::json::parse(bytes.substr(pos, len));
        pos += len;
        CategorySpace space{h.at("category_space").at("d_x").get<int>(), h.at("category_space").at("d_e").get<int>()};
        space.validate();
        const auto& d = h.at("denoiser");
        DenoiserConfig cfg;
        cfg.hidden_dim = d.at("hidden_dim").get<int>();
        cfg.layers = d.at("layers").get<int>();
        cfg.n_spectral = d.at("n_spectral").get<int>();
        cfg.time_embed_dim = d.at("time_embed_dim").get<int>();
        cfg.text_embed_dim = d.at("text_embed_dim").get<int>();
        cfg.node_weight = d.at("node_weight").get<double>();
        cfg.edge_weight = d.at("edge_weight").get<double>();
        cfg.validate();
        ck.params.config = cfg;
        ck.params.space = space;
        auto& tm = ck.transition;
        tm.kind = parse_transition_kind(h.at("transition").at("kind").get<std::string>());
        tm.space = space;
        tm.schedule.T = h.at("transition").at("T").get<int>();
        for (const auto& [dom, rows] : h.at("node_counts").items()) {
            NodeCountHistogram hist;
            for (const auto& r : rows) hist.add(r.at(0).get<int>(), r.at(1).get<long long>());
            ck.node_counts[dom] = hist;
        }
        ck.encoder_id = h.at("encoder_id").get<std::string>();
        if (!h.at("parent_hash").is_null()) ck.parent_hash = h.at("parent_hash").get<std::string>();
        for (const auto& s : h.at("provenance")) ck.provenance.push_back(detail::stage_from_json(s));

        for (const auto& t : h.at("tensors")) {
            const auto name = t.at("name").get<std::string>();
            const auto count = t.at("count").get<std::size_t>();
            if (pos + 8 * count > bytes.size()) throw ParseError(source, 0, "truncated tensor '" + name + "'");
            std::vector<double> v(count);
            for (auto& x : v) x = detail::get_le<double>(bytes, pos, source);
            if (name == "schedule.alpha") tm.schedule.alpha = std::move(v);
            else if (name == "schedule.alpha_bar") tm.schedule.alpha_bar = std::move(v);
            else if (name == "marginals.m_x") tm.global.m_x = std::move(v);
            else if (name == "marginals.m_e") tm.global.m_e = std::move(v);
            else if (name == "weights") ck.params.weights = std::move(v);
            else if (name.rfind("domain.", 0) == 0 && name.size() > 11) {
                const std::string dom = name.substr(7, name.size() - 11);
                const std::string field = name.substr(name.size() - 3);
                if (field == "m_x") tm.per_domain[dom].m_x = std::move(v);
                else if (field == "m_e") tm.per_domain[dom].m_e = std::move(v);
                else throw ParseError(source, 0, "unknown tensor '" + name + "'");
            } else {
                throw ParseError(source, 0, "unknown tensor '" + name + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, 0, std::string("malformed checkpoint header: ") + e.what());
    }
    if (pos != bytes.size()) throw ParseError(source, 0, "trailing bytes after checkpoint tensors");
    const auto& tm = ck.transition;
    const auto steps = static_cast<std::size_t>(tm.schedule.T) + 1;
    if (tm.schedule.alpha.size() != steps || tm.schedule.alpha_bar.size() != steps)
        throw ShapeError(source + ": schedule length does not match T");
    if (ck.params.weights.size() != ck.params.layout().total())
        throw ShapeError(source + ": weight count does not match the denoiser config");
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    const std::string bytes = serialize_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return deserialize_checkpoint(detail::read_text(path), path);
}

}  // namespace gdiff
