#include <fstream>
#include <sstream>

#include "dahcr/errors.hpp"
#include "dahcr/harness.hpp"
#include "json.hpp"

namespace dahcr {

using nlohmann::json;

namespace {

json to_json(const ExperimentConfig& c) {
    json j;
    j["agent"] = {
        {"gamma", c.agent.gamma},
        {"tau", c.agent.tau},
        {"batch_size", c.agent.batch_size},
        {"lr", c.agent.lr},
        {"weight_decay", c.agent.weight_decay},
        {"target_sync_every", c.agent.target_sync_every},
        {"buffer_capacity", c.agent.buffer_capacity},
        {"eps_start", c.agent.eps_start},
        {"eps_end", c.agent.eps_end},
        {"eps_decay_steps", c.agent.eps_decay_steps},
        {"dueling_mean_subtract", c.agent.dueling_mean_subtract},
        {"l1_updates_encoder", c.agent.l1_updates_encoder},
        {"hierarchy", c.agent.hierarchy},
        {"gumbel", c.agent.gumbel},
        {"intrinsic", c.agent.intrinsic},
    };
    j["encoder"] = {
        {"layers", c.agent.encoder.layers},
        {"heads", c.agent.encoder.heads},
        {"residual", c.agent.encoder.residual},
        {"item_cap", c.agent.encoder.item_cap},
        {"embed_dim", c.agent.encoder.embed_dim},
        {"hidden", c.agent.encoder.hidden},
        {"hypergraph", c.agent.encoder.hypergraph},
    };
    j["env"] = {
        {"max_turns", c.env.max_turns},
        {"rec_size", c.env.rec_size},
        {"r_rec_acc", c.env.r_rec_acc},
        {"r_rec_rej", c.env.r_rec_rej},
        {"r_ask_acc", c.env.r_ask_acc},
        {"r_ask_rej", c.env.r_ask_rej},
        {"r_quit", c.env.r_quit},
    };
    j["train"] = {
        {"episodes", c.train.episodes},
        {"eval_every", c.train.eval_every},
        {"eval_episodes", c.train.eval_episodes},
        {"train_every", c.train.train_every},
        {"pretrain", c.train.pretrain},
        {"eval_threads", c.train.eval_threads},
    };
    j["transe"] = {
        {"margin", c.transe.margin},
        {"epochs", c.transe.epochs},
        {"batch_size", c.transe.batch_size},
        {"lr", c.transe.lr},
        {"negatives", c.transe.negatives_per_positive},
        {"norm", c.transe.norm == TransEConfig::Norm::L1 ? "L1" : "L2"},
    };
    return j;
}

template <typename T>
void read_field(const json& section, const char* key, T& out) {
    if (section.contains(key)) out = section.at(key).get<T>();
}

void from_json(const json& j, ExperimentConfig& c) {
    static const std::unordered_map<std::string, std::vector<std::string>> known = {
        {"agent",
         {"gamma", "tau", "batch_size", "lr", "weight_decay", "target_sync_every",
          "buffer_capacity", "eps_start", "eps_end", "eps_decay_steps",
          "dueling_mean_subtract", "l1_updates_encoder", "hierarchy", "gumbel", "intrinsic"}},
        {"encoder", {"layers", "heads", "residual", "item_cap", "embed_dim", "hidden", "hypergraph"}},
        {"env", {"max_turns", "rec_size", "r_rec_acc", "r_rec_rej", "r_ask_acc", "r_ask_rej", "r_quit"}},
        {"train", {"episodes", "eval_every", "eval_episodes", "train_every", "pretrain", "eval_threads"}},
        {"transe", {"margin", "epochs", "batch_size", "lr", "negatives", "norm"}},
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto sec = known.find(it.key());
        if (sec == known.end()) throw ValidationError("config: unknown section '" + it.key() + "'");
        for (auto f = it.value().begin(); f != it.value().end(); ++f) {
            if (std::find(sec->second.begin(), sec->second.end(), f.key()) == sec->second.end()) {
                throw ValidationError("config: unknown key '" + it.key() + "." + f.key() + "'");
            }
        }
    }
    if (j.contains("agent")) {
        const auto& a = j.at("agent");
        read_field(a, "gamma", c.agent.gamma);
        read_field(a, "tau", c.agent.tau);
        read_field(a, "batch_size", c.agent.batch_size);
        read_field(a, "lr", c.agent.lr);
        read_field(a, "weight_decay", c.agent.weight_decay);
        read_field(a, "target_sync_every", c.agent.target_sync_every);
        read_field(a, "buffer_capacity", c.agent.buffer_capacity);
        read_field(a, "eps_start", c.agent.eps_start);
        read_field(a, "eps_end", c.agent.eps_end);
        read_field(a, "eps_decay_steps", c.agent.eps_decay_steps);
        read_field(a, "dueling_mean_subtract", c.agent.dueling_mean_subtract);
        read_field(a, "l1_updates_encoder", c.agent.l1_updates_encoder);
        read_field(a, "hierarchy", c.agent.hierarchy);
        read_field(a, "gumbel", c.agent.gumbel);
        read_field(a, "intrinsic", c.agent.intrinsic);
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        read_field(e, "layers", c.agent.encoder.layers);
        read_field(e, "heads", c.agent.encoder.heads);
        read_field(e, "residual", c.agent.encoder.residual);
        read_field(e, "item_cap", c.agent.encoder.item_cap);
        read_field(e, "embed_dim", c.agent.encoder.embed_dim);
        read_field(e, "hidden", c.agent.encoder.hidden);
        read_field(e, "hypergraph", c.agent.encoder.hypergraph);
    }
    if (j.contains("env")) {
        const auto& e = j.at("env");
        read_field(e, "max_turns", c.env.max_turns);
        read_field(e, "rec_size", c.env.rec_size);
        read_field(e, "r_rec_acc", c.env.r_rec_acc);
        read_field(e, "r_rec_rej", c.env.r_rec_rej);
        read_field(e, "r_ask_acc", c.env.r_ask_acc);
        read_field(e, "r_ask_rej", c.env.r_ask_rej);
        read_field(e, "r_quit", c.env.r_quit);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        read_field(t, "episodes", c.train.episodes);
        read_field(t, "eval_every", c.train.eval_every);
        read_field(t, "eval_episodes", c.train.eval_episodes);
        read_field(t, "train_every", c.train.train_every);
        read_field(t, "pretrain", c.train.pretrain);
        read_field(t, "eval_threads", c.train.eval_threads);
    }
    if (j.contains("transe")) {
        const auto& t = j.at("transe");
        read_field(t, "margin", c.transe.margin);
        read_field(t, "epochs", c.transe.epochs);
        read_field(t, "batch_size", c.transe.batch_size);
        read_field(t, "lr", c.transe.lr);
        read_field(t, "negatives", c.transe.negatives_per_positive);
        if (t.contains("norm")) {
            const std::string n = t.at("norm").get<std::string>();
            if (n == "L1") {
                c.transe.norm = TransEConfig::Norm::L1;
            } else if (n == "L2") {
                c.transe.norm = TransEConfig::Norm::L2;
            } else {
                throw ValidationError("config: transe.norm must be L1 or L2");
            }
        }
    }
    // One recommendation size; the agent follows the environment.
    c.agent.rec_size = c.env.rec_size;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

ExperimentConfig default_experiment() { return ExperimentConfig{}; }

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    ExperimentConfig c;
    from_json(j, c);
    return c;
}

ExperimentConfig parse_experiment_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed config JSON");
    ExperimentConfig c;
    from_json(j, c);
    return c;
}

void apply_override(ExperimentConfig& config, const std::string& dotted_assignment) {
    const auto eq = dotted_assignment.find('=');
    const auto dot = dotted_assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ValidationError("override must look like section.key=value: " + dotted_assignment);
    }
    const std::string section = dotted_assignment.substr(0, dot);
    const std::string key = dotted_assignment.substr(dot + 1, eq - dot - 1);
    const std::string value = dotted_assignment.substr(eq + 1);
    json leaf = json::parse(value, nullptr, false);
    if (leaf.is_discarded()) leaf = value;  // bare strings (e.g. norm=L2)
    json j;
    j[section][key] = leaf;
    from_json(j, config);
}

std::string experiment_to_json(const ExperimentConfig& config) {
    return to_json(config).dump(2) + "\n";
}

std::string config_fingerprint(const ExperimentConfig& config) {
    std::ostringstream hex;
    hex << std::hex << fnv1a64(to_json(config).dump());
    return hex.str();
}

}  // namespace dahcr
