#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dahcr/agent.hpp"
#include "dahcr/catalog.hpp"
#include "dahcr/env.hpp"

namespace dahcr {

struct TurnRecord {
    int turn = 0;
    OptionKind option = OptionKind::ask;
    Id attribute = 0;
    std::vector<Id> items;
    Feedback feedback = Feedback::rej;
    double r_extrinsic = 0.0;
    double r_intrinsic = 0.0;
    std::size_t v_cand_size = 0;
    std::size_t p_cand_size = 0;
};

struct EpisodeLog {
    Id user = 0;
    Id target = 0;
    std::vector<TurnRecord> turns;
    bool success = false;
    int success_turn = 0;  // t* when successful, T otherwise
    int success_rank = 0;  // 1-based rank inside the winning recommendation, 0 otherwise
};

struct MetricsReport {
    std::array<double, 15> sr{};  // SR@1..SR@15
    double at = 0.0;
    double hdcg = 0.0;
    std::size_t episodes = 0;
    std::string config_fingerprint;
};

// A per-turn decision maker. Implementations must be deterministic
// given (state, rng stream).
class Policy {
public:
    struct Decision {
        AgentMove move;
        std::vector<Id> item_ranking;
    };
    virtual ~Policy() = default;
    virtual Decision decide(const SessionState& state, Rng& rng) = 0;
};

// Recommend-only baseline: top-K by attribute-match score
// (|P_v ∩ P_acc| - |P_v ∩ P_rej|), ties ascending id.
std::unique_ptr<Policy> make_abs_greedy(const Catalog& catalog, int rec_size = 10);

// Asks the attribute whose candidate coverage has maximum binary
// entropy; recommends like abs-greedy with probability rec_prob (and
// always when no attribute is left to ask).
std::unique_ptr<Policy> make_max_entropy(const Catalog& catalog, double rec_prob,
                                         int rec_size = 10);

// Greedy wrapper over trained networks.
std::unique_ptr<Policy> make_agent_policy(const Catalog& catalog, const PolicyNetworks& nets);

EpisodeLog run_episode(Policy& policy, const Catalog& catalog, Id user, Id target,
                       std::uint64_t seed, const EnvConfig& env = {});

// Gain of a success at turn t with rank k; strictly decreasing in both.
double hdcg_gain(int t, int k);

MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, const EnvConfig& env = {});

void export_episode_trace(const std::vector<EpisodeLog>& logs, const std::string& path);

// ---------------------------------------------------------------------------
// Experiment orchestration.

struct TrainConfig {
    int episodes = 1000;
    int eval_every = 100;    // episodes per evaluation/CSV row
    int eval_episodes = 0;   // cap on validation episodes; 0 = whole split
    int train_every = 1;     // environment steps per gradient step
    bool pretrain = true;    // TransE warm start for the embedding table
    int eval_threads = 1;
};

struct ExperimentConfig {
    AgentConfig agent;
    EnvConfig env;
    TrainConfig train;
    TransEConfig transe;
};

ExperimentConfig default_experiment();
// Parses a JSON config file; unknown keys are rejected. CLI overrides
// use dotted paths ("agent.tau=0.7").
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_json(const std::string& text);
void apply_override(ExperimentConfig& config, const std::string& dotted_assignment);
std::string experiment_to_json(const ExperimentConfig& config);  // canonical form
std::string config_fingerprint(const ExperimentConfig& config);

struct TrainResult {
    double best_valid_sr15 = 0.0;
    std::string csv_path;
    std::string best_checkpoint;
    std::string final_checkpoint;
};

// Full training run: TransE warm start, episode/gradient interleaving,
// periodic validation, best/final checkpoints, per-epoch CSV. Byte
// deterministic for a fixed (config, seed).
TrainResult train_experiment(const ExperimentConfig& config, const Catalog& catalog,
                             const DatasetSplit& split, std::uint64_t seed,
                             const std::string& out_dir, std::ostream* progress = nullptr);

MetricsReport evaluate_policy(Policy& policy, const Catalog& catalog,
                              const std::vector<std::pair<Id, Id>>& pairs,
                              std::size_t max_episodes, std::uint64_t seed,
                              const EnvConfig& env, std::vector<EpisodeLog>* logs_out = nullptr,
                              int threads = 1);

MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const Catalog& catalog,
                                  const std::vector<std::pair<Id, Id>>& pairs,
                                  std::size_t max_episodes, std::uint64_t seed,
                                  const std::string& trace_jsonl = "", int threads = 1);

// ---------------------------------------------------------------------------
// Checkpoints: magic "DAHC", u32 version, one-line JSON manifest
// (shapes, config, fingerprint, counters), then f32 blocks in manifest
// order.

struct CheckpointState {
    ExperimentConfig config;
    num::ParamSet online;
    num::ParamSet target;
    std::int64_t grad_steps = 0;
    std::int64_t env_steps = 0;
    std::string fingerprint;
    // Optimizer moments keyed like the parameters.
    std::vector<std::tuple<std::string, num::AdamState::Moments>> adam_director;
    std::vector<std::tuple<std::string, num::AdamState::Moments>> adam_actor;
    std::int64_t adam_director_calls = 0;
    std::int64_t adam_actor_calls = 0;
};

void save_checkpoint(const CheckpointState& state, const std::string& path);
CheckpointState load_checkpoint(const std::string& path,
                                const std::string& expect_fingerprint = "",
                                std::ostream* warnings = nullptr);

// ---------------------------------------------------------------------------
// Figure export: SR@15-vs-epoch and loss-vs-epoch SVG line charts plus
// tidy CSVs, from a training metrics CSV.
void export_plots(const std::string& metrics_csv, const std::string& out_dir);

// Interactive session: the given streams stand in for the terminal, a
// human answers instead of the simulator. Returns the partial or full
// episode log (EOF aborts gracefully).
EpisodeLog play(std::istream& in, std::ostream& out, const Catalog& catalog,
                const PolicyNetworks& nets, Id user, Id target, std::uint64_t seed,
                const EnvConfig& env = {});

}  // namespace dahcr
