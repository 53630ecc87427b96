#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dahcr/adam.hpp"
#include "dahcr/embed.hpp"
#include "dahcr/encoder.hpp"

namespace dahcr {

struct AgentConfig {
    double gamma = 0.999;
    double tau = 0.3;  // Gumbel-softmax temperature
    int batch_size = 128;
    double lr = 1e-4;
    double weight_decay = 1e-6;
    int target_sync_every = 100;  // gradient steps between hard target syncs
    int buffer_capacity = 50000;
    int rec_size = 10;  // K

    // Exploration: epsilon-greedy at both levels, linear anneal.
    double eps_start = 1.0;
    double eps_end = 0.01;
    int eps_decay_steps = 10000;

    // Q = V + A literally by default; the conventional mean-advantage
    // subtraction is available for ablation.
    bool dueling_mean_subtract = false;
    bool l1_updates_encoder = true;

    // Ablation switches (hypergraph lives in encoder).
    bool hierarchy = true;
    bool gumbel = true;
    bool intrinsic = true;

    EncoderConfig encoder;

    double epsilon_at(std::int64_t env_step) const {
        if (eps_decay_steps <= 0) return eps_end;
        double f = static_cast<double>(env_step) / static_cast<double>(eps_decay_steps);
        if (f > 1.0) f = 1.0;
        return eps_start + (eps_end - eps_start) * f;
    }
};

// Online networks plus a frozen copy synced by hard assignment.
struct PolicyNetworks {
    num::ParamSet online;
    num::ParamSet target;
    AgentConfig config;

    static PolicyNetworks create(const Catalog& catalog, const EmbeddingTable& embeddings,
                                 const AgentConfig& config, std::uint64_t seed);
    void sync_target() { target.copy_from(online); }
};

struct TransitionRecord {
    SessionSnapshot state;
    SessionSnapshot next_state;  // its p_cand/v_cand are the next action spaces
    OptionKind option = OptionKind::ask;
    Id action = 0;  // asked attribute, or the top-ranked recommended item
    double r_intrinsic = 0.0;
    double r_extrinsic = 0.0;
    std::array<double, 2> gumbel_eps{0.0, 0.0};  // draws behind P* (ask, rec)
    bool done = false;
};

// FIFO ring, uniform sampling with replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(TransitionRecord record);
    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }
    const TransitionRecord& at(std::size_t i) const { return ring_[i]; }
    std::vector<const TransitionRecord*> sample(std::size_t batch, Rng& rng) const;

private:
    std::vector<TransitionRecord> ring_;
    std::size_t capacity_;
    std::size_t next_ = 0;  // overwrite cursor once full
};

enum class SelectMode { train, greedy };

struct DirectorOut {
    num::Tensor q_ask;  // 1x1
    num::Tensor q_rec;  // 1x1
};

// Q_o(s, o) = f_V(s) + f_A(s, option embedding).
DirectorOut director_q(const num::BoundParams& params, const num::Tensor& state,
                       const AgentConfig& config);

// Softmax over the two option values.
std::array<double, 2> option_probabilities(double q_ask, double q_rec);

struct GumbelSample {
    std::array<double, 2> p_star;  // relaxed distribution (ask, rec)
    std::array<double, 2> eps;     // the noise draws
};

// P*(o) = exp((log P(o) + eps_o)/tau) normalized, fresh noise per call.
GumbelSample gumbel_relaxation(const std::array<double, 2>& probs, double tau, Rng& rng);

// Same relaxation on the tape with fixed noise; returns P*(s, option) as
// a 1x1 tensor so director gradients flow through the actor loss.
num::Tensor relaxed_option_scalar(const DirectorOut& q, OptionKind option,
                                  const std::array<double, 2>& eps, double tau);

struct OptionChoice {
    OptionKind option = OptionKind::ask;
    std::array<double, 2> p_star{0.0, 0.0};
    std::array<double, 2> eps{0.0, 0.0};
    bool forced = false;    // empty candidate-attribute set forces rec
    bool explored = false;  // epsilon override fired
};

OptionChoice select_option(const DirectorOut& q, const AgentConfig& config, Rng& rng,
                           SelectMode mode, double epsilon, bool force_rec);

// Batched actor head: (f_V(s) + f_A(s, rep_i)) per row of reps.
num::Tensor actor_scores(const num::BoundParams& params, const num::Tensor& state,
                         const num::Tensor& reps, const AgentConfig& config);

// Ranks ids by score descending, ties ascending id.
std::vector<Id> rank_by_score(const std::vector<Id>& ids, const std::vector<double>& scores);

struct TurnDecision {
    AgentMove move;
    std::vector<Id> item_ranking;  // full ranking of candidate items
    OptionKind option = OptionKind::ask;
    Id action = 0;
    std::array<double, 2> gumbel_eps{0.0, 0.0};
};

// Full per-turn policy: encode, pick option, pick action. Exposed so the
// trainer, the greedy policy and the play mode share one code path.
TurnDecision agent_decide(const PolicyNetworks& nets, const Catalog& catalog,
                          const SessionSnapshot& view, Rng& rng, SelectMode mode,
                          std::int64_t env_step);

// Double-Q targets: next option/action by the online networks (greedy,
// P* one-hot), evaluated by the target networks; terminal entries keep
// the raw reward.
struct Targets {
    std::vector<double> director;  // y^o
    std::vector<double> actor;     // y^a
};
Targets compute_targets(const std::vector<const TransitionRecord*>& batch,
                        const PolicyNetworks& nets, const Catalog& catalog);

// One alternating optimization step: even parity fits the director loss,
// odd parity the actor loss. Returns the minimized loss value.
class Trainer {
public:
    Trainer(PolicyNetworks nets, const Catalog& catalog);

    double train_step(const ReplayBuffer& buffer, Rng& rng);
    std::int64_t grad_steps() const { return grad_steps_; }
    PolicyNetworks& nets() { return nets_; }
    const PolicyNetworks& nets() const { return nets_; }
    num::AdamState& director_opt() { return opt_director_; }
    num::AdamState& actor_opt() { return opt_actor_; }
    void set_grad_steps(std::int64_t n) { grad_steps_ = n; }

private:
    PolicyNetworks nets_;
    const Catalog* catalog_;
    num::AdamState opt_director_;
    num::AdamState opt_actor_;
    std::int64_t grad_steps_ = 0;
};

}  // namespace dahcr
