#include "dahcr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dahcr/errors.hpp"
#include "json.hpp"

namespace dahcr {

namespace {

bool contains(const std::vector<Id>& sorted, Id x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

// Shared ranking rule of the rule-based baselines.
std::vector<Id> greedy_ranking(const Catalog& catalog, const SessionState& s) {
    std::vector<double> scores;
    scores.reserve(s.v_cand.size());
    for (Id v : s.v_cand) {
        int score = 0;
        for (Id p : catalog.item_attributes[v]) {
            if (contains(s.p_acc, p)) ++score;
            if (contains(s.p_rej, p)) --score;
        }
        scores.push_back(static_cast<double>(score));
    }
    return rank_by_score(s.v_cand, scores);
}

AgentMove top_k_move(const std::vector<Id>& ranking, int k) {
    std::vector<Id> top(ranking.begin(),
                        ranking.begin() + std::min<std::size_t>(ranking.size(),
                                                                static_cast<std::size_t>(k)));
    return AgentMove::rec(std::move(top));
}

class AbsGreedyPolicy final : public Policy {
public:
    AbsGreedyPolicy(const Catalog& catalog, int rec_size)
        : catalog_(&catalog), rec_size_(rec_size) {}

    Decision decide(const SessionState& state, Rng&) override {
        Decision d;
        d.item_ranking = greedy_ranking(*catalog_, state);
        d.move = top_k_move(d.item_ranking, rec_size_);
        return d;
    }

private:
    const Catalog* catalog_;
    int rec_size_;
};

class MaxEntropyPolicy final : public Policy {
public:
    MaxEntropyPolicy(const Catalog& catalog, double rec_prob, int rec_size)
        : catalog_(&catalog), rec_prob_(rec_prob), rec_size_(rec_size) {}

    Decision decide(const SessionState& state, Rng& rng) override {
        Decision d;
        d.item_ranking = greedy_ranking(*catalog_, state);
        const bool must_rec = state.p_cand.empty();
        if (must_rec || rng.next_double() < rec_prob_) {
            d.move = top_k_move(d.item_ranking, rec_size_);
            return d;
        }
        // Binary entropy of each attribute's coverage of the candidates.
        const double n = static_cast<double>(state.v_cand.size());
        double best_h = -1.0;
        Id best_p = state.p_cand.front();
        for (Id p : state.p_cand) {
            std::size_t covered = 0;
            for (Id v : state.v_cand) {
                if (contains(catalog_->item_attributes[v], p)) ++covered;
            }
            const double q = static_cast<double>(covered) / n;
            double h = 0.0;
            if (q > 0.0 && q < 1.0) h = -q * std::log(q) - (1.0 - q) * std::log(1.0 - q);
            if (h > best_h) {
                best_h = h;
                best_p = p;
            }
        }
        d.move = AgentMove::ask(best_p);
        return d;
    }

private:
    const Catalog* catalog_;
    double rec_prob_;
    int rec_size_;
};

class AgentGreedyPolicy final : public Policy {
public:
    AgentGreedyPolicy(const Catalog& catalog, const PolicyNetworks& nets)
        : catalog_(&catalog), nets_(&nets) {}

    Decision decide(const SessionState& state, Rng& rng) override {
        TurnDecision t = agent_decide(*nets_, *catalog_, SessionSnapshot::of(state), rng,
                                      SelectMode::greedy, 0);
        return {std::move(t.move), std::move(t.item_ranking)};
    }

private:
    const Catalog* catalog_;
    const PolicyNetworks* nets_;
};

}  // namespace

std::unique_ptr<Policy> make_abs_greedy(const Catalog& catalog, int rec_size) {
    return std::make_unique<AbsGreedyPolicy>(catalog, rec_size);
}

std::unique_ptr<Policy> make_max_entropy(const Catalog& catalog, double rec_prob, int rec_size) {
    if (rec_prob < 0.0 || rec_prob > 1.0) {
        throw ValidationError("max-entropy rec_prob must be in [0, 1]");
    }
    return std::make_unique<MaxEntropyPolicy>(catalog, rec_prob, rec_size);
}

std::unique_ptr<Policy> make_agent_policy(const Catalog& catalog, const PolicyNetworks& nets) {
    return std::make_unique<AgentGreedyPolicy>(catalog, nets);
}

EpisodeLog run_episode(Policy& policy, const Catalog& catalog, Id user, Id target,
                       std::uint64_t seed, const EnvConfig& env) {
    Rng rng(seed);
    SessionState state = reset(catalog, user, target, rng);

    EpisodeLog log;
    log.user = user;
    log.target = target;
    while (!state.done) {
        Policy::Decision d = policy.decide(state, rng);
        StepOutcome outcome = step(catalog, state, d.move, d.item_ranking, env);

        TurnRecord rec;
        rec.turn = state.turn + 1;
        rec.option = d.move.option;
        rec.attribute = d.move.attribute;
        rec.items = d.move.items;
        rec.feedback = outcome.feedback;
        rec.r_extrinsic = outcome.extrinsic;
        rec.r_intrinsic = outcome.intrinsic;
        rec.v_cand_size = state.v_cand.size();
        rec.p_cand_size = state.p_cand.size();
        log.turns.push_back(std::move(rec));

        if (outcome.next.success) {
            log.success = true;
            log.success_turn = outcome.next.turn;
            for (std::size_t i = 0; i < d.move.items.size(); ++i) {
                if (d.move.items[i] == target) {
                    log.success_rank = static_cast<int>(i) + 1;
                    break;
                }
            }
        }
        state = std::move(outcome.next);
    }
    if (!log.success) log.success_turn = env.max_turns;
    return log;
}

double hdcg_gain(int t, int k) {
    const double td = static_cast<double>(t);
    const double kd = static_cast<double>(k);
    return 1.0 / std::log2(td + 2.0) +
           (1.0 / std::log2(td + 1.0)) * (1.0 / std::log2(kd + 1.0));
}

MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, const EnvConfig& env) {
    if (logs.empty()) throw ValidationError("compute_metrics: no episodes");
    MetricsReport report;
    report.episodes = logs.size();
    double turn_sum = 0.0;
    double gain_sum = 0.0;
    for (const auto& log : logs) {
        if (log.success) {
            for (int t = log.success_turn; t <= env.max_turns; ++t) {
                report.sr[static_cast<std::size_t>(t - 1)] += 1.0;
            }
            turn_sum += log.success_turn;
            gain_sum += hdcg_gain(log.success_turn, log.success_rank);
        } else {
            turn_sum += env.max_turns;
        }
    }
    const double n = static_cast<double>(logs.size());
    for (auto& v : report.sr) v /= n;
    report.at = turn_sum / n;
    report.hdcg = gain_sum / n;
    return report;
}

void export_episode_trace(const std::vector<EpisodeLog>& logs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t e = 0; e < logs.size(); ++e) {
        for (const auto& t : logs[e].turns) {
            nlohmann::json j;
            j["episode"] = e;
            j["user"] = logs[e].user;
            j["target"] = logs[e].target;
            j["turn"] = t.turn;
            j["option"] = t.option == OptionKind::ask ? "ask" : "rec";
            if (t.option == OptionKind::ask) {
                j["payload"] = t.attribute;
            } else {
                j["payload"] = t.items;
            }
            j["feedback"] = t.feedback == Feedback::acc ? "acc" : "rej";
            j["r_a"] = t.r_extrinsic;
            j["r_o"] = t.r_intrinsic;
            j["v_cand"] = t.v_cand_size;
            j["p_cand"] = t.p_cand_size;
            out << j.dump() << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace dahcr
