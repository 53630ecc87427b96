#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dahcr/errors.hpp"
#include "dahcr/harness.hpp"

namespace dahcr {

namespace fs = std::filesystem;

namespace {

std::string format_row(int epoch, int episodes, const MetricsReport& m, double loss) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f", epoch, episodes,
                  m.sr[14], m.at, m.hdcg, loss);
    return buf;
}

std::vector<std::tuple<std::string, num::AdamState::Moments>> sorted_moments(
    const num::AdamState& opt) {
    std::vector<std::string> names;
    for (const auto& [name, mom] : opt.all_moments()) names.push_back(name);
    std::sort(names.begin(), names.end());
    std::vector<std::tuple<std::string, num::AdamState::Moments>> out;
    for (const auto& name : names) out.emplace_back(name, opt.all_moments().at(name));
    return out;
}

CheckpointState snapshot(const Trainer& trainer, const ExperimentConfig& config,
                         std::int64_t env_steps) {
    CheckpointState st;
    st.config = config;
    st.online = trainer.nets().online.clone();
    st.target = trainer.nets().target.clone();
    st.grad_steps = trainer.grad_steps();
    st.env_steps = env_steps;
    st.fingerprint = config_fingerprint(config);
    st.adam_director = sorted_moments(const_cast<Trainer&>(trainer).director_opt());
    st.adam_actor = sorted_moments(const_cast<Trainer&>(trainer).actor_opt());
    st.adam_director_calls = const_cast<Trainer&>(trainer).director_opt().calls();
    st.adam_actor_calls = const_cast<Trainer&>(trainer).actor_opt().calls();
    return st;
}

}  // namespace

MetricsReport evaluate_policy(Policy& policy, const Catalog& catalog,
                              const std::vector<std::pair<Id, Id>>& pairs,
                              std::size_t max_episodes, std::uint64_t seed,
                              const EnvConfig& env, std::vector<EpisodeLog>* logs_out,
                              int threads) {
    if (pairs.empty()) throw ValidationError("evaluate: no episode seeds");
    const std::size_t n = max_episodes == 0 ? pairs.size() : std::min(pairs.size(), max_episodes);
    std::vector<EpisodeLog> logs(n);

    auto run_range = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < n; i += stride) {
            logs[i] = run_episode(policy, catalog, pairs[i].first, pairs[i].second,
                                  Rng::mix(seed, i), env);
        }
    };
    if (threads <= 1) {
        run_range(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(run_range, static_cast<std::size_t>(t),
                              static_cast<std::size_t>(threads));
        }
        for (auto& t : pool) t.join();
    }
    if (logs_out) *logs_out = logs;
    return compute_metrics(logs, env);
}

TrainResult train_experiment(const ExperimentConfig& config, const Catalog& catalog,
                             const DatasetSplit& split, std::uint64_t seed,
                             const std::string& out_dir, std::ostream* progress) {
    if (split.train.empty()) throw ValidationError("train: empty train split");
    if (config.train.episodes <= 0) throw ValidationError("train: episode count must be positive");
    if (config.agent.batch_size <= 0 ||
        config.agent.batch_size > config.agent.buffer_capacity) {
        throw ValidationError("train: bad batch size");
    }
    fs::create_directories(out_dir);

    EmbeddingTable table;
    if (config.train.pretrain) {
        auto triples = build_kg_triples(catalog, split);
        TransEConfig tc = config.transe;
        tc.dim = config.agent.encoder.embed_dim;
        table = transe_train(catalog.num_nodes(),
                             static_cast<Id>(catalog.relation_names.size()), triples, tc,
                             Rng::mix(seed, 101));
    } else {
        table = random_table(catalog.num_nodes(),
                             static_cast<Id>(catalog.relation_names.size()),
                             config.agent.encoder.embed_dim, Rng::mix(seed, 101));
    }

    Trainer trainer(PolicyNetworks::create(catalog, table, config.agent, Rng::mix(seed, 202)),
                    catalog);
    ReplayBuffer buffer(static_cast<std::size_t>(config.agent.buffer_capacity));
    Rng rng(Rng::mix(seed, 303));

    const auto& valid_pairs = split.valid.empty() ? split.train : split.valid;
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::string> csv_rows;
    std::int64_t env_steps = 0;
    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    TrainResult result;
    result.best_valid_sr15 = -1.0;
    result.csv_path = (fs::path(out_dir) / "metrics.csv").string();
    result.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();
    result.final_checkpoint = (fs::path(out_dir) / "final.ckpt").string();
    int epoch = 0;

    for (int e = 0; e < config.train.episodes; ++e) {
        if (e % static_cast<int>(order.size()) == 0) rng.shuffle(order);
        auto [user, target] = split.train[order[static_cast<std::size_t>(e) % order.size()]];

        SessionState state = reset(catalog, user, target, rng);
        while (!state.done) {
            SessionSnapshot view = SessionSnapshot::of(state);
            TurnDecision d = agent_decide(trainer.nets(), catalog, view, rng,
                                          SelectMode::train, env_steps);
            StepOutcome outcome = step(catalog, state, d.move, d.item_ranking, config.env);

            TransitionRecord rec;
            rec.state = std::move(view);
            rec.next_state = SessionSnapshot::of(outcome.next);
            rec.option = d.option;
            rec.action = d.action;
            rec.r_intrinsic = outcome.intrinsic;
            rec.r_extrinsic = outcome.extrinsic;
            rec.gumbel_eps = d.gumbel_eps;
            rec.done = outcome.done;
            buffer.push(std::move(rec));

            state = std::move(outcome.next);
            ++env_steps;
            if (buffer.size() >= static_cast<std::size_t>(config.agent.batch_size) &&
                env_steps % config.train.train_every == 0) {
                loss_sum += trainer.train_step(buffer, rng);
                ++loss_count;
            }
        }

        const bool eval_now = (e + 1) % config.train.eval_every == 0 ||
                              e + 1 == config.train.episodes;
        if (!eval_now) continue;
        ++epoch;
        auto policy = make_agent_policy(catalog, trainer.nets());
        MetricsReport report = evaluate_policy(
            *policy, catalog, valid_pairs,
            static_cast<std::size_t>(config.train.eval_episodes), Rng::mix(seed, 404 + epoch),
            config.env, nullptr, config.train.eval_threads);
        const double mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        csv_rows.push_back(format_row(epoch, e + 1, report, mean_loss));
        loss_sum = 0.0;
        loss_count = 0;
        if (progress) {
            (*progress) << "episode " << e + 1 << "/" << config.train.episodes
                        << " valid sr15=" << report.sr[14] << " at=" << report.at << "\n";
        }
        if (report.sr[14] > result.best_valid_sr15) {
            result.best_valid_sr15 = report.sr[14];
            save_checkpoint(snapshot(trainer, config, env_steps), result.best_checkpoint);
        }
    }

    save_checkpoint(snapshot(trainer, config, env_steps), result.final_checkpoint);

    std::ofstream csv(result.csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write " + result.csv_path);
    csv << "epoch,episodes,sr15,at,hdcg,loss\n";
    for (const auto& row : csv_rows) csv << row << "\n";
    if (!csv) throw IoError("write failed: " + result.csv_path);
    return result;
}

MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const Catalog& catalog,
                                  const std::vector<std::pair<Id, Id>>& pairs,
                                  std::size_t max_episodes, std::uint64_t seed,
                                  const std::string& trace_jsonl, int threads) {
    CheckpointState st = load_checkpoint(checkpoint_path);
    PolicyNetworks nets{std::move(st.online), std::move(st.target), st.config.agent};
    auto policy = make_agent_policy(catalog, nets);
    std::vector<EpisodeLog> logs;
    MetricsReport report = evaluate_policy(*policy, catalog, pairs, max_episodes, seed,
                                           st.config.env, &logs, threads);
    report.config_fingerprint = st.fingerprint;
    if (!trace_jsonl.empty()) export_episode_trace(logs, trace_jsonl);
    return report;
}

}  // namespace dahcr
