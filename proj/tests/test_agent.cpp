#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "dahcr/agent.hpp"
#include "dahcr/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace dahcr;
using num::Tensor;

namespace {

AgentConfig small_config() {
    AgentConfig c;
    c.encoder.embed_dim = 8;
    c.encoder.hidden = 10;
    c.encoder.layers = 1;
    c.batch_size = 4;
    c.eps_start = 0.0;
    c.eps_end = 0.0;
    return c;
}

PolicyNetworks make_nets(const Catalog& catalog, const AgentConfig& config, std::uint64_t seed) {
    auto table = random_table(catalog.num_nodes(), 2, config.encoder.embed_dim, seed);
    return PolicyNetworks::create(catalog, table, config, seed);
}

void zero_params(num::ParamSet& ps) {
    for (const auto& name : ps.names()) {
        for (auto& v : *ps.at(name).data) v = 0.0;
    }
}

SessionSnapshot live_snapshot(const Catalog& c, Id user, Id target, std::uint64_t seed) {
    Rng rng(seed);
    return SessionSnapshot::of(reset(c, user, target, rng));
}

}  // namespace

TEST_CASE("director_q is the literal value+advantage sum") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    PolicyNetworks nets = make_nets(c, config, 3);
    zero_params(nets.online);
    // constant heads via output biases
    nets.online.at("dir.value.b1").at(0, 0) = 0.5;
    nets.online.at("dir.adv.b1").at(0, 0) = 0.2;
    num::BoundParams bp(nullptr, nets.online);
    Tensor s = Tensor::zeros(1, config.encoder.state_dim());
    DirectorOut q = director_q(bp, s, config);
    CHECK(q.q_ask.value() == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(q.q_rec.value() == doctest::Approx(0.7).epsilon(1e-12));

    // distinct options via the option-embedding input block
    nets.online.at("dir.opt_emb").at(0, 0) = 1.0;
    nets.online.at("dir.opt_emb").at(1, 0) = 2.0;
    nets.online.at("dir.adv.w0").at(config.encoder.state_dim(), 0) = 1.0;
    nets.online.at("dir.adv.w1").at(0, 0) = 1.0;
    DirectorOut q2 = director_q(bp, s, config);
    CHECK(q2.q_ask.value() == doctest::Approx(0.5 + 0.2 + 1.0).epsilon(1e-12));
    CHECK(q2.q_rec.value() == doctest::Approx(0.5 + 0.2 + 2.0).epsilon(1e-12));

    // mean-advantage subtraction flag
    AgentConfig sub = config;
    sub.dueling_mean_subtract = true;
    DirectorOut q3 = director_q(bp, s, sub);
    const double mean = (1.2 + 2.2) / 2.0;
    CHECK(q3.q_ask.value() == doctest::Approx(0.5 + 1.2 - mean).epsilon(1e-12));
    CHECK(q3.q_rec.value() == doctest::Approx(0.5 + 2.2 - mean).epsilon(1e-12));
}

TEST_CASE("option probabilities: softmax algebra") {
    auto p = option_probabilities(0.0, 0.0);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    auto q = option_probabilities(std::log(3.0), 0.0);
    CHECK(q[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(q[0] + q[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gumbel relaxation: normalization, limit, and distribution") {
    Rng rng(5);
    {
        GumbelSample s = gumbel_relaxation({0.5, 0.5}, 1.0, rng);
        CHECK(s.p_star[0] + s.p_star[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    // tau -> 0 approaches one-hot at argmax(log p + eps)
    {
        Rng r1(7), r2(7);
        GumbelSample hot = gumbel_relaxation({0.6, 0.4}, 1e-4, r1);
        GumbelSample warm = gumbel_relaxation({0.6, 0.4}, 10.0, r2);
        const int arg = hot.p_star[1] > hot.p_star[0] ? 1 : 0;
        CHECK(hot.p_star[static_cast<std::size_t>(arg)] > 0.9999);
        CHECK(std::fabs(warm.p_star[0] - 0.5) < 0.2);  // high tau flattens
    }
    // hard-sample frequency matches the base distribution (Gumbel-max)
    for (double tau : {0.3, 0.7}) {
        Rng r(11);
        int first = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            GumbelSample s = gumbel_relaxation({0.75, 0.25}, tau, r);
            if (s.p_star[0] > s.p_star[1]) ++first;
        }
        const double freq = static_cast<double>(first) / n;
        CHECK(std::fabs(freq - 0.75) < 0.02);
    }
    CHECK_THROWS_AS(gumbel_relaxation({0.5, 0.5}, 0.0, rng), ValidationError);
}

TEST_CASE("relaxed option scalar matches the longhand computation") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    PolicyNetworks nets = make_nets(c, config, 9);
    num::BoundParams bp(nullptr, nets.online);
    Tensor s = Tensor::zeros(1, config.encoder.state_dim());
    DirectorOut q = director_q(bp, s, config);
    auto probs = option_probabilities(q.q_ask.value(), q.q_rec.value());
    const std::array<double, 2> eps{0.3, -0.2};
    Tensor p_ask = relaxed_option_scalar(q, OptionKind::ask, eps, config.tau);
    Tensor p_rec = relaxed_option_scalar(q, OptionKind::rec, eps, config.tau);
    const double l0 = (std::log(probs[0] + 1e-12) + eps[0]) / config.tau;
    const double l1 = (std::log(probs[1] + 1e-12) + eps[1]) / config.tau;
    const double z = std::exp(l0) + std::exp(l1);
    CHECK(p_ask.value() == doctest::Approx(std::exp(l0) / z).epsilon(1e-9));
    CHECK(p_rec.value() == doctest::Approx(std::exp(l1) / z).epsilon(1e-9));
    CHECK(p_ask.value() + p_rec.value() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("select_option modes") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    PolicyNetworks nets = make_nets(c, config, 13);
    zero_params(nets.online);
    nets.online.at("dir.opt_emb").at(1, 0) = 1.0;
    nets.online.at("dir.adv.w0").at(config.encoder.state_dim(), 0) = 1.0;
    nets.online.at("dir.adv.w1").at(0, 0) = 1.0;  // Q(rec) > Q(ask)
    num::BoundParams bp(nullptr, nets.online);
    Tensor s = Tensor::zeros(1, config.encoder.state_dim());
    DirectorOut q = director_q(bp, s, config);
    Rng rng(1);

    OptionChoice greedy = select_option(q, config, rng, SelectMode::greedy, 0.0, false);
    CHECK(greedy.option == OptionKind::rec);
    CHECK(greedy.p_star[1] == 1.0);

    // epsilon 1.0: uniform options
    int asks = 0;
    for (int i = 0; i < 4000; ++i) {
        OptionChoice t = select_option(q, config, rng, SelectMode::train, 1.0, false);
        if (t.option == OptionKind::ask) ++asks;
    }
    CHECK(std::fabs(asks / 4000.0 - 0.5) < 0.05);

    // forced rec overrides everything
    OptionChoice forced = select_option(q, config, rng, SelectMode::train, 1.0, true);
    CHECK(forced.option == OptionKind::rec);

    // train mode with no exploration follows the relaxed sample
    int recs = 0;
    for (int i = 0; i < 4000; ++i) {
        OptionChoice t = select_option(q, config, rng, SelectMode::train, 0.0, false);
        if (t.option == OptionKind::rec) ++recs;
    }
    const auto probs = option_probabilities(q.q_ask.value(), q.q_rec.value());
    CHECK(std::fabs(recs / 4000.0 - probs[1]) < 0.05);
}

TEST_CASE("actor scores: arithmetic and argmax invariance under positive scaling") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    PolicyNetworks nets = make_nets(c, config, 17);
    zero_params(nets.online);
    nets.online.at("act.value.b1").at(0, 0) = 0.5;
    nets.online.at("act.adv.w0").at(config.encoder.state_dim(), 0) = 1.0;
    nets.online.at("act.adv.w1").at(0, 0) = 1.0;
    num::BoundParams bp(nullptr, nets.online);
    Tensor s = Tensor::zeros(1, config.encoder.state_dim());
    Tensor reps = Tensor::zeros(3, config.encoder.embed_dim);
    reps.at(0, 0) = 0.2;
    reps.at(1, 0) = 0.9;
    reps.at(2, 0) = -5.0;  // relu clamps this advantage input
    Tensor scores = actor_scores(bp, s, reps, config);
    CHECK(scores.at(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(scores.at(1, 0) == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(scores.at(2, 0) == doctest::Approx(0.5).epsilon(1e-12));

    Tensor scaled = num::matmul(scores, Tensor::scalar(0.37));
    int best = 0, best_scaled = 0;
    for (int i = 1; i < 3; ++i) {
        if (scaled.at(i, 0) > scaled.at(best_scaled, 0)) best_scaled = i;
        if (scores.at(i, 0) > scores.at(best, 0)) best = i;
    }
    CHECK(best == best_scaled);

    CHECK_THROWS_AS(actor_scores(bp, s, Tensor::zeros(0, config.encoder.embed_dim), config),
                    std::logic_error);
}

TEST_CASE("rank_by_score: descending with ascending-id ties") {
    std::vector<Id> ids{3, 7, 9, 12};
    std::vector<double> scores{0.5, 0.9, 0.9, 0.1};
    auto ranked = rank_by_score(ids, scores);
    CHECK(ranked == std::vector<Id>{7, 9, 3, 12});
}

TEST_CASE("agent_decide masking soundness over 10k random calls") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    config.eps_start = 1.0;  // maximal exploration stresses the masks
    config.eps_end = 1.0;
    PolicyNetworks nets = make_nets(c, config, 23);
    Rng rng(31);
    int calls = 0;
    while (calls < 10000) {
        const Id user = static_cast<Id>(rng.next_index(c.num_users));
        const Id target = static_cast<Id>(rng.next_index(c.num_items));
        SessionState state = reset(c, user, target, rng);
        while (!state.done && calls < 10000) {
            SessionSnapshot view = SessionSnapshot::of(state);
            TurnDecision d = agent_decide(nets, c, view, rng, SelectMode::train, 0);
            ++calls;
            if (d.move.option == OptionKind::ask) {
                CHECK(std::binary_search(view.p_cand.begin(), view.p_cand.end(),
                                         d.move.attribute));
            } else {
                CHECK(d.move.items.size() <= static_cast<std::size_t>(config.rec_size));
                for (Id v : d.move.items) {
                    CHECK(std::binary_search(view.v_cand.begin(), view.v_cand.end(), v));
                }
            }
            CHECK(d.item_ranking.size() == view.v_cand.size());
            StepOutcome out = step(c, state, d.move, d.item_ranking, EnvConfig{});
            state = out.next;
        }
    }
}

TEST_CASE("replay buffer: FIFO eviction and seeded sampling") {
    ReplayBuffer buf(2);
    TransitionRecord r;
    r.action = 1;
    buf.push(r);
    r.action = 2;
    buf.push(r);
    r.action = 3;
    buf.push(r);
    CHECK(buf.size() == 2);
    std::set<Id> actions;
    for (std::size_t i = 0; i < buf.size(); ++i) actions.insert(buf.at(i).action);
    CHECK(actions == std::set<Id>{2, 3});

    Rng a(5), b(5);
    auto s1 = buf.sample(8, a);
    auto s2 = buf.sample(8, b);
    for (std::size_t i = 0; i < 8; ++i) CHECK(s1[i]->action == s2[i]->action);

    ReplayBuffer single(10);
    single.push(r);
    auto s3 = single.sample(128, a);
    CHECK(s3.size() == 128);
    for (auto* p : s3) CHECK(p->action == 3);

    ReplayBuffer empty(4);
    CHECK_THROWS_AS(empty.sample(1, a), std::logic_error);
}

TEST_CASE("compute_targets: terminal records, hand-built toy, sync identity") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    config.gamma = 0.999;
    PolicyNetworks nets = make_nets(c, config, 41);
    zero_params(nets.online);
    zero_params(nets.target);

    const int sd = config.encoder.state_dim();
    nets.online.at("dir.value.b1").at(0, 0) = 0.5;
    nets.online.at("dir.opt_emb").at(0, 0) = 1.0;
    nets.online.at("dir.opt_emb").at(1, 0) = 2.0;
    nets.online.at("dir.adv.w0").at(sd, 0) = 1.0;
    nets.online.at("dir.adv.w1").at(0, 0) = 1.0;
    nets.target.at("dir.value.b1").at(0, 0) = 0.3;
    nets.target.at("dir.opt_emb").at(0, 0) = 1.0;
    nets.target.at("dir.opt_emb").at(1, 0) = 2.0;
    nets.target.at("dir.adv.w0").at(sd, 0) = 1.0;
    nets.target.at("dir.adv.w1").at(0, 0) = 1.0;

    nets.online.at("act.value.b1").at(0, 0) = 0.25;
    nets.online.at("act.adv.w0").at(sd, 0) = 1.0;
    nets.online.at("act.adv.w1").at(0, 0) = 1.0;
    nets.target.at("act.value.b1").at(0, 0) = 0.1;
    nets.target.at("act.adv.w0").at(sd, 0) = 1.0;
    nets.target.at("act.adv.w1").at(0, 0) = 1.0;
    // online: item 1 best (0.9); the target disagrees (item 0 at 0.8)
    // but must evaluate the online pick.
    nets.online.at("embed.entity").at(static_cast<int>(c.item_node(0)), 0) = 0.2;
    nets.online.at("embed.entity").at(static_cast<int>(c.item_node(1)), 0) = 0.9;
    nets.target.at("embed.entity").at(static_cast<int>(c.item_node(0)), 0) = 0.8;
    nets.target.at("embed.entity").at(static_cast<int>(c.item_node(1)), 0) = 0.4;

    TransitionRecord terminal;
    terminal.state = live_snapshot(c, 0, 3, 1);
    terminal.next_state = terminal.state;
    terminal.option = OptionKind::rec;
    terminal.action = 3;
    terminal.r_extrinsic = 1.0;
    terminal.r_intrinsic = 1.0;
    terminal.done = true;

    TransitionRecord mid;
    mid.state = live_snapshot(c, 0, 3, 1);
    mid.option = OptionKind::ask;
    mid.action = 1;
    mid.r_extrinsic = 0.01;
    mid.r_intrinsic = -1.0;
    mid.done = false;
    SessionSnapshot next;
    next.user = 0;
    next.p_acc = {0};
    next.p_rej = {3};
    next.v_cand = {0, 1};
    next.p_cand = {2};
    next.history = {{OptionKind::ask, Feedback::rej}};
    mid.next_state = next;

    Targets t = compute_targets({&terminal, &mid}, nets, c);
    CHECK(t.actor[0] == 1.0);
    CHECK(t.director[0] == 1.0);

    // online Q_o: ask 1.5 < rec 2.5 -> o' = rec; target Q'_o(rec) = 2.3
    CHECK(t.director[1] == doctest::Approx(-1.0 + 0.999 * 2.3).epsilon(1e-12));
    // online actor picks item 1; target evaluates it: 0.1 + 0.4
    CHECK(t.actor[1] == doctest::Approx(0.01 + 0.999 * 0.5).epsilon(1e-12));

    // after sync, double-Q equals the vanilla max-Q target
    nets.sync_target();
    Targets ts = compute_targets({&mid}, nets, c);
    CHECK(ts.actor[0] == doctest::Approx(0.01 + 0.999 * (0.25 + 0.9)).epsilon(1e-12));
    CHECK(ts.director[0] == doctest::Approx(-1.0 + 0.999 * 2.5).epsilon(1e-12));
}

TEST_CASE("intrinsic-off ablation bootstraps the director on extrinsic rewards") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    config.intrinsic = false;
    PolicyNetworks nets = make_nets(c, config, 43);
    zero_params(nets.online);
    zero_params(nets.target);

    TransitionRecord terminal;
    terminal.state = live_snapshot(c, 0, 3, 2);
    terminal.next_state = terminal.state;
    terminal.option = OptionKind::rec;
    terminal.action = 3;
    terminal.r_extrinsic = 1.0;
    terminal.r_intrinsic = -1.0;
    terminal.done = true;
    Targets t = compute_targets({&terminal}, nets, c);
    CHECK(t.director[0] == 1.0);  // r_a, not r_o
}

TEST_CASE("trainer: alternation, sync, staleness, determinism") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    config.batch_size = 4;
    config.target_sync_every = 6;
    config.lr = 1e-3;

    auto fill_buffer = [&](ReplayBuffer& buf, std::uint64_t seed) {
        Rng rng(seed);
        PolicyNetworks nets = make_nets(c, config, 77);
        for (int e = 0; e < 6; ++e) {
            const Id user = static_cast<Id>(rng.next_index(c.num_users));
            const Id target = static_cast<Id>(rng.next_index(c.num_items));
            SessionState state = reset(c, user, target, rng);
            while (!state.done) {
                SessionSnapshot view = SessionSnapshot::of(state);
                TurnDecision d = agent_decide(nets, c, view, rng, SelectMode::train, 0);
                StepOutcome out = step(c, state, d.move, d.item_ranking, EnvConfig{});
                TransitionRecord r;
                r.state = view;
                r.next_state = SessionSnapshot::of(out.next);
                r.option = d.option;
                r.action = d.action;
                r.r_extrinsic = out.extrinsic;
                r.r_intrinsic = out.intrinsic;
                r.gumbel_eps = d.gumbel_eps;
                r.done = out.done;
                buf.push(r);
                state = out.next;
            }
        }
    };

    SUBCASE("director steps leave actor-head moments untouched") {
        Trainer trainer(make_nets(c, config, 51), c);
        ReplayBuffer buf(100);
        fill_buffer(buf, 1);
        Rng rng(2);
        trainer.train_step(buf, rng);  // parity 0: director loss
        CHECK(trainer.director_opt().calls() == 1);
        CHECK(trainer.actor_opt().calls() == 0);
        CHECK_FALSE(trainer.actor_opt().has_moments("act.value.w0"));
        CHECK_FALSE(trainer.director_opt().has_moments("act.value.w0"));
        CHECK(trainer.director_opt().has_moments("dir.value.w0"));
        trainer.train_step(buf, rng);  // parity 1: actor loss
        CHECK(trainer.actor_opt().calls() == 1);
        CHECK(trainer.actor_opt().has_moments("act.value.w0"));
    }

    SUBCASE("target stays bit-identical between syncs, then copies exactly") {
        Trainer trainer(make_nets(c, config, 53), c);
        ReplayBuffer buf(100);
        fill_buffer(buf, 3);
        Rng rng(4);
        auto snapshot = trainer.nets().target.clone();
        for (int i = 0; i < 5; ++i) {
            trainer.train_step(buf, rng);
            CHECK(trainer.nets().target.same_values(snapshot));
            CHECK_FALSE(trainer.nets().online.same_values(snapshot));
        }
        trainer.train_step(buf, rng);  // 6th step triggers the sync
        CHECK(trainer.nets().target.same_values(trainer.nets().online));
    }

    SUBCASE("fixed seeds reproduce the loss curve bitwise") {
        std::array<std::vector<double>, 2> curves;
        for (auto& curve : curves) {
            Trainer trainer(make_nets(c, config, 55), c);
            ReplayBuffer buf(100);
            fill_buffer(buf, 5);
            Rng rng(6);
            for (int i = 0; i < 12; ++i) curve.push_back(trainer.train_step(buf, rng));
        }
        CHECK(curves[0] == curves[1]);
    }

    SUBCASE("loss is non-increasing on a frozen terminal batch") {
        Trainer trainer(make_nets(c, config, 57), c);
        ReplayBuffer buf(8);
        TransitionRecord r;
        r.state = live_snapshot(c, 0, 3, 3);
        r.next_state = r.state;
        r.option = OptionKind::rec;
        r.action = 3;
        r.r_extrinsic = 1.0;
        r.r_intrinsic = 1.0;
        r.done = true;
        for (int i = 0; i < 4; ++i) buf.push(r);  // identical records
        Rng rng(8);
        std::vector<double> dir_losses, act_losses;
        for (int i = 0; i < 100; ++i) {
            const double loss = trainer.train_step(buf, rng);
            (i % 2 == 0 ? dir_losses : act_losses).push_back(loss);
        }
        for (std::size_t i = 1; i < 50; ++i) {
            CHECK(dir_losses[i] <= dir_losses[i - 1] + 1e-12);
            CHECK(act_losses[i] <= act_losses[i - 1] + 1e-12);
        }
    }

    SUBCASE("underfull buffer is rejected") {
        Trainer trainer(make_nets(c, config, 59), c);
        ReplayBuffer buf(10);
        TransitionRecord r;
        r.state = live_snapshot(c, 0, 3, 3);
        r.next_state = r.state;
        r.done = true;
        buf.push(r);
        AgentConfig big = config;
        Rng rng(1);
        Trainer t2(make_nets(c, big, 59), c);
        // batch_size 4 > 1 record
        CHECK_THROWS_AS(t2.train_step(buf, rng), std::logic_error);
    }
}

TEST_CASE("unified ablation picks from the joint action space") {
    Catalog c = test::tiny_catalog();
    AgentConfig config = small_config();
    config.hierarchy = false;
    PolicyNetworks nets = make_nets(c, config, 61);
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const Id user = static_cast<Id>(rng.next_index(c.num_users));
        const Id target = static_cast<Id>(rng.next_index(c.num_items));
        SessionState state = reset(c, user, target, rng);
        SessionSnapshot view = SessionSnapshot::of(state);
        TurnDecision d = agent_decide(nets, c, view, rng, SelectMode::greedy, 0);
        if (d.option == OptionKind::ask) {
            CHECK(std::binary_search(view.p_cand.begin(), view.p_cand.end(), d.move.attribute));
        } else {
            CHECK(!d.move.items.empty());
        }
    }
}
