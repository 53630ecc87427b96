#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "dahcr/env.hpp"
#include "dahcr/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace dahcr;

namespace {

// A random but legal mover for property sweeps.
AgentMove random_move(const SessionState& s, Rng& rng, int rec_size) {
    const bool can_ask = !s.p_cand.empty();
    if (can_ask && rng.next_double() < 0.5) {
        return AgentMove::ask(s.p_cand[rng.next_index(s.p_cand.size())]);
    }
    std::vector<Id> pool = s.v_cand;
    rng.shuffle(pool);
    pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(rec_size)));
    std::sort(pool.begin(), pool.end());
    return AgentMove::rec(std::move(pool));
}

std::vector<Id> id_ranking(const SessionState& s) {
    return s.v_cand;  // ascending ids as a stand-in actor ranking
}

}  // namespace

TEST_CASE("reset seeds one accepted attribute of the target") {
    Catalog c = test::tiny_catalog();
    Rng rng(5);
    // item 4 has exactly one attribute: deterministic p0.
    SessionState s = reset(c, 1, 4, rng);
    CHECK(s.p_acc == std::vector<Id>{3});
    CHECK(s.v_cand == std::vector<Id>{4});
    CHECK(s.turn == 0);
    CHECK(s.history.empty());

    // target always remains a candidate after reset
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng r2(seed);
        SessionState t = reset(c, 0, 3, r2);
        CHECK(std::binary_search(t.v_cand.begin(), t.v_cand.end(), Id{3}));
    }

    // fixed seed, fixed p0
    Rng a(7), b(7);
    CHECK(reset(c, 0, 3, a).p_acc == reset(c, 0, 3, b).p_acc);
}

TEST_CASE("simulate_user rules") {
    Catalog c = test::tiny_catalog();
    Rng rng(1);
    SessionState s = reset(c, 0, 3, rng);  // target = item 3 {0,1,2}

    for (Id p : s.p_cand) {
        const bool has = std::binary_search(c.item_attributes[3].begin(),
                                            c.item_attributes[3].end(), p);
        CHECK((simulate_user(c, s, AgentMove::ask(p)) == Feedback::acc) == has);
    }
    std::vector<Id> no_target;
    for (Id v : s.v_cand) {
        if (v != 3) no_target.push_back(v);
    }
    if (!no_target.empty()) {
        CHECK(simulate_user(c, s, AgentMove::rec(no_target)) == Feedback::rej);
    }
    CHECK(simulate_user(c, s, AgentMove::rec(s.v_cand)) == Feedback::acc);

    CHECK_THROWS_AS(simulate_user(c, s, AgentMove::ask(s.p_acc.front())), ValidationError);
    CHECK_THROWS_AS(simulate_user(c, s, AgentMove::rec({})), ValidationError);
}

TEST_CASE("apply_transition per feedback case") {
    Catalog c = test::tiny_catalog();
    Rng rng(2);
    SessionState s;
    s.user = 0;
    s.target = 3;
    s.p_acc = {0};
    s.v_cand = items_with_all_attributes(c, s.p_acc);  // {0,1,3}
    s.p_cand = {1, 2};

    SUBCASE("accepted ask filters items") {
        SessionState n = apply_transition(c, s, AgentMove::ask(1), Feedback::acc);
        CHECK(n.p_acc == std::vector<Id>{0, 1});
        CHECK(n.v_cand == std::vector<Id>{0, 3});
        CHECK(n.turn == 1);
        CHECK(n.history.size() == 1);
    }
    SUBCASE("rejected ask keeps candidate items, drops the attribute") {
        SessionState n = apply_transition(c, s, AgentMove::ask(1), Feedback::rej);
        CHECK(n.p_rej == std::vector<Id>{1});
        CHECK(n.v_cand == s.v_cand);  // rejected attributes do not filter items
        CHECK(std::find(n.p_cand.begin(), n.p_cand.end(), 1) == n.p_cand.end());
    }
    SUBCASE("rejected recommendation removes exactly the shown items") {
        SessionState n = apply_transition(c, s, AgentMove::rec({0, 1}), Feedback::rej);
        CHECK(n.v_rej == std::vector<Id>{0, 1});
        CHECK(n.v_cand == std::vector<Id>{3});
    }
    SUBCASE("done states refuse transitions") {
        SessionState done_state = s;
        done_state.done = true;
        CHECK_THROWS_AS(apply_transition(c, done_state, AgentMove::ask(1), Feedback::acc),
                        std::logic_error);
    }
}

TEST_CASE("extrinsic reward values") {
    EnvConfig env;
    CHECK(extrinsic_reward(OptionKind::rec, Feedback::acc, 3, true, env) == 1.0);
    CHECK(extrinsic_reward(OptionKind::rec, Feedback::rej, 3, false, env) == doctest::Approx(-0.1));
    CHECK(extrinsic_reward(OptionKind::ask, Feedback::acc, 3, false, env) == doctest::Approx(0.01));
    CHECK(extrinsic_reward(OptionKind::ask, Feedback::rej, 3, false, env) == doctest::Approx(-0.1));
    // failed final turn adds the quit penalty
    CHECK(extrinsic_reward(OptionKind::rec, Feedback::rej, 15, false, env) ==
          doctest::Approx(-0.4));
    CHECK(extrinsic_reward(OptionKind::ask, Feedback::rej, 15, false, env) ==
          doctest::Approx(-0.4));
    // successful final turn does not
    CHECK(extrinsic_reward(OptionKind::rec, Feedback::acc, 15, true, env) == 1.0);
}

TEST_CASE("intrinsic reward follows the top-K certainty rule") {
    std::vector<Id> ranking;
    for (Id v = 0; v < 20; ++v) ranking.push_back(v);
    // target ranked 3rd
    CHECK(intrinsic_reward(OptionKind::rec, ranking, 2) == 1.0);
    CHECK(intrinsic_reward(OptionKind::ask, ranking, 2) == -1.0);
    // target ranked 11th: outside the top ten
    CHECK(intrinsic_reward(OptionKind::ask, ranking, 10) == 1.0);
    CHECK(intrinsic_reward(OptionKind::rec, ranking, 10) == -1.0);
    // boundary: rank exactly 10
    CHECK(intrinsic_reward(OptionKind::rec, ranking, 9) == 1.0);
    CHECK_THROWS_AS(intrinsic_reward(OptionKind::ask, ranking, 99), std::logic_error);
    // exactly one option earns +1 in any state
    for (Id target : {Id{0}, Id{9}, Id{10}, Id{19}}) {
        const double r_ask = intrinsic_reward(OptionKind::ask, ranking, target);
        const double r_rec = intrinsic_reward(OptionKind::rec, ranking, target);
        CHECK(r_ask + r_rec == 0.0);
    }
}

TEST_CASE("step composition, success and timeout") {
    Catalog c = test::tiny_catalog();
    Rng rng(3);
    SessionState s = reset(c, 0, 3, rng);

    StepOutcome win = step(c, s, AgentMove::rec(s.v_cand), id_ranking(s));
    CHECK(win.feedback == Feedback::acc);
    CHECK(win.done);
    CHECK(win.next.success);
    CHECK(win.extrinsic == 1.0);

    // drive to the turn limit with one wrong recommendation per turn
    SynthConfig big;
    big.users = 4;
    big.items = 80;
    big.attributes = 10;
    auto gen = generate_synthetic(big, 9);
    // pick a reset whose revealed attribute is broad, so candidates abound
    SessionState t;
    for (std::uint64_t s2 = 0; s2 < 50; ++s2) {
        Rng r2(s2);
        t = reset(gen.catalog, 0, gen.catalog.interactions.front().second, r2);
        if (t.v_cand.size() > 16) break;
    }
    REQUIRE(t.v_cand.size() > 16);
    EnvConfig env;
    int steps = 0;
    while (!t.done) {
        std::vector<Id> wrong;
        for (Id v : t.v_cand) {
            if (v != t.target) {
                wrong.push_back(v);
                break;
            }
        }
        REQUIRE(!wrong.empty());
        StepOutcome out = step(gen.catalog, t, AgentMove::rec(wrong), id_ranking(t), env);
        t = out.next;
        ++steps;
        if (t.done) {
            CHECK(!t.success);
            CHECK(t.turn == env.max_turns);
            CHECK(out.extrinsic <= doctest::Approx(-0.4));
        }
    }
    CHECK(steps == env.max_turns);
    CHECK_THROWS_AS(step(gen.catalog, t, AgentMove::ask(0), id_ranking(t), env),
                    std::logic_error);
}

TEST_CASE("property: 1000 random episodes uphold every invariant") {
    SynthConfig cfg;
    cfg.users = 20;
    cfg.items = 80;
    cfg.attributes = 14;
    cfg.interactions_per_user = {4, 8};
    auto gen = generate_synthetic(cfg, 21);
    const Catalog& c = gen.catalog;
    EnvConfig env;

    Rng rng(1234);
    int episodes = 0;
    while (episodes < 1000) {
        const Id user = static_cast<Id>(rng.next_index(c.num_users));
        const Id target = static_cast<Id>(rng.next_index(c.num_items));
        SessionState s = reset(c, user, target, rng);
        check_session_invariants(c, s);
        auto prev = s;
        while (!s.done) {
            AgentMove move = random_move(s, rng, env.rec_size);
            StepOutcome out = step(c, s, move, id_ranking(s), env);
            check_session_invariants(c, out.next);
            // monotone evolution
            CHECK(out.next.p_acc.size() >= prev.p_acc.size());
            CHECK(out.next.p_rej.size() >= prev.p_rej.size());
            CHECK(out.next.v_rej.size() >= prev.v_rej.size());
            CHECK(out.next.v_cand.size() <= prev.v_cand.size());
            CHECK(std::includes(prev.v_cand.begin(), prev.v_cand.end(),
                                out.next.v_cand.begin(), out.next.v_cand.end()));
            CHECK(out.next.turn <= env.max_turns);
            CHECK((out.intrinsic == 1.0 || out.intrinsic == -1.0));
            prev = out.next;
            s = out.next;
        }
        ++episodes;
    }
}
