#include "dahcr/env.hpp"

#include <algorithm>
#include <stdexcept>

#include "dahcr/errors.hpp"

namespace dahcr {

namespace {

bool contains(const std::vector<Id>& sorted, Id x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

void insert_sorted(std::vector<Id>& sorted, Id x) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    if (it == sorted.end() || *it != x) sorted.insert(it, x);
}

std::vector<Id> set_minus(const std::vector<Id>& a, const std::vector<Id>& b) {
    std::vector<Id> out;
    out.reserve(a.size());
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// V_cand = items with every accepted attribute, minus rejected items;
// P_cand = attributes of the candidates, minus everything already asked.
void recompute_candidates(const Catalog& catalog, SessionState& s) {
    s.v_cand = set_minus(items_with_all_attributes(catalog, s.p_acc), s.v_rej);
    std::vector<Id> asked;
    std::merge(s.p_acc.begin(), s.p_acc.end(), s.p_rej.begin(), s.p_rej.end(),
               std::back_inserter(asked));
    s.p_cand = set_minus(attributes_of_items(catalog, s.v_cand), asked);
}

}  // namespace

SessionState reset(const Catalog& catalog, Id user, Id target, Rng& rng) {
    if (user >= catalog.num_users) throw ValidationError("reset: invalid user id");
    if (target >= catalog.num_items) throw ValidationError("reset: invalid item id");
    const auto& attrs = catalog.item_attributes[target];
    if (attrs.empty()) throw ValidationError("reset: target has no attributes");
    SessionState s;
    s.user = user;
    s.target = target;
    s.p_acc.push_back(attrs[rng.next_index(attrs.size())]);
    recompute_candidates(catalog, s);
    return s;
}

Feedback simulate_user(const Catalog& catalog, const SessionState& state, const AgentMove& move) {
    const auto& target_attrs = catalog.item_attributes[state.target];
    if (move.option == OptionKind::ask) {
        if (!contains(state.p_cand, move.attribute)) {
            throw ValidationError("simulate_user: asked attribute not in the candidate set");
        }
        return contains(target_attrs, move.attribute) ? Feedback::acc : Feedback::rej;
    }
    if (move.items.empty()) throw ValidationError("simulate_user: empty recommendation");
    std::vector<Id> seen;
    for (Id v : move.items) {
        if (!contains(state.v_cand, v)) {
            throw ValidationError("simulate_user: recommended item not in the candidate set");
        }
        insert_sorted(seen, v);
    }
    if (seen.size() != move.items.size()) {
        throw ValidationError("simulate_user: duplicate items in recommendation");
    }
    for (Id v : move.items) {
        if (v == state.target) return Feedback::acc;
    }
    return Feedback::rej;
}

SessionState apply_transition(const Catalog& catalog, const SessionState& state,
                              const AgentMove& move, Feedback feedback) {
    if (state.done) throw std::logic_error("apply_transition on a finished session");
    SessionState next = state;
    if (move.option == OptionKind::ask) {
        if (feedback == Feedback::acc) {
            insert_sorted(next.p_acc, move.attribute);
        } else {
            insert_sorted(next.p_rej, move.attribute);
        }
    } else if (feedback == Feedback::rej) {
        for (Id v : move.items) insert_sorted(next.v_rej, v);
    }
    recompute_candidates(catalog, next);
    next.turn = state.turn + 1;
    next.history.push_back({move.option, feedback});
    return next;
}

double extrinsic_reward(OptionKind option, Feedback feedback, int turn_after, bool success,
                        const EnvConfig& config) {
    double r;
    if (option == OptionKind::rec) {
        r = feedback == Feedback::acc ? config.r_rec_acc : config.r_rec_rej;
    } else {
        r = feedback == Feedback::acc ? config.r_ask_acc : config.r_ask_rej;
    }
    if (turn_after >= config.max_turns && !success) r += config.r_quit;
    return r;
}

double intrinsic_reward(OptionKind taken, const std::vector<Id>& item_ranking, Id target,
                        int rec_size) {
    int rank = 0;
    for (std::size_t i = 0; i < item_ranking.size(); ++i) {
        if (item_ranking[i] == target) {
            rank = static_cast<int>(i) + 1;
            break;
        }
    }
    if (rank == 0) {
        throw std::logic_error("intrinsic_reward: target missing from the actor's ranking");
    }
    const OptionKind correct = rank <= rec_size ? OptionKind::rec : OptionKind::ask;
    return taken == correct ? 1.0 : -1.0;
}

StepOutcome step(const Catalog& catalog, const SessionState& state, const AgentMove& move,
                 const std::vector<Id>& item_ranking, const EnvConfig& config) {
    if (state.done) throw std::logic_error("step on a finished session");
    StepOutcome out;
    out.feedback = simulate_user(catalog, state, move);
    out.next = apply_transition(catalog, state, move, out.feedback);
    out.next.success = move.option == OptionKind::rec && out.feedback == Feedback::acc;
    out.next.done = out.next.success || out.next.turn >= config.max_turns;
    out.done = out.next.done;
    out.extrinsic = extrinsic_reward(move.option, out.feedback, out.next.turn,
                                     out.next.success, config);
    out.intrinsic = intrinsic_reward(move.option, item_ranking, state.target, config.rec_size);
    return out;
}

void check_session_invariants(const Catalog& catalog, const SessionState& state) {
    auto fail = [](const char* what) { throw std::logic_error(std::string("invariant: ") + what); };

    const auto& target_attrs = catalog.item_attributes[state.target];
    for (Id p : state.p_acc) {
        if (!contains(target_attrs, p)) fail("accepted attribute the target lacks");
    }
    for (Id p : state.p_rej) {
        if (contains(target_attrs, p)) fail("rejected attribute the target has");
    }

    auto v_expect = set_minus(items_with_all_attributes(catalog, state.p_acc), state.v_rej);
    if (v_expect != state.v_cand) fail("candidate items diverge from the closed form");
    std::vector<Id> asked;
    std::merge(state.p_acc.begin(), state.p_acc.end(), state.p_rej.begin(), state.p_rej.end(),
               std::back_inserter(asked));
    auto p_expect = set_minus(attributes_of_items(catalog, state.v_cand), asked);
    if (p_expect != state.p_cand) fail("candidate attributes diverge from the closed form");

    if (!state.done && !contains(state.v_cand, state.target)) fail("target left the candidates");
    if (state.history.size() != static_cast<std::size_t>(state.turn)) fail("history length != turn");

    for (Id p : state.p_acc) {
        if (contains(state.p_rej, p)) fail("attribute both accepted and rejected");
        if (contains(state.p_cand, p)) fail("accepted attribute still a candidate");
    }
    for (Id p : state.p_rej) {
        if (contains(state.p_cand, p)) fail("rejected attribute still a candidate");
    }
    for (Id v : state.v_rej) {
        if (contains(state.v_cand, v)) fail("rejected item still a candidate");
    }
}

}  // namespace dahcr
