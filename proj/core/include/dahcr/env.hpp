#pragma once

#include <vector>

#include "dahcr/catalog.hpp"
#include "dahcr/rng.hpp"

namespace dahcr {

enum class OptionKind { ask, rec };
enum class Feedback { acc, rej };

// (rec, acc) ends the episode, so histories draw from three events.
struct HistoryEvent {
    OptionKind option;
    Feedback feedback;
    bool operator==(const HistoryEvent&) const = default;
};

struct AgentMove {
    OptionKind option = OptionKind::ask;
    Id attribute = 0;        // option == ask
    std::vector<Id> items;   // option == rec; ordered, no duplicates

    static AgentMove ask(Id attribute) { return {OptionKind::ask, attribute, {}}; }
    static AgentMove rec(std::vector<Id> items) { return {OptionKind::rec, 0, std::move(items)}; }
};

// One conversation's evolving state. All id vectors are sorted; the
// candidate sets are maintained per the closed-form update and always
// recomputable from (p_acc, v_rej).
struct SessionState {
    Id user = 0;
    Id target = 0;  // hidden from the policy; used by the simulator only
    int turn = 0;
    std::vector<Id> p_acc;
    std::vector<Id> p_rej;
    std::vector<Id> v_rej;
    std::vector<Id> v_cand;
    std::vector<Id> p_cand;
    std::vector<HistoryEvent> history;
    bool done = false;
    bool success = false;
};

struct EnvConfig {
    int max_turns = 15;      // T
    int rec_size = 10;       // K
    double r_rec_acc = 1.0;
    double r_rec_rej = -0.1;
    double r_ask_acc = 0.01;
    double r_ask_rej = -0.1;
    double r_quit = -0.3;    // added on the final turn of a failed episode
};

struct StepOutcome {
    Feedback feedback = Feedback::rej;
    double extrinsic = 0.0;
    double intrinsic = 0.0;
    SessionState next;
    bool done = false;
};

// Starts a session: one attribute of the target is revealed and seeds
// the accepted set.
SessionState reset(const Catalog& catalog, Id user, Id target, Rng& rng);

// Rule-based user: accept an asked attribute iff the target has it;
// accept a recommendation iff it contains the target. Validates the
// move against the candidate sets.
Feedback simulate_user(const Catalog& catalog, const SessionState& state, const AgentMove& move);

// Applies the feedback: exactly one of p_acc/p_rej/v_rej grows, the
// candidate sets are recomputed, the turn advances and the event is
// appended to the history.
SessionState apply_transition(const Catalog& catalog, const SessionState& state,
                              const AgentMove& move, Feedback feedback);

double extrinsic_reward(OptionKind option, Feedback feedback, int turn_after, bool success,
                        const EnvConfig& config);

// +1 when the taken option matches what the actor's ranking implies
// (recommend iff the target sits in the top rec_size), else -1.
double intrinsic_reward(OptionKind taken, const std::vector<Id>& item_ranking, Id target,
                        int rec_size = 10);

// simulate_user + apply_transition + both reward channels.
StepOutcome step(const Catalog& catalog, const SessionState& state, const AgentMove& move,
                 const std::vector<Id>& item_ranking, const EnvConfig& config = {});

// Recomputes the candidate sets from scratch and cross-checks every
// invariant; used by property tests.
void check_session_invariants(const Catalog& catalog, const SessionState& state);

}  // namespace dahcr
