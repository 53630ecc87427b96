#include <cstdlib>
#include <iostream>
#include <sstream>

#include "dahcr/harness.hpp"

namespace dahcr {

namespace {

struct Answer {
    enum Kind { yes, no, quit, eof } kind = no;
    int pick = 0;  // 1-based item choice on recommendations
};

// Asks accept y/n; recommendations also accept a 1-based item number.
Answer prompt(std::istream& in, std::ostream& out, int max_pick) {
    std::string line;
    while (true) {
        out << "> " << std::flush;
        if (!std::getline(in, line)) return {Answer::eof, 0};
        if (line == "y" || line == "yes") return {Answer::yes, 1};
        if (line == "n" || line == "no") return {Answer::no, 0};
        if (line == "quit" || line == "q") return {Answer::quit, 0};
        if (max_pick > 0 && !line.empty()) {
            char* end = nullptr;
            long v = std::strtol(line.c_str(), &end, 10);
            if (end && *end == '\0' && v >= 1 && v <= max_pick) {
                return {Answer::yes, static_cast<int>(v)};
            }
        }
        if (max_pick > 0) {
            out << "please answer with an item number (1-" << max_pick << "), n or quit\n";
        } else {
            out << "please answer y, n or quit\n";
        }
    }
}

}  // namespace

EpisodeLog play(std::istream& in, std::ostream& out, const Catalog& catalog,
                const PolicyNetworks& nets, Id user, Id target, std::uint64_t seed,
                const EnvConfig& env) {
    Rng rng(seed);
    SessionState state = reset(catalog, user, target, rng);

    EpisodeLog log;
    log.user = user;
    log.target = target;
    log.success_turn = env.max_turns;

    out << "session for user " << user << "; initial accepted attribute #" << state.p_acc.front()
        << " (" << state.v_cand.size() << " matching items)\n";
    out << "answer y/n to each question, quit to stop\n";

    while (!state.done) {
        if (state.v_cand.empty()) {
            out << "no items match your answers; ending the session\n";
            break;
        }
        TurnDecision d = agent_decide(nets, catalog, SessionSnapshot::of(state), rng,
                                      SelectMode::greedy, 0);
        int max_pick = 0;
        if (d.move.option == OptionKind::ask) {
            out << "turn " << state.turn + 1 << ": do you want attribute #" << d.move.attribute
                << "?\n";
        } else {
            out << "turn " << state.turn + 1 << ": is one of these what you're looking for?\n";
            for (std::size_t i = 0; i < d.move.items.size(); ++i) {
                out << "  " << i + 1 << ") item#" << d.move.items[i] << "\n";
            }
            max_pick = static_cast<int>(d.move.items.size());
        }
        Answer ans = prompt(in, out, max_pick);
        if (ans.kind == Answer::eof) {
            out << "\n(end of input; aborting session)\n";
            break;
        }
        if (ans.kind == Answer::quit) {
            out << "session aborted\n";
            break;
        }
        const Feedback feedback = ans.kind == Answer::yes ? Feedback::acc : Feedback::rej;

        SessionState next = apply_transition(catalog, state, d.move, feedback);
        next.success = d.move.option == OptionKind::rec && feedback == Feedback::acc;
        next.done = next.success || next.turn >= env.max_turns;

        TurnRecord rec;
        rec.turn = next.turn;
        rec.option = d.move.option;
        rec.attribute = d.move.attribute;
        rec.items = d.move.items;
        rec.feedback = feedback;
        rec.r_extrinsic = extrinsic_reward(d.move.option, feedback, next.turn, next.success, env);
        rec.r_intrinsic = 0.0;  // no simulator target to rank against
        rec.v_cand_size = state.v_cand.size();
        rec.p_cand_size = state.p_cand.size();
        log.turns.push_back(std::move(rec));

        if (next.success) {
            log.success = true;
            log.success_turn = next.turn;
            log.success_rank = ans.pick;
            out << "glad to help!\n";
        } else if (next.turn >= env.max_turns) {
            out << "out of turns, sorry\n";
        }
        state = std::move(next);
    }
    return log;
}

}  // namespace dahcr
