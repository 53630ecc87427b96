#include "dahcr/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dahcr/errors.hpp"

namespace dahcr {

using num::BoundParams;
using num::Tensor;

namespace {

constexpr double kProbFloor = 1e-12;

std::vector<Id> attr_global_ids(const Catalog& catalog, const std::vector<Id>& attrs) {
    std::vector<Id> out;
    out.reserve(attrs.size());
    for (Id p : attrs) out.push_back(catalog.attribute_node(p));
    return out;
}

std::vector<Id> item_global_ids(const Catalog& catalog, const std::vector<Id>& items) {
    std::vector<Id> out;
    out.reserve(items.size());
    for (Id v : items) out.push_back(catalog.item_node(v));
    return out;
}

std::vector<double> column(const Tensor& t) {
    return *t.data;
}

struct ScoredSets {
    std::vector<double> item_scores;
    std::vector<double> attr_scores;  // empty when not needed
};

ScoredSets score_candidates(const BoundParams& bp, const Encoded& enc, const Catalog& catalog,
                            const SessionSnapshot& view, const AgentConfig& config,
                            bool want_attrs) {
    ScoredSets out;
    if (view.v_cand.empty()) throw std::logic_error("score_candidates: empty candidate items");
    Tensor item_reps = enc.reps_for(item_global_ids(catalog, view.v_cand));
    out.item_scores = column(actor_scores(bp, enc.state, item_reps, config));
    if (want_attrs && !view.p_cand.empty()) {
        Tensor attr_reps = enc.reps_for(attr_global_ids(catalog, view.p_cand));
        out.attr_scores = column(actor_scores(bp, enc.state, attr_reps, config));
    }
    return out;
}

std::size_t argmax_tie_ascending(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

}  // namespace

PolicyNetworks PolicyNetworks::create(const Catalog& catalog, const EmbeddingTable& embeddings,
                                      const AgentConfig& config, std::uint64_t seed) {
    const auto& enc = config.encoder;
    if (enc.layers < 1 || enc.layers > 4) {
        throw ValidationError("encoder layers must be in 1..4");
    }
    if (enc.heads < 1 || enc.embed_dim % enc.heads != 0) {
        throw ValidationError("embedding dim not divisible by attention heads");
    }
    if (embeddings.entities.rows != static_cast<int>(catalog.num_nodes()) ||
        embeddings.entities.cols != enc.embed_dim) {
        throw ValidationError("embedding table does not match catalog/encoder dims");
    }

    Rng rng(Rng::mix(seed, 0xa9e27));
    PolicyNetworks nets;
    nets.config = config;

    auto& entity = nets.online.add("embed.entity", embeddings.entities.rows,
                                   embeddings.entities.cols);
    *entity.data = *embeddings.entities.data;

    add_encoder_params(nets.online, enc, rng);

    const int sd = enc.state_dim();
    const int d = enc.embed_dim;
    auto& opt_emb = nets.online.add("dir.opt_emb", 2, d);
    num::init_fan_in(opt_emb, d, rng);
    num::add_mlp(nets.online, "dir.value", {sd, enc.hidden, 1}, rng);
    num::add_mlp(nets.online, "dir.adv", {sd + d, enc.hidden, 1}, rng);
    num::add_mlp(nets.online, "act.value", {sd, enc.hidden, 1}, rng);
    num::add_mlp(nets.online, "act.adv", {sd + d, enc.hidden, 1}, rng);

    nets.target = nets.online.clone();
    return nets;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(TransitionRecord record) {
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(record));
    } else {
        ring_[next_] = std::move(record);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<const TransitionRecord*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (ring_.empty()) throw std::logic_error("sample from an empty replay buffer");
    std::vector<const TransitionRecord*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        out.push_back(&ring_[rng.next_index(ring_.size())]);
    }
    return out;
}

DirectorOut director_q(const BoundParams& params, const Tensor& state,
                       const AgentConfig& config) {
    auto value_w = num::mlp_weights(params, "dir.value", 2);
    auto adv_w = num::mlp_weights(params, "dir.adv", 2);
    Tensor v = num::mlp(state, value_w);
    const Tensor& opt_emb = params["dir.opt_emb"];
    Tensor a_ask = num::mlp(num::concat_cols(state, num::slice_rows(opt_emb, 0, 1)), adv_w);
    Tensor a_rec = num::mlp(num::concat_cols(state, num::slice_rows(opt_emb, 1, 1)), adv_w);
    if (config.dueling_mean_subtract) {
        Tensor mean = num::scale(num::add(a_ask, a_rec), 0.5);
        a_ask = num::sub(a_ask, mean);
        a_rec = num::sub(a_rec, mean);
    }
    return {num::add(v, a_ask), num::add(v, a_rec)};
}

std::array<double, 2> option_probabilities(double q_ask, double q_rec) {
    const double m = std::max(q_ask, q_rec);
    const double ea = std::exp(q_ask - m);
    const double er = std::exp(q_rec - m);
    return {ea / (ea + er), er / (ea + er)};
}

GumbelSample gumbel_relaxation(const std::array<double, 2>& probs, double tau, Rng& rng) {
    if (tau <= 0.0) throw ValidationError("gumbel: tau must be positive");
    GumbelSample s;
    s.eps = {rng.next_gumbel(), rng.next_gumbel()};
    double logit[2];
    for (int i = 0; i < 2; ++i) {
        logit[i] = (std::log(std::max(probs[i], kProbFloor)) + s.eps[i]) / tau;
    }
    const double m = std::max(logit[0], logit[1]);
    const double e0 = std::exp(logit[0] - m);
    const double e1 = std::exp(logit[1] - m);
    s.p_star = {e0 / (e0 + e1), e1 / (e0 + e1)};
    return s;
}

Tensor relaxed_option_scalar(const DirectorOut& q, OptionKind option,
                             const std::array<double, 2>& eps, double tau) {
    // softmax over Q, then the relaxation, all on the tape.
    Tensor logits = num::concat_cols(q.q_ask, q.q_rec);
    Tensor p = num::softmax_rows(logits);
    Tensor noisy = num::scale(num::add(num::log_op(num::add_scalar(p, kProbFloor)),
                                       Tensor::row({eps[0], eps[1]})),
                              1.0 / tau);
    Tensor p_star = num::softmax_rows(noisy);
    return num::slice_cols(p_star, option == OptionKind::ask ? 0 : 1, 1);
}

OptionChoice select_option(const DirectorOut& q, const AgentConfig& config, Rng& rng,
                           SelectMode mode, double epsilon, bool force_rec) {
    OptionChoice choice;
    const double q_ask = q.q_ask.value();
    const double q_rec = q.q_rec.value();
    if (mode == SelectMode::greedy) {
        choice.option = q_rec > q_ask ? OptionKind::rec : OptionKind::ask;
        choice.p_star = choice.option == OptionKind::ask ? std::array<double, 2>{1.0, 0.0}
                                                         : std::array<double, 2>{0.0, 1.0};
    } else {
        auto probs = option_probabilities(q_ask, q_rec);
        if (config.gumbel) {
            GumbelSample s = gumbel_relaxation(probs, config.tau, rng);
            choice.p_star = s.p_star;
            choice.eps = s.eps;
            choice.option = s.p_star[1] > s.p_star[0] ? OptionKind::rec : OptionKind::ask;
        } else {
            choice.option = probs[1] > probs[0] ? OptionKind::rec : OptionKind::ask;
            choice.p_star = choice.option == OptionKind::ask ? std::array<double, 2>{1.0, 0.0}
                                                             : std::array<double, 2>{0.0, 1.0};
        }
        if (epsilon > 0.0 && rng.next_double() < epsilon) {
            choice.option = rng.next_double() < 0.5 ? OptionKind::ask : OptionKind::rec;
            choice.explored = true;
        }
    }
    if (force_rec && choice.option != OptionKind::rec) {
        choice.option = OptionKind::rec;
        choice.forced = true;
    }
    return choice;
}

Tensor actor_scores(const BoundParams& params, const Tensor& state, const Tensor& reps,
                    const AgentConfig& config) {
    if (reps.rows == 0) throw std::logic_error("actor_scores: empty candidate set");
    auto value_w = num::mlp_weights(params, "act.value", 2);
    auto adv_w = num::mlp_weights(params, "act.adv", 2);
    Tensor v = num::mlp(state, value_w);  // 1x1
    Tensor ones(reps.rows, 1);
    for (int i = 0; i < reps.rows; ++i) ones.at(i, 0) = 1.0;
    Tensor tiled = num::matmul(ones, state);
    Tensor adv = num::mlp(num::concat_cols(tiled, reps), adv_w);  // n x 1
    (void)config;
    return num::add(adv, v);
}

std::vector<Id> rank_by_score(const std::vector<Id>& ids, const std::vector<double>& scores) {
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::vector<Id> out;
    out.reserve(ids.size());
    for (auto i : order) out.push_back(ids[i]);
    return out;
}

TurnDecision agent_decide(const PolicyNetworks& nets, const Catalog& catalog,
                          const SessionSnapshot& view, Rng& rng, SelectMode mode,
                          std::int64_t env_step) {
    const AgentConfig& config = nets.config;
    BoundParams bp(nullptr, nets.online);
    Encoded enc = encode_state(view, catalog, bp, config.encoder);
    const double epsilon = mode == SelectMode::train ? config.epsilon_at(env_step) : 0.0;

    TurnDecision d;
    auto scored = score_candidates(bp, enc, catalog, view, config, /*want_attrs=*/true);
    d.item_ranking = rank_by_score(view.v_cand, scored.item_scores);

    if (!config.hierarchy) {
        // Unified selection over the joint candidate space.
        const std::size_t n_attr = view.p_cand.size();
        std::size_t best_attr = n_attr ? argmax_tie_ascending(scored.attr_scores) : 0;
        std::size_t best_item = argmax_tie_ascending(scored.item_scores);
        bool pick_attr;
        if (n_attr == 0) {
            pick_attr = false;
        } else {
            pick_attr = scored.attr_scores[best_attr] >= scored.item_scores[best_item];
        }
        if (mode == SelectMode::train && epsilon > 0.0 && rng.next_double() < epsilon) {
            const std::size_t total = n_attr + view.v_cand.size();
            const std::size_t pick = rng.next_index(total);
            pick_attr = pick < n_attr;
            if (pick_attr) best_attr = pick;
        }
        if (pick_attr) {
            d.option = OptionKind::ask;
            d.action = view.p_cand[best_attr];
            d.move = AgentMove::ask(d.action);
        } else {
            d.option = OptionKind::rec;
            std::vector<Id> top(d.item_ranking.begin(),
                                d.item_ranking.begin() +
                                    std::min<std::size_t>(d.item_ranking.size(),
                                                          static_cast<std::size_t>(config.rec_size)));
            d.action = top.front();
            d.move = AgentMove::rec(std::move(top));
        }
        return d;
    }

    DirectorOut dq = director_q(bp, enc.state, config);
    OptionChoice oc = select_option(dq, config, rng, mode, epsilon, view.p_cand.empty());
    d.option = oc.option;
    d.gumbel_eps = oc.eps;

    if (oc.option == OptionKind::ask) {
        std::size_t pick = argmax_tie_ascending(scored.attr_scores);
        if (mode == SelectMode::train && epsilon > 0.0 && rng.next_double() < epsilon) {
            pick = rng.next_index(view.p_cand.size());
        }
        d.action = view.p_cand[pick];
        d.move = AgentMove::ask(d.action);
    } else {
        std::vector<Id> list = d.item_ranking;
        if (mode == SelectMode::train && epsilon > 0.0 && rng.next_double() < epsilon) {
            // Promote a uniform candidate to the front of the list.
            const Id pick = view.v_cand[rng.next_index(view.v_cand.size())];
            list.erase(std::find(list.begin(), list.end(), pick));
            list.insert(list.begin(), pick);
        }
        list.resize(std::min<std::size_t>(list.size(), static_cast<std::size_t>(config.rec_size)));
        d.action = list.front();
        d.move = AgentMove::rec(std::move(list));
    }
    return d;
}

namespace {

struct TargetSides {
    bool director = true;
    bool actor = true;
};

Targets compute_targets_impl(const std::vector<const TransitionRecord*>& batch,
                             const PolicyNetworks& nets, const Catalog& catalog,
                             TargetSides sides) {
    const AgentConfig& config = nets.config;
    BoundParams online(nullptr, nets.online);
    BoundParams target(nullptr, nets.target);

    Targets out;
    out.director.reserve(batch.size());
    out.actor.reserve(batch.size());

    for (const TransitionRecord* r : batch) {
        const double r_dir = config.intrinsic ? r->r_intrinsic : r->r_extrinsic;
        if (r->done) {
            out.director.push_back(r_dir);
            out.actor.push_back(r->r_extrinsic);
            continue;
        }
        const SessionSnapshot& next = r->next_state;
        if (next.v_cand.empty()) {
            throw std::logic_error("non-terminal record with no next candidate actions");
        }
        Encoded enc_on = encode_state(next, catalog, online, config.encoder);
        Encoded enc_tg = encode_state(next, catalog, target, config.encoder);

        double y_o = r_dir;
        double y_a = r->r_extrinsic;

        OptionKind next_option = OptionKind::rec;
        if (config.hierarchy) {
            DirectorOut q_on = director_q(online, enc_on.state, config);
            if (!next.p_cand.empty()) {
                next_option = q_on.q_rec.value() > q_on.q_ask.value() ? OptionKind::rec
                                                                      : OptionKind::ask;
            }
            if (sides.director) {
                DirectorOut q_tg = director_q(target, enc_tg.state, config);
                const double q_next =
                    next_option == OptionKind::ask ? q_tg.q_ask.value() : q_tg.q_rec.value();
                y_o = r_dir + config.gamma * q_next;
            }
        }
        if (sides.actor) {
            std::vector<Id> cand_global;
            if (!config.hierarchy) {
                cand_global = attr_global_ids(catalog, next.p_cand);
                auto items = item_global_ids(catalog, next.v_cand);
                cand_global.insert(cand_global.end(), items.begin(), items.end());
            } else if (next_option == OptionKind::ask) {
                cand_global = attr_global_ids(catalog, next.p_cand);
            } else {
                cand_global = item_global_ids(catalog, next.v_cand);
            }
            auto on_scores = column(actor_scores(online, enc_on.state,
                                                 enc_on.reps_for(cand_global), config));
            const std::size_t best = argmax_tie_ascending(on_scores);
            Tensor tg_score = actor_scores(target, enc_tg.state,
                                           enc_tg.reps_for({cand_global[best]}), config);
            y_a = r->r_extrinsic + config.gamma * tg_score.value();
        }
        out.director.push_back(y_o);
        out.actor.push_back(y_a);
    }
    return out;
}

}  // namespace

Targets compute_targets(const std::vector<const TransitionRecord*>& batch,
                        const PolicyNetworks& nets, const Catalog& catalog) {
    return compute_targets_impl(batch, nets, catalog, {true, true});
}

Trainer::Trainer(PolicyNetworks nets, const Catalog& catalog)
    : nets_(std::move(nets)),
      catalog_(&catalog),
      opt_director_({nets_.config.lr, 0.9, 0.999, 1e-8, nets_.config.weight_decay}),
      opt_actor_({nets_.config.lr, 0.9, 0.999, 1e-8, nets_.config.weight_decay}) {}

double Trainer::train_step(const ReplayBuffer& buffer, Rng& rng) {
    const AgentConfig& config = nets_.config;
    if (buffer.size() < static_cast<std::size_t>(config.batch_size)) {
        throw std::logic_error("train_step: buffer below batch size");
    }
    auto batch = buffer.sample(static_cast<std::size_t>(config.batch_size), rng);

    const bool director_step = config.hierarchy && grad_steps_ % 2 == 0;
    Targets targets = compute_targets_impl(batch, nets_, *catalog_,
                                           {director_step, !director_step});

    num::Tape tape;
    BoundParams bp(&tape, nets_.online);
    Tensor loss;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const TransitionRecord* r = batch[i];
        Encoded enc = encode_state(r->state, *catalog_, bp, config.encoder);
        Tensor q;
        if (director_step) {
            DirectorOut dq = director_q(bp, enc.state, config);
            q = r->option == OptionKind::ask ? dq.q_ask : dq.q_rec;
            q = num::sub(q, Tensor::scalar(targets.director[i]));
        } else {
            const Id global = r->option == OptionKind::ask
                                  ? catalog_->attribute_node(r->action)
                                  : catalog_->item_node(r->action);
            Tensor score = actor_scores(bp, enc.state, enc.reps_for({global}), config);
            if (config.hierarchy && config.gumbel) {
                DirectorOut dq = director_q(bp, enc.state, config);
                Tensor p_star = relaxed_option_scalar(dq, r->option, r->gumbel_eps, config.tau);
                score = num::mul(score, p_star);
            }
            q = num::sub(score, Tensor::scalar(targets.actor[i]));
        }
        Tensor sq = num::mul(q, q);
        loss = i == 0 ? sq : num::add(loss, sq);
    }
    loss = num::scale(loss, 1.0 / static_cast<double>(batch.size()));
    num::Gradients grads = tape.backward(loss);

    std::vector<std::pair<std::string, const std::vector<double>*>> pairs;
    for (const auto& name : nets_.online.names()) {
        if (director_step && !config.l1_updates_encoder &&
            name.rfind("dir.", 0) != 0) {
            continue;
        }
        const Tensor& bound = bp[name];
        if (!grads.reached(bound.node)) continue;
        pairs.emplace_back(name, grads.raw(bound.node));
    }
    (director_step ? opt_director_ : opt_actor_).step(nets_.online, pairs);

    ++grad_steps_;
    if (config.target_sync_every > 0 && grad_steps_ % config.target_sync_every == 0) {
        nets_.sync_target();
    }
    return loss.value();
}

}  // namespace dahcr
