#pragma once

#include <unordered_map>
#include <vector>

#include "dahcr/catalog.hpp"
#include "dahcr/env.hpp"
#include "dahcr/nn.hpp"

namespace dahcr {

// Everything the encoder may see about a session. Deliberately excludes
// the target item; replay entries store these facts and re-encode them
// with current parameters.
struct SessionSnapshot {
    Id user = 0;
    std::vector<Id> p_acc;
    std::vector<Id> p_rej;
    std::vector<Id> v_rej;
    std::vector<Id> v_cand;
    std::vector<Id> p_cand;
    std::vector<HistoryEvent> history;

    static SessionSnapshot of(const SessionState& s) {
        return {s.user, s.p_acc, s.p_rej, s.v_rej, s.v_cand, s.p_cand, s.history};
    }
    bool operator==(const SessionSnapshot&) const = default;
};

struct EncoderConfig {
    int layers = 1;       // hypergraph layers, 1..4
    int heads = 1;        // attention heads, embed_dim divisible
    bool residual = false;
    int item_cap = 3000;  // candidate items entering the graph
    int embed_dim = 64;
    int hidden = 100;     // GRU hidden size
    bool hypergraph = true;  // off: connectivity state = mean of raw node embeddings

    int state_dim() const { return hidden + embed_dim + 20; }
};

// Per-turn incidence structure: one hyperedge per asked attribute tying
// the user, the attribute and the present items carrying it. The user
// row is +1/-1 by accept/reject, item rows are 1/|V_h|, the attribute's
// own row is 1.
struct Hypergraph {
    std::vector<Id> node_ids;         // global ids: user, attributes asc, items asc
    std::vector<Id> edge_attributes;  // ascending
    std::vector<char> edge_accepted;  // channel per hyperedge
    num::Tensor incidence;            // |N| x |H|
    std::vector<int> degrees;         // nonzero count per column, >= 2
};

Hypergraph build_hypergraph(const SessionSnapshot& s, const Catalog& catalog,
                            int item_cap = 3000);

// History event vocabulary: (ask,acc)=0, (ask,rej)=1, (rec,rej)=2.
int history_event_index(const HistoryEvent& e);

void add_encoder_params(num::ParamSet& ps, const EncoderConfig& config, Rng& rng);

// GRU fold over event embeddings, zero initial hidden state.
num::Tensor encode_history(const std::vector<HistoryEvent>& history,
                           const num::BoundParams& params, const EncoderConfig& config);

// Hyperedge features from node embeddings: H0 = D^-1 A^T E W_n, split
// into the accept/reject channels in hyperedge order.
struct ChannelFeatures {
    num::Tensor acc;  // |H_acc| x d (possibly empty)
    num::Tensor rej;
};
ChannelFeatures hyperedge_aggregate(const Hypergraph& hg, const num::Tensor& node_embeddings,
                                    const num::Tensor& w_n);

// One attention layer per channel, separate parameters.
ChannelFeatures hyperedge_interact(const ChannelFeatures& h, int layer,
                                   const num::BoundParams& params, const EncoderConfig& config);

// Nodes refined from hyperedges: relu(A * H), with H merged back into
// hyperedge order.
num::Tensor refine_nodes(const Hypergraph& hg, const ChannelFeatures& h);

std::vector<double> length_binary(std::size_t n);  // 10 bits, MSB first, clamped

struct Encoded {
    num::Tensor state;      // 1 x state_dim
    num::Tensor node_reps;  // |N| x d, E(n) + sum_l Gamma_l(n)
    std::vector<Id> node_ids;
    std::unordered_map<Id, int> row_of;
    num::Tensor entity_table;  // bound table, fallback rows for ids outside the graph

    // [n x d] action representations for arbitrary global node ids.
    num::Tensor reps_for(const std::vector<Id>& global_ids) const;
};

Encoded encode_state(const SessionSnapshot& s, const Catalog& catalog,
                     const num::BoundParams& params, const EncoderConfig& config);

}  // namespace dahcr
