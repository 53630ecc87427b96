#include "dahcr/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace dahcr {

using num::Tensor;

namespace {

bool contains(const std::vector<Id>& sorted, Id x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

// Candidate items admitted to the graph when the candidate set exceeds
// the cap: best attribute-match score first, ties by ascending id. The
// full set still defines move legality elsewhere.
std::vector<Id> capped_candidates(const SessionSnapshot& s, const Catalog& catalog, int cap) {
    if (cap <= 0 || s.v_cand.size() <= static_cast<std::size_t>(cap)) return s.v_cand;
    std::vector<std::pair<int, Id>> scored;
    scored.reserve(s.v_cand.size());
    for (Id v : s.v_cand) {
        int score = 0;
        for (Id p : catalog.item_attributes[v]) {
            if (contains(s.p_acc, p)) ++score;
            if (contains(s.p_rej, p)) --score;
        }
        scored.emplace_back(-score, v);
    }
    std::sort(scored.begin(), scored.end());
    scored.resize(static_cast<std::size_t>(cap));
    std::vector<Id> out;
    out.reserve(scored.size());
    for (auto& [neg, v] : scored) out.push_back(v);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

int history_event_index(const HistoryEvent& e) {
    if (e.option == OptionKind::ask) {
        return e.feedback == Feedback::acc ? 0 : 1;
    }
    if (e.feedback == Feedback::rej) return 2;
    throw std::invalid_argument("history contains a successful recommendation");
}

Hypergraph build_hypergraph(const SessionSnapshot& s, const Catalog& catalog, int item_cap) {
    Hypergraph hg;

    std::vector<Id> attrs;
    std::merge(s.p_acc.begin(), s.p_acc.end(), s.p_rej.begin(), s.p_rej.end(),
               std::back_inserter(attrs));

    auto cand = capped_candidates(s, catalog, item_cap);
    std::vector<Id> items;
    std::merge(s.v_rej.begin(), s.v_rej.end(), cand.begin(), cand.end(),
               std::back_inserter(items));
    items.erase(std::unique(items.begin(), items.end()), items.end());

    hg.node_ids.push_back(catalog.user_node(s.user));
    for (Id p : attrs) hg.node_ids.push_back(catalog.attribute_node(p));
    for (Id v : items) hg.node_ids.push_back(catalog.item_node(v));

    const int n_nodes = static_cast<int>(hg.node_ids.size());
    const int n_edges = static_cast<int>(attrs.size());
    hg.edge_attributes = attrs;
    hg.incidence = Tensor(n_nodes, n_edges);
    hg.degrees.assign(static_cast<std::size_t>(n_edges), 0);

    for (int j = 0; j < n_edges; ++j) {
        const Id p = attrs[static_cast<std::size_t>(j)];
        const bool accepted = contains(s.p_acc, p);
        hg.edge_accepted.push_back(accepted ? 1 : 0);

        std::vector<int> item_rows;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (contains(catalog.item_attributes[items[i]], p)) {
                item_rows.push_back(static_cast<int>(1 + attrs.size() + i));
            }
        }
        hg.incidence.at(0, j) = accepted ? 1.0 : -1.0;
        const int attr_row = 1 + j;  // attrs are in edge order
        hg.incidence.at(attr_row, j) = 1.0;
        const double w = item_rows.empty() ? 0.0 : 1.0 / static_cast<double>(item_rows.size());
        for (int row : item_rows) hg.incidence.at(row, j) = w;
        hg.degrees[static_cast<std::size_t>(j)] = 2 + static_cast<int>(item_rows.size());
    }
    return hg;
}

void add_encoder_params(num::ParamSet& ps, const EncoderConfig& config, Rng& rng) {
    const int d = config.embed_dim;
    auto& event = ps.add("enc.event_emb", 3, d);
    num::init_fan_in(event, d, rng);
    num::add_gru(ps, "enc.gru", d, config.hidden, rng);
    auto& wn = ps.add("enc.w_n", d, d);
    num::init_fan_in(wn, d, rng);
    for (int l = 1; l <= config.layers; ++l) {
        num::add_mhsa(ps, "enc.mhsa" + std::to_string(l) + ".acc", d, rng);
        num::add_mhsa(ps, "enc.mhsa" + std::to_string(l) + ".rej", d, rng);
    }
}

num::Tensor encode_history(const std::vector<HistoryEvent>& history,
                           const num::BoundParams& params, const EncoderConfig& config) {
    Tensor h = Tensor::zeros(1, config.hidden);
    if (history.empty()) return h;
    std::vector<int> idx;
    idx.reserve(history.size());
    for (const auto& e : history) idx.push_back(history_event_index(e));
    Tensor events = num::gather_rows(params["enc.event_emb"], idx);
    auto gru = num::gru_weights(params, "enc.gru");
    for (int i = 0; i < events.rows; ++i) {
        h = num::gru_cell(h, num::slice_rows(events, i, 1), gru);
    }
    return h;
}

ChannelFeatures hyperedge_aggregate(const Hypergraph& hg, const num::Tensor& node_embeddings,
                                    const num::Tensor& w_n) {
    const int n_edges = static_cast<int>(hg.edge_attributes.size());
    if (node_embeddings.rows != hg.incidence.rows) {
        throw std::invalid_argument("hyperedge_aggregate: embedding rows mismatch");
    }
    // D^-1 A^T is constant; fold the degree scaling into the transpose.
    Tensor scaled_at(n_edges, hg.incidence.rows);
    for (int j = 0; j < n_edges; ++j) {
        const double inv = 1.0 / static_cast<double>(hg.degrees[static_cast<std::size_t>(j)]);
        for (int i = 0; i < hg.incidence.rows; ++i) {
            scaled_at.at(j, i) = hg.incidence.at(i, j) * inv;
        }
    }
    Tensor h0 = num::matmul(num::matmul(scaled_at, node_embeddings), w_n);

    std::vector<int> acc_rows, rej_rows;
    for (int j = 0; j < n_edges; ++j) {
        (hg.edge_accepted[static_cast<std::size_t>(j)] ? acc_rows : rej_rows).push_back(j);
    }
    ChannelFeatures out;
    out.acc = acc_rows.empty() ? Tensor(0, h0.cols) : num::gather_rows(h0, acc_rows);
    out.rej = rej_rows.empty() ? Tensor(0, h0.cols) : num::gather_rows(h0, rej_rows);
    return out;
}

ChannelFeatures hyperedge_interact(const ChannelFeatures& h, int layer,
                                   const num::BoundParams& params, const EncoderConfig& config) {
    auto pass = [&](const Tensor& x, const char* channel) {
        if (x.rows == 0) return x;
        auto w = num::mhsa_weights(params, "enc.mhsa" + std::to_string(layer) + "." + channel);
        Tensor y = num::multi_head_self_attention(x, w, config.heads);
        return config.residual ? num::add(y, x) : y;
    };
    return {pass(h.acc, "acc"), pass(h.rej, "rej")};
}

num::Tensor refine_nodes(const Hypergraph& hg, const ChannelFeatures& h) {
    const int n_edges = static_cast<int>(hg.edge_attributes.size());
    const int d = h.acc.rows > 0 ? h.acc.cols : h.rej.cols;
    if (n_edges == 0) {
        return Tensor::zeros(hg.incidence.rows, d > 0 ? d : 0);
    }
    // Merge the channels back into hyperedge order.
    std::vector<int> perm(static_cast<std::size_t>(n_edges));
    int acc_seen = 0, rej_seen = 0;
    for (int j = 0; j < n_edges; ++j) {
        if (hg.edge_accepted[static_cast<std::size_t>(j)]) {
            perm[static_cast<std::size_t>(j)] = acc_seen++;
        } else {
            perm[static_cast<std::size_t>(j)] = h.acc.rows + rej_seen++;
        }
    }
    Tensor stacked = h.acc.rows == 0 ? h.rej
                   : h.rej.rows == 0 ? h.acc
                                     : num::concat_rows(h.acc, h.rej);
    Tensor merged = num::gather_rows(stacked, perm);
    return num::relu(num::matmul(hg.incidence, merged));
}

std::vector<double> length_binary(std::size_t n) {
    if (n > 1023) n = 1023;
    std::vector<double> bits(10, 0.0);
    for (int b = 0; b < 10; ++b) {
        bits[static_cast<std::size_t>(b)] = static_cast<double>((n >> (9 - b)) & 1u);
    }
    return bits;
}

num::Tensor Encoded::reps_for(const std::vector<Id>& global_ids) const {
    // Rows from the refined graph where present, raw embedding rows
    // otherwise, stitched back into input order.
    std::vector<int> graph_rows, table_rows, order;
    order.reserve(global_ids.size());
    for (Id g : global_ids) {
        auto it = row_of.find(g);
        if (it != row_of.end()) {
            order.push_back(static_cast<int>(graph_rows.size()));
            graph_rows.push_back(it->second);
        } else {
            order.push_back(-1 - static_cast<int>(table_rows.size()));
            table_rows.push_back(static_cast<int>(g));
        }
    }
    Tensor from_graph = graph_rows.empty() ? Tensor(0, node_reps.cols)
                                           : num::gather_rows(node_reps, graph_rows);
    Tensor from_table = table_rows.empty() ? Tensor(0, entity_table.cols)
                                           : num::gather_rows(entity_table, table_rows);
    if (table_rows.empty()) {
        if (static_cast<std::size_t>(from_graph.rows) == global_ids.size()) return from_graph;
    }
    Tensor stacked = from_graph.rows == 0 ? from_table
                   : from_table.rows == 0 ? from_graph
                                          : num::concat_rows(from_graph, from_table);
    std::vector<int> perm;
    perm.reserve(order.size());
    for (int o : order) {
        perm.push_back(o >= 0 ? o : from_graph.rows + (-1 - o));
    }
    return num::gather_rows(stacked, perm);
}

Encoded encode_state(const SessionSnapshot& s, const Catalog& catalog,
                     const num::BoundParams& params, const EncoderConfig& config) {
    Encoded out;
    out.entity_table = params["embed.entity"];

    Hypergraph hg = build_hypergraph(s, catalog, config.item_cap);
    out.node_ids = hg.node_ids;
    for (std::size_t i = 0; i < hg.node_ids.size(); ++i) {
        out.row_of.emplace(hg.node_ids[i], static_cast<int>(i));
    }

    std::vector<int> rows;
    rows.reserve(hg.node_ids.size());
    for (Id g : hg.node_ids) rows.push_back(static_cast<int>(g));
    Tensor node_emb = num::gather_rows(out.entity_table, rows);

    Tensor s_h = encode_history(s.history, params, config);

    Tensor s_g;
    if (!config.hypergraph) {
        // Ablation: plain mean of the raw node embeddings.
        Tensor ones(1, node_emb.rows);
        const double inv = 1.0 / static_cast<double>(node_emb.rows);
        for (int i = 0; i < node_emb.rows; ++i) ones.at(0, i) = inv;
        s_g = num::matmul(ones, node_emb);
        out.node_reps = node_emb;
    } else {
        ChannelFeatures h = hyperedge_aggregate(hg, node_emb, params["enc.w_n"]);
        Tensor gamma_sum;
        for (int l = 1; l <= config.layers; ++l) {
            h = hyperedge_interact(h, l, params, config);
            Tensor gamma = refine_nodes(hg, h);
            gamma_sum = l == 1 ? gamma : num::add(gamma_sum, gamma);
        }
        s_g = num::slice_rows(gamma_sum, 0, 1);  // the user row
        out.node_reps = num::add(node_emb, gamma_sum);
    }

    auto bits_v = length_binary(s.v_cand.size());
    auto bits_p = length_binary(s.p_cand.size());
    bits_v.insert(bits_v.end(), bits_p.begin(), bits_p.end());
    Tensor s_len = Tensor::row(std::move(bits_v));

    out.state = num::concat_cols(num::concat_cols(s_h, s_g), s_len);
    return out;
}

}  // namespace dahcr
