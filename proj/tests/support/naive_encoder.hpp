#pragma once

// Straight-from-the-formulas dense reference for the hypergraph encoder:
// plain loops over dense matrices, no tensor ops, no channel-split
// shortcuts. Deliberately independent of the library implementation so
// the two can be compared on random instances.

#include <cmath>
#include <vector>

#include "dahcr/catalog.hpp"
#include "dahcr/encoder.hpp"
#include "dahcr/nn.hpp"

namespace dahcr::test {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) {
    return Mat(r, std::vector<double>(c, 0.0));
}

inline Mat matmul_naive(const Mat& a, const Mat& b) {
    Mat out = zeros(a.size(), b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b[0].size(); ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < b.size(); ++k) acc += a[i][k] * b[k][j];
            out[i][j] = acc;
        }
    }
    return out;
}

inline Mat tensor_to_mat(const num::Tensor& t) {
    Mat m = zeros(static_cast<std::size_t>(t.rows), static_cast<std::size_t>(t.cols));
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t.at(i, j);
    }
    return m;
}

// Dense incidence straight from the case analysis of the weighting rule.
inline Mat naive_incidence(const SessionSnapshot& s, const Catalog& catalog,
                           const std::vector<Id>& nodes, const std::vector<Id>& edge_attrs) {
    Mat a = zeros(nodes.size(), edge_attrs.size());
    for (std::size_t j = 0; j < edge_attrs.size(); ++j) {
        const Id p = edge_attrs[j];
        const bool accepted = std::binary_search(s.p_acc.begin(), s.p_acc.end(), p);
        // V_h: item nodes present in the graph carrying p.
        std::vector<std::size_t> vh;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Id g = nodes[i];
            if (g >= catalog.num_users && g < catalog.num_users + catalog.num_items) {
                const Id v = g - catalog.num_users;
                if (std::binary_search(catalog.item_attributes[v].begin(),
                                       catalog.item_attributes[v].end(), p)) {
                    vh.push_back(i);
                }
            }
        }
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Id g = nodes[i];
            if (g < catalog.num_users) {
                a[i][j] = accepted ? 1.0 : -1.0;
            } else if (g >= catalog.num_users + catalog.num_items) {
                if (g - catalog.num_users - catalog.num_items == p) a[i][j] = 1.0;
            }
        }
        for (std::size_t i : vh) a[i][j] = 1.0 / static_cast<double>(vh.size());
    }
    return a;
}

// Single-head scaled dot-product attention with output projection,
// recomputed longhand.
inline Mat naive_mhsa(const Mat& x, const num::ParamSet& ps, const std::string& prefix,
                      int heads) {
    const std::size_t n = x.size();
    const std::size_t d = x[0].size();
    const std::size_t dh = d / static_cast<std::size_t>(heads);
    auto proj = [&](const char* part) {
        Mat w = tensor_to_mat(ps.at(prefix + ".w" + part));
        Mat b = tensor_to_mat(ps.at(prefix + ".b" + part));
        Mat out = matmul_naive(x, w);
        for (auto& row : out) {
            for (std::size_t j = 0; j < d; ++j) row[j] += b[0][j];
        }
        return out;
    };
    Mat q = proj("q"), k = proj("k"), v = proj("v");
    Mat merged = zeros(n, d);
    for (int h = 0; h < heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> scores(n, 0.0);
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0;
                for (std::size_t c = 0; c < dh; ++c) acc += q[i][off + c] * k[j][off + c];
                scores[j] = acc / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, scores[j]);
            }
            double z = 0;
            for (auto& sc : scores) {
                sc = std::exp(sc - mx);
                z += sc;
            }
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t c = 0; c < dh; ++c) {
                    merged[i][off + c] += scores[j] / z * v[j][off + c];
                }
            }
        }
    }
    Mat wo = tensor_to_mat(ps.at(prefix + ".wo"));
    Mat bo = tensor_to_mat(ps.at(prefix + ".bo"));
    Mat out = matmul_naive(merged, wo);
    for (auto& row : out) {
        for (std::size_t j = 0; j < d; ++j) row[j] += bo[0][j];
    }
    return out;
}

struct NaiveEncodeResult {
    std::vector<double> s_g;
    Mat node_reps;  // E + sum of refinements
};

// The whole hyperedge pipeline on dense matrices: aggregate, per-channel
// attention per layer, refine, accumulate the user row.
inline NaiveEncodeResult naive_hypergraph_pipeline(const SessionSnapshot& s,
                                                   const Catalog& catalog,
                                                   const num::ParamSet& ps,
                                                   const EncoderConfig& config) {
    // Canonical ordering: user, attributes ascending, items ascending.
    std::vector<Id> attrs;
    std::merge(s.p_acc.begin(), s.p_acc.end(), s.p_rej.begin(), s.p_rej.end(),
               std::back_inserter(attrs));
    std::vector<Id> items;
    std::merge(s.v_rej.begin(), s.v_rej.end(), s.v_cand.begin(), s.v_cand.end(),
               std::back_inserter(items));
    items.erase(std::unique(items.begin(), items.end()), items.end());
    std::vector<Id> nodes;
    nodes.push_back(catalog.user_node(s.user));
    for (Id p : attrs) nodes.push_back(catalog.attribute_node(p));
    for (Id v : items) nodes.push_back(catalog.item_node(v));

    Mat a = naive_incidence(s, catalog, nodes, attrs);
    const std::size_t n_nodes = nodes.size();
    const std::size_t n_edges = attrs.size();
    const std::size_t d = static_cast<std::size_t>(config.embed_dim);

    Mat entity = tensor_to_mat(ps.at("embed.entity"));
    Mat e = zeros(n_nodes, d);
    for (std::size_t i = 0; i < n_nodes; ++i) e[i] = entity[nodes[i]];

    // H0 = D^-1 A^T E W_n
    Mat at = zeros(n_edges, n_nodes);
    std::vector<double> degree(n_edges, 0.0);
    for (std::size_t j = 0; j < n_edges; ++j) {
        for (std::size_t i = 0; i < n_nodes; ++i) {
            at[j][i] = a[i][j];
            if (a[i][j] != 0.0) degree[j] += 1.0;
        }
    }
    Mat h = matmul_naive(matmul_naive(at, e), tensor_to_mat(ps.at("enc.w_n")));
    for (std::size_t j = 0; j < n_edges; ++j) {
        for (std::size_t c = 0; c < d; ++c) h[j][c] /= degree[j];
    }

    NaiveEncodeResult out;
    out.s_g.assign(d, 0.0);
    out.node_reps = e;

    for (int l = 1; l <= config.layers; ++l) {
        // Channel attention with per-channel parameters, then merge back.
        std::vector<std::size_t> acc_rows, rej_rows;
        for (std::size_t j = 0; j < n_edges; ++j) {
            if (std::binary_search(s.p_acc.begin(), s.p_acc.end(), attrs[j])) {
                acc_rows.push_back(j);
            } else {
                rej_rows.push_back(j);
            }
        }
        Mat next = zeros(n_edges, d);
        for (int channel = 0; channel < 2; ++channel) {
            const auto& rows = channel == 0 ? acc_rows : rej_rows;
            if (rows.empty()) continue;
            Mat x = zeros(rows.size(), d);
            for (std::size_t i = 0; i < rows.size(); ++i) x[i] = h[rows[i]];
            Mat y = naive_mhsa(x, ps,
                               "enc.mhsa" + std::to_string(l) + (channel == 0 ? ".acc" : ".rej"),
                               config.heads);
            if (config.residual) {
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    for (std::size_t c = 0; c < d; ++c) y[i][c] += x[i][c];
                }
            }
            for (std::size_t i = 0; i < rows.size(); ++i) next[rows[i]] = y[i];
        }
        h = next;

        // Gamma_l = relu(A * H^l)
        Mat gamma = matmul_naive(a, h);
        for (auto& row : gamma) {
            for (auto& vv : row) vv = vv > 0 ? vv : 0.0;
        }
        for (std::size_t c = 0; c < d; ++c) out.s_g[c] += gamma[0][c];
        for (std::size_t i = 0; i < n_nodes; ++i) {
            for (std::size_t c = 0; c < d; ++c) out.node_reps[i][c] += gamma[i][c];
        }
    }
    return out;
}

}  // namespace dahcr::test
