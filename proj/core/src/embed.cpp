#include "dahcr/embed.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "dahcr/errors.hpp"

namespace dahcr {

namespace {

void normalize_row(double* row, int dim) {
    double norm = 0.0;
    for (int i = 0; i < dim; ++i) norm += row[i] * row[i];
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (int i = 0; i < dim; ++i) row[i] /= norm;
    }
}

EmbeddingTable init_table(Id num_entities, Id num_relations, int dim, Rng& rng) {
    EmbeddingTable table;
    table.entities = num::Tensor(static_cast<int>(num_entities), dim);
    table.relations = num::Tensor(static_cast<int>(std::max<Id>(num_relations, 1)), dim);
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    for (auto& v : *table.entities.data) v = rng.next_uniform(-bound, bound);
    for (auto& v : *table.relations.data) v = rng.next_uniform(-bound, bound);
    for (int i = 0; i < table.entities.rows; ++i) {
        normalize_row(table.entities.ptr() + static_cast<std::size_t>(i) * dim, dim);
    }
    for (int i = 0; i < table.relations.rows; ++i) {
        normalize_row(table.relations.ptr() + static_cast<std::size_t>(i) * dim, dim);
    }
    return table;
}

// Training distance: L1 sum of |x|, L2 sum of squares (conventional
// margin-loss form; the public score uses the true norm).
double train_distance(const double* h, const double* r, const double* t, int dim,
                      TransEConfig::Norm norm) {
    double d = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double x = h[i] + r[i] - t[i];
        d += norm == TransEConfig::Norm::L1 ? std::fabs(x) : x * x;
    }
    return d;
}

}  // namespace

std::vector<KgTriple> build_kg_triples(const Catalog& catalog, const DatasetSplit& split) {
    std::vector<KgTriple> triples;
    for (auto [u, v] : split.train) {
        triples.push_back({catalog.user_node(u), 0, catalog.item_node(v)});
    }
    for (Id v = 0; v < catalog.num_items; ++v) {
        for (Id p : catalog.item_attributes[v]) {
            triples.push_back({catalog.item_node(v), 1, catalog.attribute_node(p)});
        }
    }
    return triples;
}

double transe_score(const EmbeddingTable& table, const KgTriple& triple,
                    TransEConfig::Norm norm) {
    if (triple.head >= static_cast<Id>(table.entities.rows) ||
        triple.tail >= static_cast<Id>(table.entities.rows) ||
        triple.relation >= static_cast<Id>(table.relations.rows)) {
        throw ValidationError("transe_score: id out of range");
    }
    const int dim = table.entities.cols;
    const double* h = table.entities.ptr() + static_cast<std::size_t>(triple.head) * dim;
    const double* t = table.entities.ptr() + static_cast<std::size_t>(triple.tail) * dim;
    const double* r = table.relations.ptr() + static_cast<std::size_t>(triple.relation) * dim;
    double d = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double x = h[i] + r[i] - t[i];
        d += norm == TransEConfig::Norm::L1 ? std::fabs(x) : x * x;
    }
    return -(norm == TransEConfig::Norm::L1 ? d : std::sqrt(d));
}

EmbeddingTable transe_train(Id num_entities, Id num_relations,
                            const std::vector<KgTriple>& triples,
                            const TransEConfig& config, std::uint64_t seed) {
    if (config.margin <= 0.0) throw ValidationError("transe: margin must be positive");
    if (config.epochs < 0) throw ValidationError("transe: negative epoch count");
    if (triples.empty() && config.epochs > 0) {
        throw ValidationError("transe: no triples to train on");
    }
    Rng rng(Rng::mix(seed, 0x7ca25e));
    EmbeddingTable table = init_table(num_entities, num_relations, config.dim, rng);
    if (config.epochs == 0) return table;

    const int dim = config.dim;
    double* ent = table.entities.ptr();
    double* rel = table.relations.ptr();
    std::vector<std::size_t> order(triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t oi = 0; oi < order.size(); ++oi) {
            const KgTriple& pos = triples[order[oi]];
            for (int neg_i = 0; neg_i < config.negatives_per_positive; ++neg_i) {
                KgTriple neg = pos;
                if (rng.next_double() < 0.5) {
                    neg.head = static_cast<Id>(rng.next_index(num_entities));
                } else {
                    neg.tail = static_cast<Id>(rng.next_index(num_entities));
                }
                double* ph = ent + static_cast<std::size_t>(pos.head) * dim;
                double* pt = ent + static_cast<std::size_t>(pos.tail) * dim;
                double* nh = ent + static_cast<std::size_t>(neg.head) * dim;
                double* nt = ent + static_cast<std::size_t>(neg.tail) * dim;
                double* pr = rel + static_cast<std::size_t>(pos.relation) * dim;

                const double d_pos = train_distance(ph, pr, pt, dim, config.norm);
                const double d_neg = train_distance(nh, pr, nt, dim, config.norm);
                if (config.margin + d_pos - d_neg <= 0.0) continue;

                for (int i = 0; i < dim; ++i) {
                    const double xp = ph[i] + pr[i] - pt[i];
                    const double xn = nh[i] + pr[i] - nt[i];
                    double gp, gn;
                    if (config.norm == TransEConfig::Norm::L1) {
                        gp = xp > 0.0 ? 1.0 : -1.0;
                        gn = xn > 0.0 ? 1.0 : -1.0;
                    } else {
                        gp = 2.0 * xp;
                        gn = 2.0 * xn;
                    }
                    ph[i] -= config.lr * gp;
                    pt[i] += config.lr * gp;
                    pr[i] -= config.lr * (gp - gn);
                    nh[i] += config.lr * gn;
                    nt[i] -= config.lr * gn;
                }
                normalize_row(ph, dim);
                normalize_row(pt, dim);
                normalize_row(nh, dim);
                normalize_row(nt, dim);
            }
        }
    }
    return table;
}

EmbeddingTable random_table(Id num_entities, Id num_relations, int dim, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x7ca25e));
    return init_table(num_entities, num_relations, dim, rng);
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "DAHCR-EMB v1\n";
    out << table.entities.rows << " " << table.relations.rows << " " << table.entities.cols << "\n";
    auto write_f32 = [&](const num::Tensor& t) {
        for (double v : *t.data) {
            float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    };
    write_f32(table.entities);
    write_f32(table.relations);
    if (!out) throw IoError("write failed: " + path);
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::string header;
    std::getline(in, header);
    if (header != "DAHCR-EMB v1") throw ValidationError(path + ": not an embedding file");
    std::string meta;
    std::getline(in, meta);
    std::istringstream ms(meta);
    int ents = 0, rels = 0, dim = 0;
    if (!(ms >> ents >> rels >> dim) || ents <= 0 || rels <= 0 || dim <= 0) {
        throw ValidationError(path + ": malformed meta line");
    }
    EmbeddingTable table;
    table.entities = num::Tensor(ents, dim);
    table.relations = num::Tensor(rels, dim);
    auto read_f32 = [&](num::Tensor& t) {
        for (auto& v : *t.data) {
            float f = 0;
            in.read(reinterpret_cast<char*>(&f), sizeof(float));
            v = static_cast<double>(f);
        }
    };
    read_f32(table.entities);
    read_f32(table.relations);
    if (!in) throw ValidationError(path + ": truncated embedding file");
    return table;
}

}  // namespace dahcr
