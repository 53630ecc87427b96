#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dahcr/catalog.hpp"
#include "dahcr/tensor.hpp"

namespace dahcr {

// Pretrained node embeddings. Entity rows cover the global node id
// space (users, items, attributes); relation rows exist only for
// pretraining and are not consumed downstream.
struct EmbeddingTable {
    num::Tensor entities;   // (U+M+P) x dim
    num::Tensor relations;  // R x dim
};

struct TransEConfig {
    double margin = 1.0;
    int epochs = 100;
    int batch_size = 512;
    double lr = 1e-2;
    int negatives_per_positive = 1;
    enum class Norm { L1, L2 } norm = Norm::L2;
    int dim = 64;
};

// Training-set graph: one `interact` triple per train interaction, one
// `has_attribute` triple per item-attribute pair. Valid/test pairs
// never appear.
std::vector<KgTriple> build_kg_triples(const Catalog& catalog, const DatasetSplit& split);

// -(norm of e_h + e_r - e_t); higher is more plausible.
double transe_score(const EmbeddingTable& table, const KgTriple& triple,
                    TransEConfig::Norm norm = TransEConfig::Norm::L2);

// Margin-ranking SGD with uniform corruption of head or tail. Entity
// rows are renormalized to unit L2 norm after every update; epochs == 0
// returns the seeded initialization.
EmbeddingTable transe_train(Id num_entities, Id num_relations,
                            const std::vector<KgTriple>& triples,
                            const TransEConfig& config, std::uint64_t seed);

// Fallback when no graph is available.
EmbeddingTable random_table(Id num_entities, Id num_relations, int dim, std::uint64_t seed);

// `DAHCR-EMB v1` file: header, meta line, raw little-endian f32 rows
// (entities then relations).
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace dahcr
