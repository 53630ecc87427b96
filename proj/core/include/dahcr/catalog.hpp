#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dahcr/rng.hpp"

namespace dahcr {

using Id = std::uint32_t;

// Static recommendation universe. Ids are dense: users 0..U-1, items
// 0..M-1, attributes 0..P-1. Global node ids place users first, then
// items offset by U, then attributes offset by U+M, so one embedding
// table covers every graph node.
struct Catalog {
    Id num_users = 0;
    Id num_items = 0;
    Id num_attributes = 0;
    std::vector<std::vector<Id>> item_attributes;   // per item, sorted ascending
    std::vector<std::pair<Id, Id>> interactions;    // (user, item)
    std::vector<std::string> relation_names;

    Id num_nodes() const { return num_users + num_items + num_attributes; }
    Id user_node(Id u) const { return u; }
    Id item_node(Id v) const { return num_users + v; }
    Id attribute_node(Id p) const { return num_users + num_items + p; }

    bool operator==(const Catalog&) const = default;
};

struct KgTriple {
    Id head = 0;      // global node id
    Id relation = 0;
    Id tail = 0;      // global node id

    bool operator==(const KgTriple&) const = default;
};

// Episode seeds: (user, target item) pairs drawn from interactions.
struct DatasetSplit {
    std::vector<std::pair<Id, Id>> train;
    std::vector<std::pair<Id, Id>> valid;
    std::vector<std::pair<Id, Id>> test;

    bool operator==(const DatasetSplit&) const = default;
};

struct SynthConfig {
    Id users = 50;
    Id items = 200;
    Id attributes = 20;
    std::pair<Id, Id> attrs_per_item{2, 5};
    std::pair<Id, Id> interactions_per_user{20, 24};

    // Structural knobs. A fraction of the catalog is generic filler:
    // items carrying only the broad attributes shared by everything.
    // The rest carry narrow attributes that user tastes are built from,
    // which keeps attribute questions informative while brute-force
    // recommending has to wade through the filler.
    Id broad_attributes = 2;
    double filler_fraction = 0.6;
    std::pair<Id, Id> taste_size{3, 4};
};

struct SynthResult {
    Catalog catalog;
    DatasetSplit split;
};

// Dataset directory I/O. Files: items.jsonl, interactions.jsonl,
// kg.jsonl, meta.json, optional split.json. Ids found in the files are
// remapped to dense ranges; a non-identity remap is persisted as
// id_map.json next to the inputs.
Catalog load_catalog(const std::string& dir);
void save_catalog(const Catalog& catalog, const std::string& dir);

// Split handling is separate so bare catalogs stay loadable.
bool has_split(const std::string& dir);
DatasetSplit load_split(const std::string& dir, const Catalog& catalog);
void save_split(const DatasetSplit& split, const std::string& dir);

// Full-graph triples as serialized in kg.jsonl (interact + has_attribute
// over all interactions). Training-time graphs are built from the train
// split only; see embed.
std::vector<KgTriple> full_kg(const Catalog& catalog);

SynthResult generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// V restricted to the items carrying every attribute in attrs (empty
// attrs means all items).
std::vector<Id> items_with_all_attributes(const Catalog& catalog,
                                          const std::vector<Id>& attrs);

// Union of attribute sets over the given items.
std::vector<Id> attributes_of_items(const Catalog& catalog,
                                    const std::vector<Id>& items);

}  // namespace dahcr
