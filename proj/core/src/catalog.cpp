#include "dahcr/catalog.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dahcr/errors.hpp"
#include "json.hpp"

namespace dahcr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_line(const std::string& line, const std::string& file, std::size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        throw ValidationError(file + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
    return j;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing file: " + path.string());
    return in;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

// Remaps arbitrary ids in file order of first appearance to 0..n-1.
class IdMapper {
public:
    Id map(std::uint64_t raw) {
        auto [it, inserted] = to_dense_.emplace(raw, static_cast<Id>(to_dense_.size()));
        if (inserted) raw_in_order_.push_back(raw);
        return it->second;
    }
    Id lookup(std::uint64_t raw, const std::string& what) const {
        auto it = to_dense_.find(raw);
        if (it == to_dense_.end()) {
            throw ValidationError("dangling " + what + " id " + std::to_string(raw));
        }
        return it->second;
    }
    bool identity() const {
        for (std::size_t i = 0; i < raw_in_order_.size(); ++i) {
            if (raw_in_order_[i] != i) return false;
        }
        return true;
    }
    Id size() const { return static_cast<Id>(to_dense_.size()); }
    const std::vector<std::uint64_t>& raw_ids() const { return raw_in_order_; }

private:
    std::map<std::uint64_t, Id> to_dense_;
    std::vector<std::uint64_t> raw_in_order_;
};

void validate(const Catalog& c) {
    if (c.item_attributes.size() != c.num_items) {
        throw ValidationError("item count mismatch");
    }
    for (Id v = 0; v < c.num_items; ++v) {
        const auto& attrs = c.item_attributes[v];
        if (attrs.empty()) {
            throw ValidationError("item " + std::to_string(v) + " has an empty attribute set");
        }
        for (Id p : attrs) {
            if (p >= c.num_attributes) {
                throw ValidationError("item " + std::to_string(v) +
                                      " references dangling attribute id " + std::to_string(p));
            }
        }
        if (!std::is_sorted(attrs.begin(), attrs.end()) ||
            std::adjacent_find(attrs.begin(), attrs.end()) != attrs.end()) {
            throw ValidationError("item " + std::to_string(v) + " attribute set not a set");
        }
    }
    for (auto [u, v] : c.interactions) {
        if (u >= c.num_users) throw ValidationError("interaction references dangling user id");
        if (v >= c.num_items) throw ValidationError("interaction references dangling item id");
    }
}

}  // namespace

Catalog load_catalog(const std::string& dir) {
    const fs::path root(dir);

    json meta;
    {
        auto in = open_input(root / "meta.json");
        try {
            in >> meta;
        } catch (const json::exception& e) {
            throw ValidationError("meta.json: " + std::string(e.what()));
        }
    }
    Catalog c;
    c.num_users = meta.at("users").get<Id>();
    c.num_items = meta.at("items").get<Id>();
    c.num_attributes = meta.at("attributes").get<Id>();
    for (const auto& name : meta.at("relations")) {
        c.relation_names.push_back(name.get<std::string>());
    }

    // Items carry the only declaration file, so item ids may be sparse
    // and are remapped by order of appearance. Users and attributes are
    // declared by count alone: references must already be dense.
    IdMapper item_map;
    c.item_attributes.reserve(c.num_items);
    {
        auto in = open_input(root / "items.jsonl");
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            json j = parse_line(line, "items.jsonl", n);
            if (!j.contains("item") || !j.contains("attributes")) {
                throw ValidationError("items.jsonl:" + std::to_string(n) + ": missing field");
            }
            item_map.map(j["item"].get<std::uint64_t>());
            std::vector<Id> attrs;
            for (const auto& a : j["attributes"]) {
                auto raw = a.get<std::uint64_t>();
                if (raw >= c.num_attributes) {
                    throw ValidationError("items.jsonl:" + std::to_string(n) +
                                          ": dangling attribute id " + std::to_string(raw));
                }
                attrs.push_back(static_cast<Id>(raw));
            }
            std::sort(attrs.begin(), attrs.end());
            attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
            c.item_attributes.push_back(std::move(attrs));
        }
    }
    if (item_map.size() != c.num_items) {
        throw ValidationError("items.jsonl declares " + std::to_string(item_map.size()) +
                              " items, meta.json says " + std::to_string(c.num_items));
    }

    {
        auto in = open_input(root / "interactions.jsonl");
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            json j = parse_line(line, "interactions.jsonl", n);
            if (!j.contains("user") || !j.contains("item")) {
                throw ValidationError("interactions.jsonl:" + std::to_string(n) + ": missing field");
            }
            auto raw_user = j["user"].get<std::uint64_t>();
            if (raw_user >= c.num_users) {
                throw ValidationError("interactions.jsonl:" + std::to_string(n) +
                                      ": dangling user id " + std::to_string(raw_user));
            }
            Id v = item_map.lookup(j["item"].get<std::uint64_t>(), "item");
            c.interactions.emplace_back(static_cast<Id>(raw_user), v);
        }
    }

    // kg.jsonl is validated for id sanity; triples themselves are
    // re-derived from the catalog when needed.
    {
        auto in = open_input(root / "kg.jsonl");
        std::string line;
        std::size_t n = 0;
        const Id total = c.num_nodes();
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            json j = parse_line(line, "kg.jsonl", n);
            Id head = j.at("head").get<Id>();
            Id tail = j.at("tail").get<Id>();
            Id rel = j.at("relation").get<Id>();
            if (head >= total || tail >= total) {
                throw ValidationError("kg.jsonl:" + std::to_string(n) + ": dangling node id");
            }
            if (rel >= c.relation_names.size()) {
                throw ValidationError("kg.jsonl:" + std::to_string(n) + ": dangling relation id");
            }
        }
    }

    validate(c);

    if (!item_map.identity()) {
        json m;
        m["items"] = item_map.raw_ids();
        auto out = open_output(root / "id_map.json");
        out << m.dump() << "\n";
    }
    return c;
}

void save_catalog(const Catalog& catalog, const std::string& dir) {
    validate(catalog);
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);

    {
        auto out = open_output(root / "meta.json");
        json meta;
        meta["users"] = catalog.num_users;
        meta["items"] = catalog.num_items;
        meta["attributes"] = catalog.num_attributes;
        meta["relations"] = catalog.relation_names;
        out << meta.dump() << "\n";
        if (!out) throw IoError("write failed: meta.json");
    }
    {
        auto out = open_output(root / "items.jsonl");
        for (Id v = 0; v < catalog.num_items; ++v) {
            json j;
            j["item"] = v;
            j["attributes"] = catalog.item_attributes[v];
            out << j.dump() << "\n";
        }
        if (!out) throw IoError("write failed: items.jsonl");
    }
    {
        auto out = open_output(root / "interactions.jsonl");
        for (auto [u, v] : catalog.interactions) {
            json j;
            j["user"] = u;
            j["item"] = v;
            out << j.dump() << "\n";
        }
        if (!out) throw IoError("write failed: interactions.jsonl");
    }
    {
        auto out = open_output(root / "kg.jsonl");
        for (const auto& t : full_kg(catalog)) {
            json j;
            j["head"] = t.head;
            j["relation"] = t.relation;
            j["tail"] = t.tail;
            out << j.dump() << "\n";
        }
        if (!out) throw IoError("write failed: kg.jsonl");
    }
}

bool has_split(const std::string& dir) {
    return fs::exists(fs::path(dir) / "split.json");
}

DatasetSplit load_split(const std::string& dir, const Catalog& catalog) {
    auto in = open_input(fs::path(dir) / "split.json");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("split.json: " + std::string(e.what()));
    }
    std::set<std::pair<Id, Id>> known(catalog.interactions.begin(), catalog.interactions.end());
    auto read_part = [&](const char* key) {
        std::vector<std::pair<Id, Id>> part;
        for (const auto& entry : j.at(key)) {
            Id u = entry.at(0).get<Id>();
            Id v = entry.at(1).get<Id>();
            if (!known.count({u, v})) {
                throw ValidationError("split.json: pair (" + std::to_string(u) + "," +
                                      std::to_string(v) + ") not in interactions");
            }
            part.emplace_back(u, v);
        }
        return part;
    };
    DatasetSplit s;
    s.train = read_part("train");
    s.valid = read_part("valid");
    s.test = read_part("test");

    std::set<std::pair<Id, Id>> seen;
    for (const auto* part : {&s.train, &s.valid, &s.test}) {
        for (auto& p : *part) {
            if (!seen.insert(p).second) {
                throw ValidationError("split.json: pair appears in more than one split");
            }
        }
    }
    return s;
}

void save_split(const DatasetSplit& split, const std::string& dir) {
    auto out = open_output(fs::path(dir) / "split.json");
    json j;
    auto encode = [](const std::vector<std::pair<Id, Id>>& part) {
        json arr = json::array();
        for (auto [u, v] : part) arr.push_back({u, v});
        return arr;
    };
    j["train"] = encode(split.train);
    j["valid"] = encode(split.valid);
    j["test"] = encode(split.test);
    out << j.dump() << "\n";
    if (!out) throw IoError("write failed: split.json");
}

std::vector<KgTriple> full_kg(const Catalog& catalog) {
    std::vector<KgTriple> triples;
    for (auto [u, v] : catalog.interactions) {
        triples.push_back({catalog.user_node(u), 0, catalog.item_node(v)});
    }
    for (Id v = 0; v < catalog.num_items; ++v) {
        for (Id p : catalog.item_attributes[v]) {
            triples.push_back({catalog.item_node(v), 1, catalog.attribute_node(p)});
        }
    }
    return triples;
}

SynthResult generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
    if (config.users == 0 || config.items == 0 || config.attributes == 0) {
        throw ValidationError("synthetic config: counts must be positive");
    }
    if (config.attrs_per_item.first == 0 || config.attrs_per_item.first > config.attrs_per_item.second) {
        throw ValidationError("synthetic config: bad attrs_per_item range");
    }
    if (config.attrs_per_item.second > config.attributes) {
        throw ValidationError("synthetic config: attrs_per_item exceeds attribute count");
    }
    if (config.interactions_per_user.first > config.interactions_per_user.second) {
        throw ValidationError("synthetic config: bad interactions_per_user range");
    }

    Rng rng(Rng::mix(seed, 0x5ca7a10c));
    Catalog c;
    c.num_users = config.users;
    c.num_items = config.items;
    c.num_attributes = config.attributes;
    c.relation_names = {"interact", "has_attribute"};

    const Id broad = std::min({config.broad_attributes, config.attributes,
                               config.attrs_per_item.second});
    const Id narrow = config.attributes - broad;
    Id filler = static_cast<Id>(static_cast<double>(config.items) * config.filler_fraction);
    if (filler >= config.items) filler = config.items - 1;
    if (narrow == 0) filler = 0;  // no narrow pool: all items are plain

    // Filler items: the broad attributes only (clamped to the size range).
    // Taste items: broad attributes plus narrow ones drawn uniformly.
    c.item_attributes.resize(c.num_items);
    for (Id v = 0; v < c.num_items; ++v) {
        Id size = static_cast<Id>(rng.next_range(config.attrs_per_item.first,
                                                 config.attrs_per_item.second));
        std::vector<Id> attrs;
        if (v < filler || narrow == 0) {
            Id take = std::min<Id>(std::max<Id>(size, 1), broad > 0 ? broad : size);
            if (broad == 0) take = std::min<Id>(size, config.attributes);
            for (Id p = 0; p < take; ++p) attrs.push_back(p);
            if (attrs.empty()) attrs.push_back(0);
        } else {
            for (Id p = 0; p < broad; ++p) attrs.push_back(p);
            Id want = size > broad ? size - broad : 1;
            want = std::min<Id>(want, narrow);
            auto picks = rng.sample_without_replacement(narrow, want);
            for (auto p : picks) attrs.push_back(broad + p);
        }
        std::sort(attrs.begin(), attrs.end());
        c.item_attributes[v] = std::move(attrs);
    }

    // Per narrow attribute: taste items carrying it (for eligibility).
    std::vector<std::vector<Id>> by_narrow(narrow);
    for (Id v = filler; v < c.num_items; ++v) {
        for (Id p : c.item_attributes[v]) {
            if (p >= broad) by_narrow[p - broad].push_back(v);
        }
    }

    // Users: a taste subset of narrow attributes; interactions sampled
    // from items sharing at least one taste attribute.
    for (Id u = 0; u < c.num_users; ++u) {
        std::vector<Id> eligible;
        if (narrow > 0) {
            Id tsz = static_cast<Id>(rng.next_range(config.taste_size.first,
                                                    config.taste_size.second));
            tsz = std::min<Id>(std::max<Id>(tsz, 1), narrow);
            auto taste = rng.sample_without_replacement(narrow, tsz);
            std::set<Id> pool;
            for (auto p : taste) pool.insert(by_narrow[p].begin(), by_narrow[p].end());
            eligible.assign(pool.begin(), pool.end());
        }
        if (eligible.empty()) {
            for (Id v = 0; v < c.num_items; ++v) eligible.push_back(v);
        }
        Id want = static_cast<Id>(rng.next_range(config.interactions_per_user.first,
                                                 config.interactions_per_user.second));
        want = std::min<Id>(want, static_cast<Id>(eligible.size()));
        if (want == 0) want = 1;
        auto picks = rng.sample_without_replacement(static_cast<Id>(eligible.size()), want);
        for (auto i : picks) c.interactions.emplace_back(u, eligible[i]);
    }

    validate(c);

    // 70/10/20 split over a seeded shuffle of the interactions.
    std::vector<std::size_t> order(c.interactions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    DatasetSplit split;
    const std::size_t n = order.size();
    const std::size_t n_train = static_cast<std::size_t>(0.7 * static_cast<double>(n));
    const std::size_t n_valid = static_cast<std::size_t>(0.1 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        auto pair = c.interactions[order[i]];
        if (i < n_train) {
            split.train.push_back(pair);
        } else if (i < n_train + n_valid) {
            split.valid.push_back(pair);
        } else {
            split.test.push_back(pair);
        }
    }
    return {std::move(c), std::move(split)};
}

std::vector<Id> items_with_all_attributes(const Catalog& catalog,
                                          const std::vector<Id>& attrs) {
    for (Id p : attrs) {
        if (p >= catalog.num_attributes) {
            throw ValidationError("invalid attribute id " + std::to_string(p));
        }
    }
    std::vector<Id> out;
    for (Id v = 0; v < catalog.num_items; ++v) {
        const auto& pv = catalog.item_attributes[v];
        bool all = true;
        for (Id p : attrs) {
            if (!std::binary_search(pv.begin(), pv.end(), p)) {
                all = false;
                break;
            }
        }
        if (all) out.push_back(v);
    }
    return out;
}

std::vector<Id> attributes_of_items(const Catalog& catalog,
                                    const std::vector<Id>& items) {
    std::vector<char> seen(catalog.num_attributes, 0);
    for (Id v : items) {
        if (v >= catalog.num_items) {
            throw ValidationError("invalid item id " + std::to_string(v));
        }
        for (Id p : catalog.item_attributes[v]) seen[p] = 1;
    }
    std::vector<Id> out;
    for (Id p = 0; p < catalog.num_attributes; ++p) {
        if (seen[p]) out.push_back(p);
    }
    return out;
}

}  // namespace dahcr
