#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "dahcr/catalog.hpp"
#include "dahcr/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace dahcr;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

void write_minimal_dataset(const fs::path& dir) {
    write_file(dir / "meta.json",
               R"({"users":1,"items":1,"attributes":1,"relations":["interact","has_attribute"]})");
    write_file(dir / "items.jsonl", R"({"item":0,"attributes":[0]})"
                                    "\n");
    write_file(dir / "interactions.jsonl", R"({"user":0,"item":0})"
                                           "\n");
    write_file(dir / "kg.jsonl", R"({"head":0,"relation":0,"tail":1})"
                                 "\n");
}

}  // namespace

TEST_CASE("load_catalog on a minimal well-formed directory") {
    test::TempDir dir("cat_min");
    write_minimal_dataset(dir.path());
    Catalog c = load_catalog(dir.str());
    CHECK(c.num_users == 1);
    CHECK(c.num_items == 1);
    CHECK(c.num_attributes == 1);
    CHECK(c.item_attributes[0] == std::vector<Id>{0});
    CHECK(c.interactions.size() == 1);
}

TEST_CASE("load_catalog rejects dangling attribute references") {
    test::TempDir dir("cat_dangling");
    write_minimal_dataset(dir.path());
    write_file(dir.path() / "items.jsonl", R"({"item":0,"attributes":[99]})"
                                           "\n");
    CHECK_THROWS_AS(load_catalog(dir.str()), ValidationError);
}

TEST_CASE("load_catalog reports the offending line for malformed input") {
    test::TempDir dir("cat_badline");
    write_minimal_dataset(dir.path());
    write_file(dir.path() / "interactions.jsonl", "{\"user\":0,\"item\":0}\nnot json\n");
    try {
        load_catalog(dir.str());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("interactions.jsonl") != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
    }
}

TEST_CASE("load_catalog rejects items with empty attribute sets") {
    test::TempDir dir("cat_empty_attrs");
    write_minimal_dataset(dir.path());
    write_file(dir.path() / "items.jsonl", R"({"item":0,"attributes":[]})"
                                           "\n");
    CHECK_THROWS_AS(load_catalog(dir.str()), ValidationError);
}

TEST_CASE("load_catalog fails on a missing file") {
    test::TempDir dir("cat_missing");
    write_minimal_dataset(dir.path());
    fs::remove(dir.path() / "items.jsonl");
    CHECK_THROWS_AS(load_catalog(dir.str()), ValidationError);
}

TEST_CASE("save then load is the identity") {
    test::TempDir dir("cat_roundtrip");
    Catalog c = test::tiny_catalog();
    save_catalog(c, dir.str());
    Catalog back = load_catalog(dir.str());
    CHECK(back == c);
}

TEST_CASE("save/load round trip on random synthetic catalogs") {
    for (std::uint64_t seed : {3u, 17u, 99u}) {
        SynthConfig cfg;
        cfg.users = 8;
        cfg.items = 30;
        cfg.attributes = 10;
        cfg.interactions_per_user = {3, 6};
        auto gen = generate_synthetic(cfg, seed);
        test::TempDir dir("cat_prop_" + std::to_string(seed));
        save_catalog(gen.catalog, dir.str());
        save_split(gen.split, dir.str());
        CHECK(load_catalog(dir.str()) == gen.catalog);
        CHECK(load_split(dir.str(), gen.catalog) == gen.split);
    }
}

TEST_CASE("sparse item ids are remapped densely and the mapping is persisted") {
    test::TempDir dir("cat_remap");
    write_file(dir.path() / "meta.json",
               R"({"users":1,"items":2,"attributes":2,"relations":["interact","has_attribute"]})");
    write_file(dir.path() / "items.jsonl",
               "{\"item\":10,\"attributes\":[0]}\n{\"item\":20,\"attributes\":[0,1]}\n");
    write_file(dir.path() / "interactions.jsonl", R"({"user":0,"item":20})"
                                                  "\n");
    write_file(dir.path() / "kg.jsonl", "");
    Catalog c = load_catalog(dir.str());
    CHECK(c.num_items == 2);
    CHECK(c.item_attributes[0] == std::vector<Id>{0});
    CHECK(c.item_attributes[1] == std::vector<Id>{0, 1});
    CHECK(c.interactions[0] == std::pair<Id, Id>{0, 1});
    CHECK(fs::exists(dir.path() / "id_map.json"));
}

TEST_CASE("save_catalog to an unwritable directory reports an I/O error") {
    Catalog c = test::tiny_catalog();
    CHECK_THROWS_AS(save_catalog(c, "/proc/definitely/not/writable"), IoError);
}

TEST_CASE("synthetic generation is a pure function of config and seed") {
    SynthConfig cfg;
    cfg.users = 50;
    cfg.items = 200;
    cfg.attributes = 20;
    cfg.interactions_per_user = {5, 15};
    auto a = generate_synthetic(cfg, 1);
    auto b = generate_synthetic(cfg, 1);
    CHECK(a.catalog == b.catalog);
    CHECK(a.split == b.split);
    auto c = generate_synthetic(cfg, 2);
    CHECK(a.catalog != c.catalog);
}

TEST_CASE("synthetic determinism extends to the saved bytes") {
    SynthConfig cfg;
    cfg.users = 10;
    cfg.items = 40;
    cfg.attributes = 12;
    auto gen1 = generate_synthetic(cfg, 7);
    auto gen2 = generate_synthetic(cfg, 7);
    test::TempDir d1("cat_bytes1"), d2("cat_bytes2");
    save_catalog(gen1.catalog, d1.str());
    save_catalog(gen2.catalog, d2.str());
    for (const char* name : {"meta.json", "items.jsonl", "interactions.jsonl", "kg.jsonl"}) {
        std::ifstream f1(d1.path() / name), f2(d2.path() / name);
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
    }
}

TEST_CASE("degenerate synthetic configs") {
    SynthConfig one;
    one.users = 1;
    one.items = 1;
    one.attributes = 1;
    one.attrs_per_item = {1, 1};
    one.interactions_per_user = {1, 1};
    auto gen = generate_synthetic(one, 5);
    CHECK(gen.catalog.num_items == 1);
    CHECK(gen.catalog.item_attributes[0].size() == 1);

    SynthConfig bad;
    bad.attributes = 20;
    bad.attrs_per_item = {30, 30};
    CHECK_THROWS_AS(generate_synthetic(bad, 1), ValidationError);
}

TEST_CASE("items_with_all_attributes basics") {
    Catalog c = test::tiny_catalog();
    CHECK(items_with_all_attributes(c, {}) == std::vector<Id>{0, 1, 2, 3, 4});
    CHECK(items_with_all_attributes(c, {0, 1}) == std::vector<Id>{0, 3});
    CHECK(items_with_all_attributes(c, {0, 1, 3}) == std::vector<Id>{});
    CHECK_THROWS_AS(items_with_all_attributes(c, {9}), ValidationError);
}

TEST_CASE("attributes_of_items basics") {
    Catalog c = test::tiny_catalog();
    CHECK(attributes_of_items(c, {}) == std::vector<Id>{});
    CHECK(attributes_of_items(c, {0, 1}) == std::vector<Id>{0, 1, 2});
    CHECK(attributes_of_items(c, {4}) == std::vector<Id>{3});
    CHECK_THROWS_AS(attributes_of_items(c, {99}), ValidationError);
}

TEST_CASE("candidate queries are antitone / monotone") {
    SynthConfig cfg;
    cfg.users = 5;
    cfg.items = 60;
    cfg.attributes = 12;
    auto gen = generate_synthetic(cfg, 11);
    const Catalog& c = gen.catalog;
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        // attrs1 subset of attrs2: result(attrs2) subset of result(attrs1)
        std::vector<Id> attrs2;
        for (Id p = 0; p < c.num_attributes; ++p) {
            if (rng.next_double() < 0.25) attrs2.push_back(p);
        }
        std::vector<Id> attrs1;
        for (Id p : attrs2) {
            if (rng.next_double() < 0.5) attrs1.push_back(p);
        }
        auto r1 = items_with_all_attributes(c, attrs1);
        auto r2 = items_with_all_attributes(c, attrs2);
        CHECK(std::includes(r1.begin(), r1.end(), r2.begin(), r2.end()));

        std::vector<Id> items2;
        for (Id v = 0; v < c.num_items; ++v) {
            if (rng.next_double() < 0.2) items2.push_back(v);
        }
        std::vector<Id> items1;
        for (Id v : items2) {
            if (rng.next_double() < 0.5) items1.push_back(v);
        }
        auto a1 = attributes_of_items(c, items1);
        auto a2 = attributes_of_items(c, items2);
        CHECK(std::includes(a2.begin(), a2.end(), a1.begin(), a1.end()));
    }
}
