#pragma once

#include <filesystem>
#include <string>

#include "dahcr/catalog.hpp"

namespace dahcr::test {

// Hand-written micro catalog used across suites.
//
//   attributes: 0..3
//   items:      0 {0,1}   1 {0,2}   2 {1,2}   3 {0,1,2}   4 {3}
//   users:      0 interacts with {0, 3}, 1 interacts with {2, 4}
inline Catalog tiny_catalog() {
    Catalog c;
    c.num_users = 2;
    c.num_items = 5;
    c.num_attributes = 4;
    c.item_attributes = {{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}, {3}};
    c.interactions = {{0, 0}, {0, 3}, {1, 2}, {1, 4}};
    c.relation_names = {"interact", "has_attribute"};
    return c;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("dahcr_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace dahcr::test
