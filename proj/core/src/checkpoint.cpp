#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>

#include "dahcr/errors.hpp"
#include "dahcr/harness.hpp"
#include "json.hpp"

namespace dahcr {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'A', 'H', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_f32(std::ofstream& out, const std::vector<double>& values) {
    for (double v : values) {
        float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

void read_f32(std::ifstream& in, std::vector<double>& values, const std::string& path) {
    for (auto& v : values) {
        float f = 0;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        if (!in) throw IoError(path + ": truncated checkpoint");
        v = static_cast<double>(f);
    }
}

json block_entry(const std::string& name, int rows, int cols) {
    return json{{"name", name}, {"rows", rows}, {"cols", cols}};
}

}  // namespace

void save_checkpoint(const CheckpointState& state, const std::string& path) {
    json manifest;
    manifest["config"] = json::parse(experiment_to_json(state.config));
    manifest["fingerprint"] = state.fingerprint;
    manifest["grad_steps"] = state.grad_steps;
    manifest["env_steps"] = state.env_steps;
    manifest["adam_director_calls"] = state.adam_director_calls;
    manifest["adam_actor_calls"] = state.adam_actor_calls;

    json blocks = json::array();
    for (const auto& name : state.online.names()) {
        const auto& t = state.online.at(name);
        blocks.push_back(block_entry("online/" + name, t.rows, t.cols));
    }
    for (const auto& name : state.target.names()) {
        const auto& t = state.target.at(name);
        blocks.push_back(block_entry("target/" + name, t.rows, t.cols));
    }
    json dir_steps = json::object();
    for (const auto& [name, mom] : state.adam_director) {
        blocks.push_back(block_entry("adam_dir/" + name + "/m", 1, static_cast<int>(mom.m.size())));
        blocks.push_back(block_entry("adam_dir/" + name + "/v", 1, static_cast<int>(mom.v.size())));
        dir_steps[name] = mom.step;
    }
    json act_steps = json::object();
    for (const auto& [name, mom] : state.adam_actor) {
        blocks.push_back(block_entry("adam_act/" + name + "/m", 1, static_cast<int>(mom.m.size())));
        blocks.push_back(block_entry("adam_act/" + name + "/v", 1, static_cast<int>(mom.v.size())));
        act_steps[name] = mom.step;
    }
    manifest["adam_director_steps"] = dir_steps;
    manifest["adam_actor_steps"] = act_steps;
    manifest["blocks"] = blocks;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out << manifest.dump() << "\n";
    for (const auto& name : state.online.names()) write_f32(out, *state.online.at(name).data);
    for (const auto& name : state.target.names()) write_f32(out, *state.target.at(name).data);
    for (const auto& [name, mom] : state.adam_director) {
        write_f32(out, mom.m);
        write_f32(out, mom.v);
    }
    for (const auto& [name, mom] : state.adam_actor) {
        write_f32(out, mom.m);
        write_f32(out, mom.v);
    }
    if (!out) throw IoError("write failed: " + path);
}

CheckpointState load_checkpoint(const std::string& path, const std::string& expect_fingerprint,
                                std::ostream* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ValidationError(path + ": not a checkpoint (bad magic)");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw ValidationError(path + ": unsupported checkpoint version");
    }
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": truncated checkpoint");
    json manifest = json::parse(line, nullptr, false);
    if (manifest.is_discarded()) throw ValidationError(path + ": malformed manifest");

    CheckpointState st;
    st.config = parse_experiment_json(manifest.at("config").dump());
    st.fingerprint = manifest.at("fingerprint").get<std::string>();
    st.grad_steps = manifest.at("grad_steps").get<std::int64_t>();
    st.env_steps = manifest.at("env_steps").get<std::int64_t>();
    st.adam_director_calls = manifest.at("adam_director_calls").get<std::int64_t>();
    st.adam_actor_calls = manifest.at("adam_actor_calls").get<std::int64_t>();

    if (!expect_fingerprint.empty() && expect_fingerprint != st.fingerprint) {
        if (warnings) {
            (*warnings) << "warning: checkpoint fingerprint " << st.fingerprint
                        << " differs from expected " << expect_fingerprint
                        << "; loading parameters anyway\n";
        }
    }

    const auto dir_steps = manifest.at("adam_director_steps");
    const auto act_steps = manifest.at("adam_actor_steps");
    for (const auto& b : manifest.at("blocks")) {
        const std::string name = b.at("name").get<std::string>();
        const int rows = b.at("rows").get<int>();
        const int cols = b.at("cols").get<int>();
        std::vector<double> values(static_cast<std::size_t>(rows) * cols);
        read_f32(in, values, path);
        if (name.rfind("online/", 0) == 0) {
            auto& t = st.online.add(name.substr(7), rows, cols);
            *t.data = std::move(values);
        } else if (name.rfind("target/", 0) == 0) {
            auto& t = st.target.add(name.substr(7), rows, cols);
            *t.data = std::move(values);
        } else if (name.rfind("adam_dir/", 0) == 0 || name.rfind("adam_act/", 0) == 0) {
            const bool director = name.rfind("adam_dir/", 0) == 0;
            const std::string rest = name.substr(9);
            const auto slash = rest.rfind('/');
            const std::string pname = rest.substr(0, slash);
            const std::string part = rest.substr(slash + 1);
            auto& list = director ? st.adam_director : st.adam_actor;
            if (list.empty() || std::get<0>(list.back()) != pname) {
                num::AdamState::Moments mom;
                mom.step = (director ? dir_steps : act_steps).at(pname).get<std::int64_t>();
                list.emplace_back(pname, std::move(mom));
            }
            auto& mom = std::get<1>(list.back());
            (part == "m" ? mom.m : mom.v) = std::move(values);
        } else {
            throw ValidationError(path + ": unknown block " + name);
        }
    }
    return st;
}

}  // namespace dahcr
