#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dahcr/nn.hpp"

namespace dahcr::num {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-6;  // decoupled: theta -= lr * wd * theta
};

// Adam with bias correction and decoupled L2. Moments are kept per
// parameter name and created on first update, so an optimizer covering
// a subset of the model leaves the rest untouched.
class AdamState {
public:
    explicit AdamState(AdamConfig config) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::int64_t calls() const { return calls_; }
    std::int64_t param_step(const std::string& name) const;

    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
        std::int64_t step = 0;
    };
    Moments& moments(const std::string& name, std::size_t size);
    bool has_moments(const std::string& name) const { return moments_.count(name) != 0; }

    // One optimizer call over the given (name, gradient) pairs.
    void step(ParamSet& params,
              const std::vector<std::pair<std::string, const std::vector<double>*>>& grads);

    // Serialization hooks (checkpointing).
    const std::unordered_map<std::string, Moments>& all_moments() const { return moments_; }
    void restore(std::string name, Moments m) { moments_[std::move(name)] = std::move(m); }
    void set_calls(std::int64_t c) { calls_ = c; }

private:
    AdamConfig config_;
    std::unordered_map<std::string, Moments> moments_;
    std::int64_t calls_ = 0;
};

// Single-parameter convenience form.
void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
               const std::string& name = "param");

}  // namespace dahcr::num
