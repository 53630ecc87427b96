#include "dahcr/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dahcr::num {

AdamState::Moments& AdamState::moments(const std::string& name, std::size_t size) {
    auto& m = moments_[name];
    if (m.m.empty()) {
        m.m.assign(size, 0.0);
        m.v.assign(size, 0.0);
    } else if (m.m.size() != size) {
        throw std::invalid_argument("adam: moment shape mismatch for " + name);
    }
    return m;
}

std::int64_t AdamState::param_step(const std::string& name) const {
    auto it = moments_.find(name);
    return it == moments_.end() ? 0 : it->second.step;
}

void AdamState::step(ParamSet& params,
                     const std::vector<std::pair<std::string, const std::vector<double>*>>& grads) {
    ++calls_;
    for (const auto& [name, grad] : grads) {
        Tensor& theta = params.at(name);
        const auto n = static_cast<std::size_t>(theta.size());
        if (grad->size() != n) throw std::invalid_argument("adam: gradient shape mismatch for " + name);
        auto& mom = moments(name, n);
        ++mom.step;
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(mom.step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(mom.step));
        double* th = theta.ptr();
        const double* g = grad->data();
        for (std::size_t i = 0; i < n; ++i) {
            mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g[i];
            mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            th[i] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) +
                                   config_.weight_decay * th[i]);
        }
    }
}

void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
               const std::string& name) {
    ParamSet tmp;
    auto& t = tmp.add(name, param.rows, param.cols);
    *t.data = *param.data;
    state.step(tmp, {{name, &grad}});
    *param.data = *t.data;
}

}  // namespace dahcr::num
