#include "dahcr/gradcheck.hpp"

#include <cmath>

namespace dahcr::num {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& point) {
    Tape tape;
    std::vector<Tensor> vars;
    vars.reserve(point.size());
    for (const auto& t : point) vars.push_back(tape.var(t));
    return f(tape, vars).value();
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor>& point, double eps) {
    // Analytic pass.
    Tape tape;
    std::vector<Tensor> vars;
    vars.reserve(point.size());
    for (const auto& t : point) vars.push_back(tape.var(t));
    Tensor loss = f(tape, vars);
    Gradients grads = tape.backward(loss);

    double worst = 0.0;
    for (std::size_t ti = 0; ti < point.size(); ++ti) {
        const auto analytic = grads.of(vars[ti]);
        std::vector<Tensor> probe;
        for (const auto& t : point) probe.push_back(t.clone());
        for (int i = 0; i < point[ti].size(); ++i) {
            double* slot = &(*probe[ti].data)[static_cast<std::size_t>(i)];
            const double saved = *slot;
            *slot = saved + eps;
            const double up = evaluate(f, probe);
            *slot = saved - eps;
            const double down = evaluate(f, probe);
            *slot = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[static_cast<std::size_t>(i)];
            const double err = std::fabs(a - numeric) /
                               std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace dahcr::num
