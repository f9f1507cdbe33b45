#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "orthogeo/errors.hpp"
#include "orthogeo/rng.hpp"

namespace orthogeo::optim {

// One named parameter tensor handed to the optimizer for a single step.
// apply_decay selects decoupled weight decay; gain parameters are trained
// without decay so the learned spectrum is not biased toward zero.
struct TensorBinding {
    std::string name;
    double* value = nullptr;
    const double* grad = nullptr;
    std::size_t size = 0;
    bool apply_decay = true;
};

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// One AdamW step over all bound tensors. Moment buffers are allocated on
// first use and must keep their shapes afterwards. Decay is decoupled:
// it never flows through the moment estimates.
inline void adamw_step(std::span<const TensorBinding> params, AdamState& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            state.m[p].assign(params[p].size, 0.0);
            state.v[p].assign(params[p].size, 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ContractError("adamw_step: tensor count does not match optimizer state");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (state.m[p].size() != params[p].size) {
            throw ContractError("adamw_step: tensor '" + params[p].name + "' changed size");
        }
        for (std::size_t i = 0; i < params[p].size; ++i) {
            if (!std::isfinite(params[p].grad[i])) {
                throw NumericError("adamw_step: non-finite gradient in tensor '" + params[p].name + "'");
            }
        }
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        const TensorBinding& tb = params[p];
        for (std::size_t i = 0; i < tb.size; ++i) {
            const double g = tb.grad[i];
            state.m[p][i] = state.beta1 * state.m[p][i] + (1.0 - state.beta1) * g;
            state.v[p][i] = state.beta2 * state.v[p][i] + (1.0 - state.beta2) * g * g;
            const double m_hat = state.m[p][i] / bc1;
            const double v_hat = state.v[p][i] / bc2;
            double update = m_hat / (std::sqrt(v_hat) + state.eps);
            if (tb.apply_decay) update += state.weight_decay * tb.value[i];
            tb.value[i] -= state.lr * update;
        }
    }
}

// Central-difference check of an analytic gradient. Probes are distinct
// coordinates; when probes >= dim every coordinate is checked. Returns the
// worst normalized error max |fd - g| / max(|fd|, |g|, floor), where the
// floor keeps roundoff noise on near-zero coordinates from dominating.
inline double grad_check(const std::function<double(std::span<const double>)>& loss,
                         std::span<const double> params, std::span<const double> analytic_grad,
                         std::size_t probes, double h, std::uint64_t seed) {
    if (params.size() != analytic_grad.size()) throw DimensionError("grad_check: size mismatch");
    if (params.empty()) throw DimensionError("grad_check: empty parameter vector");
    if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");

    const std::size_t n = params.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (probes < n) {
        Rng rng(seed);
        rng.shuffle(coords);
        coords.resize(probes);
    }

    double grad_scale = 0.0;
    for (double g : analytic_grad) grad_scale = std::max(grad_scale, std::fabs(g));
    const double floor = std::max(1e-4 * grad_scale, 1e-12);

    std::vector<double> work(params.begin(), params.end());
    double worst = 0.0;
    for (std::size_t c : coords) {
        const double saved = work[c];
        work[c] = saved + h;
        const double up = loss(work);
        work[c] = saved - h;
        const double down = loss(work);
        work[c] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double g = analytic_grad[c];
        const double err = std::fabs(fd - g) / std::max({std::fabs(fd), std::fabs(g), floor});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace orthogeo::optim
