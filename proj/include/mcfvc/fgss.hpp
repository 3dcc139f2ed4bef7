#pragma once

// Fine-grained sensitivity selection: the composite binary gradient mask
// built from random linear pruning, thresholded Fisher sensitivity, and the
// frozen recurrent layer. Mask polarity: 1 = trainable on the new task,
// 0 = inherited from the old parameters and never updated.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mcfvc/errors.hpp"
#include "mcfvc/model.hpp"
#include "mcfvc/rng.hpp"
#include "mcfvc/tensor.hpp"

namespace mcfvc {

using GradMap = std::map<std::string, std::vector<double>>;

// Per-parameter binary mask covering exactly the registered parameters.
class ParamMask {
  public:
    void set(const std::string& name, Tensor t) {
        for (double v : t.data())
            if (v != 0.0 && v != 1.0)
                throw ContractError("mask entry for '" + name + "' is not binary");
        entries_.insert_or_assign(name, std::move(t));
    }

    const Tensor& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("mask missing parameter '" + name + "'");
        return it->second;
    }

    bool has(const std::string& name) const { return entries_.count(name) > 0; }
    const std::map<std::string, Tensor>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    static ParamMask ones_like(const ModelParams& params) {
        ParamMask m;
        for (const auto& e : params.entries())
            m.set(e.name, Tensor::full(e.tensor.shape(), 1.0));
        return m;
    }

    void require_coverage(const ModelParams& params) const {
        if (entries_.size() != params.count())
            throw ContractError("mask covers " + std::to_string(entries_.size()) +
                                " parameters, model has " + std::to_string(params.count()));
        for (const auto& e : params.entries())
            if (at(e.name).shape() != e.tensor.shape())
                throw ContractError("mask shape mismatch for '" + e.name + "'");
    }

  private:
    std::map<std::string, Tensor> entries_;
};

// Mean squared per-parameter gradient of the sample log-likelihood.
struct FisherEstimate {
    std::map<std::string, Tensor> entries;
    long sample_count = 0;
};

// Random pruning of the linear layers (encoder, attention, output_linear):
// each entry is zeroed independently with probability sigma. Non-linear
// layers are left fully trainable here.
inline ParamMask random_linear_mask(const ModelParams& params, double sigma, Rng& rng) {
    if (sigma < 0.0 || sigma > 1.0)
        throw DomainError("random_linear_mask: sigma must lie in [0,1], got " +
                          std::to_string(sigma));
    ParamMask mask;
    for (const auto& e : params.entries()) {
        std::vector<double> m(e.tensor.size(), 1.0);
        if (is_linear_tag(e.tag))
            for (double& v : m) v = rng.bernoulli(sigma) ? 0.0 : 1.0;
        mask.set(e.name, Tensor(e.tensor.shape(), std::move(m)));
    }
    return mask;
}

// (1/N) sum_n (d log-likelihood_n / d theta)^2, evaluated wherever the given
// parameters currently sit. per_sample_loss(n) must build a scalar negative
// log-likelihood on those parameters.
template <typename LossFn>
FisherEstimate fisher_sensitivity(ModelParams& params, int n_samples, LossFn&& per_sample_loss) {
    if (n_samples < 1) throw DomainError("fisher_sensitivity: sample count must be >= 1");
    std::map<std::string, std::vector<double>> acc;
    for (const auto& e : params.entries()) acc.emplace(e.name, std::vector<double>(e.tensor.size(), 0.0));

    for (int n = 0; n < n_samples; ++n) {
        for (const auto& e : params.entries()) e.tensor.zero_grad();
        Tensor loss = per_sample_loss(n);
        loss.backward();
        for (const auto& e : params.entries()) {
            // parameters the loss never touched contribute zero
            if (!e.tensor.requires_grad() || !e.tensor.grad_ready()) continue;
            const std::vector<double>& g = e.tensor.grad();
            std::vector<double>& a = acc[e.name];
            for (size_t i = 0; i < g.size(); ++i) a[i] += g[i] * g[i];
        }
    }

    FisherEstimate est;
    est.sample_count = n_samples;
    for (const auto& e : params.entries()) {
        std::vector<double>& a = acc[e.name];
        for (double& v : a) v /= static_cast<double>(n_samples);
        est.entries.emplace(e.name, Tensor(e.tensor.shape(), std::move(a)));
    }
    for (const auto& e : params.entries()) e.tensor.zero_grad();
    return est;
}

// Hard binary step: entry >= kappa -> 1, else 0.
inline ParamMask threshold_mask(const std::map<std::string, Tensor>& weighted, double kappa) {
    ParamMask mask;
    for (const auto& [name, t] : weighted) {
        std::vector<double> m(t.size());
        for (size_t i = 0; i < m.size(); ++i) m[i] = t.data()[i] >= kappa ? 1.0 : 0.0;
        mask.set(name, Tensor(t.shape(), std::move(m)));
    }
    return mask;
}

// Freezes every lstm-tagged parameter; everything else passes.
inline ParamMask frozen_layer_mask(const ModelParams& params) {
    bool found_lstm = false;
    ParamMask mask;
    for (const auto& e : params.entries()) {
        double fill = e.tag == LayerTag::Lstm ? 0.0 : 1.0;
        found_lstm |= e.tag == LayerTag::Lstm;
        mask.set(e.name, Tensor::full(e.tensor.shape(), fill));
    }
    if (!found_lstm)
        throw ConfigError("frozen_layer_mask: no lstm-tagged parameter registered");
    return mask;
}

// theta^FgSS = thresh_kappa[A_sigma ∘ E] ∘ frozen.
inline ParamMask compose_fgss(const ParamMask& pruning, const FisherEstimate& fisher,
                              double kappa, const ParamMask& frozen) {
    std::map<std::string, Tensor> weighted;
    for (const auto& [name, a] : pruning.entries()) {
        auto it = fisher.entries.find(name);
        if (it == fisher.entries.end())
            throw ContractError("compose_fgss: fisher estimate missing '" + name + "'");
        weighted.emplace(name, hadamard(a, it->second));
    }
    if (fisher.entries.size() != pruning.entries().size())
        throw ContractError("compose_fgss: pruning and fisher coverage differ");
    ParamMask thresholded = threshold_mask(weighted, kappa);
    ParamMask out;
    for (const auto& [name, t] : thresholded.entries()) {
        if (!frozen.has(name)) throw ContractError("compose_fgss: frozen mask missing '" + name + "'");
        out.set(name, hadamard(t, frozen.at(name)));
    }
    if (frozen.entries().size() != thresholded.entries().size())
        throw ContractError("compose_fgss: frozen mask coverage differs");
    return out;
}

inline GradMap collect_gradients(const ModelParams& params) {
    GradMap grads;
    for (const auto& e : params.entries()) {
        if (!e.tensor.requires_grad()) continue;
        if (e.tensor.grad_ready())
            grads.emplace(e.name, e.tensor.grad());
        else
            grads.emplace(e.name, std::vector<double>(e.tensor.size(), 0.0));
    }
    return grads;
}

// Zeroes gradients at masked-out positions so those parameters keep their
// inherited values; mask-1 positions pass through untouched.
inline void apply_mask_to_gradients(GradMap& grads, const ParamMask& mask) {
    for (auto& [name, g] : grads) {
        const Tensor& m = mask.at(name);
        if (m.size() != g.size())
            throw ContractError("apply_mask_to_gradients: shape mismatch for '" + name + "'");
        // assignment, not multiplication: keeps masked zeros exactly +0.0
        for (size_t i = 0; i < g.size(); ++i)
            if (m.data()[i] == 0.0) g[i] = 0.0;
    }
}

}  // namespace mcfvc
