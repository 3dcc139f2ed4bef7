#pragma once

// Adam with bias correction. Parameter tensors are replaced functionally on
// each step; moment buffers key off parameter names so a glossary resize
// mid-run would be caught by the size check.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mcfvc/errors.hpp"
#include "mcfvc/fgss.hpp"
#include "mcfvc/model.hpp"

namespace mcfvc {

struct AdamConfig {
    double lr = 8.75e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ModelParams& params, const GradMap& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (const auto& [name, g] : grads) {
            const Tensor& p = params.at(name);
            if (g.size() != p.size())
                throw ContractError("adam: gradient size mismatch for '" + name + "'");
            std::vector<double>& m = m_[name];
            std::vector<double>& v = v_[name];
            if (m.empty()) m.assign(g.size(), 0.0);
            if (v.empty()) v.assign(g.size(), 0.0);
            std::vector<double> next = p.data();
            for (size_t i = 0; i < g.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                next[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
            }
            params.replace(name, Tensor(p.shape(), std::move(next), true));
        }
    }

    long step_count() const { return t_; }

  private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace mcfvc
