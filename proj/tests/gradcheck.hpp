#pragma once

// Central finite-difference gradient checking used across the test suites.
// Deliberately independent of the library's backward pass: it only evaluates
// forward expressions at perturbed inputs.

#include <cmath>
#include <functional>
#include <vector>

#include "mcfvc/tensor.hpp"

namespace testutil {

using mcfvc::Tensor;

// f maps leaf tensors to a scalar tensor. Returns the largest relative error
// between analytic and numeric gradients over all entries of all leaves.
inline double gradcheck_max_rel_err(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> leaves, double h = 1e-5) {
    Tensor root = f(leaves);
    root.backward();

    double worst = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        // leaves the graph never reached (e.g. behind a detach) have zero grad
        std::vector<double> analytic = leaves[li].grad_ready()
                                           ? leaves[li].grad()
                                           : std::vector<double>(leaves[li].size(), 0.0);
        std::vector<double> base = leaves[li].data();
        for (size_t i = 0; i < base.size(); ++i) {
            auto eval_at = [&](double v) {
                std::vector<Tensor> shifted;
                for (size_t lj = 0; lj < leaves.size(); ++lj) {
                    std::vector<double> d = leaves[lj].data();
                    if (lj == li) d[i] = v;
                    shifted.emplace_back(leaves[lj].shape(), std::move(d), false);
                }
                return f(shifted).value();
            };
            double numeric = (eval_at(base[i] + h) - eval_at(base[i] - h)) / (2.0 * h);
            double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace testutil
