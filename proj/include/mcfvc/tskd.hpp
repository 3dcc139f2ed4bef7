#pragma once

// Two-stage knowledge distillation: the style constraint on semantic
// attention maps and the contrastive constraint on text output features,
// plus the total-loss composition.

#include <string>
#include <utility>
#include <vector>

#include "mcfvc/errors.hpp"
#include "mcfvc/tensor.hpp"

namespace mcfvc {

// Style filter over a semantic attention map S_A [r x c]: the row-mean
// vector's outer product scaled by 1/c. Always symmetric, PSD and rank <= 1.
// The Gram form (S_A^T S_A / numel) is available as the alternative reading
// of the style statistic.
inline Tensor style_filter(const Tensor& sa, bool gram_form = false) {
    if (sa.rank() != 2) throw DomainError("style_filter: expected a rank-2 map, got " +
                                          shape_str(sa.shape()));
    const int c = sa.dim(1);
    if (gram_form)
        return scale(matmul(transpose(sa), sa), 1.0 / static_cast<double>(sa.size()));
    Tensor rowmean = mean_axis(sa, 0);  // [c]
    return scale(matmul(reshape(rowmean, {c, 1}), reshape(rowmean, {1, c})),
                 1.0 / static_cast<double>(c));
}

// Mean squared distance between style matrices.
inline Tensor style_loss(const Tensor& s_new, const Tensor& s_old) {
    if (s_new.shape() != s_old.shape())
        throw ContractError("style_loss: dimension mismatch " + shape_str(s_new.shape()) +
                            " vs " + shape_str(s_old.shape()));
    return mse(s_new, s_old);
}

// Paired text-output features of the two model generations for one batch.
struct DistillBatch {
    Tensor z_new;  // [bs x d]
    Tensor z_old;  // [bs x d], same row order
    double tau = 0.5;
};

// NT-Xent over the pooled 2*bs features. Anchor i (a new-model row) pairs
// with old-model row i; the denominator runs over the pool excluding only the
// anchor's own position, so the positive and the remaining 2bs-2 rows all
// appear in it.
inline Tensor ntxent_distill(const DistillBatch& batch) {
    if (batch.tau <= 0.0) throw DomainError("ntxent_distill: tau must be positive");
    if (batch.z_new.rank() != 2 || batch.z_old.rank() != 2 ||
        batch.z_new.shape() != batch.z_old.shape())
        throw ContractError("ntxent_distill: feature blocks must share shape, got " +
                            shape_str(batch.z_new.shape()) + " vs " + shape_str(batch.z_old.shape()));
    const int bs = batch.z_new.dim(0);
    if (bs < 2)
        throw DomainError("ntxent_distill: degenerate batch of size " + std::to_string(bs) +
                          "; need at least 2 pairs");

    Tensor pool = concat(batch.z_new, batch.z_old, 0);          // [2bs x d]
    Tensor sims = cosine_similarity_matrix(batch.z_new, pool);  // [bs x 2bs]
    Tensor logits = scale(sims, 1.0 / batch.tau);

    // exclude the anchor's self-pairing from the denominator
    std::vector<double> excl(static_cast<size_t>(bs) * 2 * bs, 0.0);
    for (int i = 0; i < bs; ++i) excl[static_cast<size_t>(i) * 2 * bs + i] = -1e30;
    Tensor denom = logsumexp_rows(add(logits, Tensor({bs, 2 * bs}, std::move(excl))));

    std::vector<std::pair<int, int>> positive;
    positive.reserve(static_cast<size_t>(bs));
    for (int i = 0; i < bs; ++i) positive.emplace_back(i, bs + i);
    Tensor pos = select_entries(logits, positive);

    return scale(sum(sub(denom, pos)), 1.0 / static_cast<double>(bs));
}

// L_total = L_vc + varsigma * (vartheta * L_style + L_C).
inline Tensor total_loss(const Tensor& l_vc, const Tensor& l_style, const Tensor& l_c,
                         double varsigma, double vartheta) {
    if (l_vc.size() != 1 || l_style.size() != 1 || l_c.size() != 1)
        throw ContractError("total_loss: all loss terms must be scalar");
    return add(l_vc, scale(add(scale(l_style, vartheta), l_c), varsigma));
}

}  // namespace mcfvc
