#include "mcfvc/tskd.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mcfvc/rng.hpp"

using namespace mcfvc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool rg = false, double lo = -1.0, double hi = 1.0) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(d), rg);
}

// Explicit-loop NT-Xent over the pooled 2*bs rows; cosine via scalar math.
double ntxent_bruteforce(const std::vector<std::vector<double>>& z_new,
                         const std::vector<std::vector<double>>& z_old, double tau) {
    auto cosv = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (size_t k = 0; k < a.size(); ++k) {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    const size_t bs = z_new.size();
    double loss = 0.0;
    for (size_t i = 0; i < bs; ++i) {
        double denom = 0.0;
        for (size_t g = 0; g < 2 * bs; ++g) {
            if (g == i) continue;  // anchor's own pool position
            const std::vector<double>& zg = g < bs ? z_new[g] : z_old[g - bs];
            denom += std::exp(cosv(z_new[i], zg) / tau);
        }
        loss += -std::log(std::exp(cosv(z_new[i], z_old[i]) / tau) / denom);
    }
    return loss / static_cast<double>(bs);
}

// Top-two singular values of a symmetric PSD matrix by power iteration with
// deflation.
std::pair<double, double> top_two_singular(const Tensor& m) {
    const int n = m.dim(0);
    auto matvec = [&](const std::vector<double>& a, const std::vector<double>& x) {
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) y[i] += a[static_cast<size_t>(i) * n + j] * x[j];
        return y;
    };
    auto power = [&](const std::vector<double>& a) {
        std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
        double lambda = 0.0;
        for (int it = 0; it < 500; ++it) {
            std::vector<double> w = matvec(a, v);
            double norm = 0.0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-300) return std::make_pair(0.0, v);
            for (double& x : w) x /= norm;
            lambda = norm;
            v = w;
        }
        return std::make_pair(lambda, v);
    };
    std::vector<double> a = m.data();
    auto [l1, v1] = power(a);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[static_cast<size_t>(i) * n + j] -= l1 * v1[i] * v1[j];
    auto [l2, v2] = power(a);
    return {l1, l2};
}

}  // namespace

TEST(StyleFilter, ZeroMapGivesZeroMatrix) {
    Tensor sa = Tensor::zeros({3, 4});
    Tensor s = style_filter(sa);
    EXPECT_EQ(s.shape(), (Shape{4, 4}));
    for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(StyleFilter, SingleRowOuterProductByHand) {
    Tensor sa({1, 2}, {2, 4});
    Tensor s = style_filter(sa);
    EXPECT_DOUBLE_EQ(s.at(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(s.at(0, 1), 4.0);
    EXPECT_DOUBLE_EQ(s.at(1, 0), 4.0);
    EXPECT_DOUBLE_EQ(s.at(1, 1), 8.0);
}

TEST(StyleFilter, ScalingIsQuadratic) {
    Rng rng(1);
    Tensor sa = random_tensor({3, 5}, rng);
    Tensor s1 = style_filter(sa);
    Tensor s2 = style_filter(scale(sa, 3.0));
    for (size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(s2.data()[i], 9.0 * s1.data()[i], 1e-10);
}

TEST(StyleFilter, SymmetricPsdRankOne) {
    Rng rng(2);
    Tensor sa = random_tensor({4, 6}, rng);
    Tensor s = style_filter(sa);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) EXPECT_NEAR(s.at(i, j), s.at(j, i), 1e-9);
    auto [l1, l2] = top_two_singular(s);
    ASSERT_GT(l1, 0.0);
    EXPECT_LE(l2 / l1, 1e-8);
    // PSD: x^T S x >= 0 for random probes
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(6);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        double quad = 0.0;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) quad += x[i] * s.at(i, j) * x[j];
        EXPECT_GE(quad, -1e-12);
    }
}

TEST(StyleFilter, GramFormAlternative) {
    Rng rng(3);
    Tensor sa = random_tensor({3, 4}, rng);
    Tensor g = style_filter(sa, true);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double expect = 0.0;
            for (int r = 0; r < 3; ++r) expect += sa.at(r, i) * sa.at(r, j);
            EXPECT_NEAR(g.at(i, j), expect / 12.0, 1e-12);
        }
}

TEST(StyleLoss, IdenticalZeroAndHandValue) {
    Rng rng(4);
    Tensor s = random_tensor({3, 3}, rng);
    EXPECT_DOUBLE_EQ(style_loss(s, s).value(), 0.0);
    EXPECT_DOUBLE_EQ(style_loss(Tensor({1, 1}, {1.0}), Tensor({1, 1}, {3.0})).value(), 4.0);
    EXPECT_THROW(style_loss(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({1, 1}, {1.0})), ContractError);
}

TEST(StyleLoss, MatchesDirectFormulaAndIsSymmetric) {
    Rng rng(5);
    Tensor a = random_tensor({4, 4}, rng);
    Tensor b = random_tensor({4, 4}, rng);
    double expect = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        expect += d * d;
    }
    expect /= static_cast<double>(a.size());
    EXPECT_NEAR(style_loss(a, b).value(), expect, 1e-12);
    EXPECT_DOUBLE_EQ(style_loss(a, b).value(), style_loss(b, a).value());
    EXPECT_GE(style_loss(a, b).value(), 0.0);
}

TEST(NtXent, OrthonormalSelfPairsMatchBruteForce) {
    // bs = 2, z_new == z_old, orthonormal rows, tau = 0.5.
    std::vector<std::vector<double>> rows = {{1, 0}, {0, 1}};
    DistillBatch batch{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 2}, {1, 0, 0, 1}), 0.5};
    double expect = ntxent_bruteforce(rows, rows, 0.5);
    EXPECT_NEAR(ntxent_distill(batch).value(), expect, 1e-12);
}

TEST(NtXent, FiftyRandomBatchesMatchBruteForce) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        int bs = 2 + static_cast<int>(rng.below(7));
        int d = 3 + static_cast<int>(rng.below(6));
        double tau = 0.2 + rng.uniform();
        std::vector<std::vector<double>> zn(bs, std::vector<double>(d));
        std::vector<std::vector<double>> zo(bs, std::vector<double>(d));
        std::vector<double> flat_n, flat_o;
        for (int i = 0; i < bs; ++i)
            for (int k = 0; k < d; ++k) {
                zn[i][k] = rng.uniform(-2.0, 2.0);
                zo[i][k] = rng.uniform(-2.0, 2.0);
                flat_n.push_back(zn[i][k]);
                flat_o.push_back(zo[i][k]);
            }
        DistillBatch batch{Tensor({bs, d}, flat_n), Tensor({bs, d}, flat_o), tau};
        EXPECT_NEAR(ntxent_distill(batch).value(), ntxent_bruteforce(zn, zo, tau), 1e-10)
            << "trial " << trial;
    }
}

TEST(NtXent, LossFallsAsPositiveCosineRises) {
    // Anchor 0 rotates toward its positive inside a plane orthogonal to the
    // rest of the pool, so every negative similarity stays fixed.
    auto batch_at = [](double theta) {
        return DistillBatch{Tensor({2, 3}, {std::cos(theta), std::sin(theta), 0, 0, 0, 1}),
                            Tensor({2, 3}, {1, 0, 0, 0, 0, 1}), 0.5};
    };
    double prev = 1e300;
    for (double theta : {1.2, 0.8, 0.4, 0.1}) {
        double loss = ntxent_distill(batch_at(theta)).value();
        EXPECT_LT(loss, prev);
        prev = loss;
    }
}

TEST(NtXent, PermutationOfBatchOrderKeepsMeanLoss) {
    Rng rng(7);
    const int bs = 5, d = 4;
    std::vector<double> zn(bs * d), zo(bs * d);
    for (double& v : zn) v = rng.uniform(-1.0, 1.0);
    for (double& v : zo) v = rng.uniform(-1.0, 1.0);
    DistillBatch batch{Tensor({bs, d}, zn), Tensor({bs, d}, zo), 0.5};

    std::vector<int> perm = {3, 0, 4, 1, 2};
    std::vector<double> pn(bs * d), po(bs * d);
    for (int i = 0; i < bs; ++i)
        for (int k = 0; k < d; ++k) {
            pn[i * d + k] = zn[perm[i] * d + k];
            po[i * d + k] = zo[perm[i] * d + k];
        }
    DistillBatch permuted{Tensor({bs, d}, pn), Tensor({bs, d}, po), 0.5};
    EXPECT_NEAR(ntxent_distill(batch).value(), ntxent_distill(permuted).value(), 1e-12);
}

TEST(NtXent, DegenerateBatchAndBadTauRejected) {
    Tensor one({1, 3}, {1, 0, 0});
    EXPECT_THROW(ntxent_distill({one, one, 0.5}), DomainError);
    Tensor two({2, 2}, {1, 0, 0, 1});
    EXPECT_THROW(ntxent_distill({two, two, 0.0}), DomainError);
    EXPECT_THROW(ntxent_distill({two, two, -1.0}), DomainError);
}

TEST(NtXent, IdenticalModelsSelfPositiveValue) {
    // z_new == z_old: the loss equals the brute-force self-positive value.
    Rng rng(8);
    const int bs = 4, d = 5;
    std::vector<std::vector<double>> rows(bs, std::vector<double>(d));
    std::vector<double> flat;
    for (auto& r : rows)
        for (double& v : r) {
            v = rng.uniform(-1.0, 1.0);
            flat.push_back(v);
        }
    DistillBatch batch{Tensor({bs, d}, flat), Tensor({bs, d}, flat), 0.5};
    EXPECT_NEAR(ntxent_distill(batch).value(), ntxent_bruteforce(rows, rows, 0.5), 1e-12);
}

TEST(TotalLoss, DisabledDistillationLeavesCaptionLoss) {
    Tensor l = total_loss(Tensor::scalar(1.25), Tensor::scalar(10.0), Tensor::scalar(2.0), 0.0, 0.5);
    EXPECT_DOUBLE_EQ(l.value(), 1.25);
}

TEST(TotalLoss, PaperWeightsArithmetic) {
    Tensor l = total_loss(Tensor::scalar(1.0), Tensor::scalar(10.0), Tensor::scalar(2.0), 0.6, 0.0001);
    EXPECT_NEAR(l.value(), 2.2006, 1e-12);
}

TEST(TotalLoss, GradientFlowsIntoAllThreeTerms) {
    Tensor vc = Tensor::scalar(1.0, true);
    Tensor st = Tensor::scalar(2.0, true);
    Tensor c = Tensor::scalar(3.0, true);
    total_loss(vc, st, c, 0.6, 0.0001).backward();
    EXPECT_DOUBLE_EQ(vc.grad()[0], 1.0);
    EXPECT_NEAR(st.grad()[0], 0.6 * 0.0001, 1e-15);
    EXPECT_DOUBLE_EQ(c.grad()[0], 0.6);
}

TEST(TskdGradients, FiniteDifferenceChecks) {
    Rng rng(9);
    // style pipeline gradient, old side frozen
    Tensor old_map = random_tensor({3, 4}, rng);
    auto style_fn = [old_map](const std::vector<Tensor>& in) {
        return style_loss(style_filter(in[0]), style_filter(old_map));
    };
    EXPECT_LT(testutil::gradcheck_max_rel_err(style_fn, {random_tensor({3, 4}, rng, true)}), 1e-4);

    // contrastive pipeline gradient, old side frozen
    Tensor z_old = random_tensor({3, 4}, rng);
    auto nt_fn = [z_old](const std::vector<Tensor>& in) {
        return ntxent_distill({in[0], z_old, 0.5});
    };
    EXPECT_LT(testutil::gradcheck_max_rel_err(nt_fn, {random_tensor({3, 4}, rng, true)}), 1e-4);
}
