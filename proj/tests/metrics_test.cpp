#include "mcfvc/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace mcfvc;

namespace {

Caption T(const std::string& s) { return tokenize(s); }

}  // namespace

TEST(Tokenize, Examples) {
    EXPECT_EQ(T("A man is Driving."), (Caption{"a", "man", "is", "driving"}));
    EXPECT_EQ(T(""), Caption{});
    EXPECT_EQ(T("two  spaces"), (Caption{"two", "spaces"}));
    EXPECT_EQ(T("Hello, world! it's 42"), (Caption{"hello", "world", "it", "s", "42"}));
}

TEST(Bleu4, IdenticalPairScoresOne) {
    std::vector<Caption> c = {T("the cat sat on the mat")};
    std::vector<RefSet> r = {{T("the cat sat on the mat")}};
    EXPECT_NEAR(bleu4(c, r), 1.0, 1e-12);
}

TEST(Bleu4, DisjointVocabularyScoresZero) {
    std::vector<Caption> c = {T("alpha beta gamma delta epsilon")};
    std::vector<RefSet> r = {{T("one two three four five")}};
    EXPECT_DOUBLE_EQ(bleu4(c, r), 0.0);
}

TEST(Bleu4, TwoSentenceCorpusMatchesHandCount) {
    // Clipped counts worked by hand:
    //   c1 "the cat sat on the mat" vs itself: 6/6, 5/5, 4/4, 3/3
    //   c2 "a red dog runs fast" vs "a red dog runs quickly today":
    //      unigrams 4/5, bigrams 3/4, trigrams 2/3, fourgrams 1/2
    //   lengths: cand 11, closest refs 6 + 6 = 12
    std::vector<Caption> c = {T("the cat sat on the mat"), T("a red dog runs fast")};
    std::vector<RefSet> r = {{T("the cat sat on the mat")}, {T("a red dog runs quickly today")}};
    double p1 = 10.0 / 11.0, p2 = 8.0 / 9.0, p3 = 6.0 / 7.0, p4 = 4.0 / 5.0;
    double expected = std::exp(1.0 - 12.0 / 11.0) * std::pow(p1 * p2 * p3 * p4, 0.25);
    EXPECT_NEAR(bleu4(c, r), expected, 1e-12);
}

TEST(Bleu4, EmptyCorpusRejected) {
    EXPECT_THROW(bleu4({}, {}), DomainError);
    EXPECT_THROW(bleu4({T("a b")}, {{}}), DomainError);
}

TEST(RougeL, IdenticalAndDisjoint) {
    EXPECT_NEAR(rouge_l({T("a b c d")}, {{T("a b c d")}}), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(rouge_l({T("a b c")}, {{T("x y z")}}), 0.0);
}

TEST(RougeL, MatchesDynamicProgrammingOracle) {
    // "a b c d" vs "a c d": LCS computed by an independent DP table.
    Caption cand = T("a b c d"), ref = T("a c d");
    std::vector<std::vector<size_t>> dp(cand.size() + 1, std::vector<size_t>(ref.size() + 1, 0));
    for (size_t i = 1; i <= cand.size(); ++i)
        for (size_t j = 1; j <= ref.size(); ++j)
            dp[i][j] = cand[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1
                                                 : std::max(dp[i - 1][j], dp[i][j - 1]);
    size_t lcs = dp[cand.size()][ref.size()];
    ASSERT_EQ(lcs, 3u);
    double beta2 = 1.44, p = lcs / 4.0, r = lcs / 3.0;
    double expected = (1.0 + beta2) * p * r / (r + beta2 * p);
    EXPECT_NEAR(rouge_l({cand}, {{ref}}), expected, 1e-12);
}

TEST(MeteorLite, IdenticalPairSingleChunk) {
    Caption c = T("a man rides a horse");
    double m = 5.0;
    EXPECT_NEAR(meteor_lite({c}, {{c}}), 1.0 - 0.5 * std::pow(1.0 / m, 3.0), 1e-12);
}

TEST(MeteorLite, NoMatchesScoresZero) {
    EXPECT_DOUBLE_EQ(meteor_lite({T("aa bb cc")}, {{T("dd ee ff")}}), 0.0);
}

TEST(MeteorLite, FiveTokenHandAlignment) {
    // cand "the cat sat on mat" vs ref "the cat on the mat".
    // Greedy longest-phrase alignment: "the cat" (len 2), then "on", "mat".
    // matches = 4, chunks = 3, P = R = 4/5.
    // F = 10*P*R/(R+9P) = 0.8; penalty = 0.5*(3/4)^3; score = 0.63125.
    double got = meteor_lite({T("the cat sat on mat")}, {{T("the cat on the mat")}});
    EXPECT_NEAR(got, 0.63125, 1e-12);
}

namespace {

// Independent CIDEr-D evaluation with explicit string-keyed TF-IDF vectors.
// Shares only the definition with the implementation, not the code.
double cider_oracle(const std::vector<Caption>& cands, const std::vector<RefSet>& refs,
                    const std::vector<RefSet>& corpus) {
    auto grams_of = [](const Caption& s, int n) {
        std::map<std::string, double> out;
        for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) {
            std::string k;
            for (int j = 0; j < n; ++j) k += s[i + j] + "|";
            out[k] += 1.0;
        }
        return out;
    };
    std::map<std::string, double> df;
    for (const RefSet& doc : corpus) {
        std::map<std::string, bool> seen;
        for (const Caption& ref : doc)
            for (int n = 1; n <= 4; ++n)
                for (auto& [k, v] : grams_of(ref, n)) seen[k] = true;
        for (auto& [k, v] : seen) df[k] += 1.0;
    }
    double N = static_cast<double>(corpus.size());
    auto idf = [&](const std::string& k) {
        double d = df.count(k) ? df.at(k) : 0.0;
        return std::log((1.0 + N) / (1.0 + d)) + 1.0;
    };
    double total = 0.0;
    for (size_t i = 0; i < cands.size(); ++i) {
        double per_ref_sum = 0.0;
        for (const Caption& ref : refs[i]) {
            double delta = static_cast<double>(cands[i].size()) - static_cast<double>(ref.size());
            double pen = std::exp(-delta * delta / 72.0);
            for (int n = 1; n <= 4; ++n) {
                auto gc = grams_of(cands[i], n);
                auto gr = grams_of(ref, n);
                double nc = 0, nr = 0, dot = 0;
                for (auto& [k, v] : gc) nc += (v * idf(k)) * (v * idf(k));
                for (auto& [k, v] : gr) nr += (v * idf(k)) * (v * idf(k));
                for (auto& [k, v] : gc)
                    if (gr.count(k))
                        dot += std::min(v * idf(k), gr.at(k) * idf(k)) * (gr.at(k) * idf(k));
                if (nc > 0 && nr > 0) per_ref_sum += pen * dot / std::sqrt(nc * nr);
            }
        }
        total += per_ref_sum / (4.0 * refs[i].size());
    }
    return 10.0 * total / cands.size();
}

}  // namespace

TEST(CiderD, SingleDocumentIdentityScoresTen) {
    Caption c = T("a man is driving a car");
    std::vector<RefSet> corpus = {{c}};
    double direct = cider_oracle({c}, corpus, corpus);
    EXPECT_NEAR(direct, 10.0, 1e-9);
    EXPECT_NEAR(cider_d({c}, corpus, corpus), 10.0, 1e-9);
}

TEST(CiderD, DisjointNgramsScoreZero) {
    std::vector<Caption> c = {T("alpha beta gamma delta")};
    std::vector<RefSet> r = {{T("one two three four")}};
    EXPECT_DOUBLE_EQ(cider_d(c, r, r), 0.0);
}

TEST(CiderD, ThreeDocumentCorpusMatchesVectorOracle) {
    std::vector<Caption> cands = {T("a man rides a horse"), T("a dog runs in the park"),
                                  T("two people are cooking food")};
    std::vector<RefSet> refs = {
        {T("a man rides a brown horse"), T("a person rides a horse")},
        {T("a dog runs through a park"), T("the dog is running in a park")},
        {T("two people cook food"), T("people are cooking in a kitchen")}};
    double got = cider_d(cands, refs, refs);
    double expected = cider_oracle(cands, refs, refs);
    EXPECT_NEAR(got, expected, 1e-10);
    EXPECT_GT(got, 0.0);
    EXPECT_LT(got, 10.0);
}

TEST(Metrics, PermutationInvariantOverCorpusOrder) {
    std::vector<Caption> cands = {T("a man rides a horse"), T("a dog runs in the park"),
                                  T("two people are cooking food")};
    std::vector<RefSet> refs = {
        {T("a man rides a brown horse")},
        {T("the dog is running in a park")},
        {T("people are cooking in a kitchen")}};
    std::vector<size_t> perm = {2, 0, 1};
    std::vector<Caption> pc;
    std::vector<RefSet> pr;
    for (size_t i : perm) {
        pc.push_back(cands[i]);
        pr.push_back(refs[i]);
    }
    EXPECT_NEAR(bleu4(cands, refs), bleu4(pc, pr), 1e-12);
    EXPECT_NEAR(rouge_l(cands, refs), rouge_l(pc, pr), 1e-12);
    EXPECT_NEAR(meteor_lite(cands, refs), meteor_lite(pc, pr), 1e-12);
    EXPECT_NEAR(cider_d(cands, refs, refs), cider_d(pc, pr, pr), 1e-12);
}

// ---------------------------------------------------------------------------
// average step accuracy

namespace {

StepAccuracyTable make_table(const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& z) {
    StepAccuracyTable t;
    for (size_t g = 0; g < z.size(); ++g) t.set_class_count(static_cast<int>(g) + 1, z[g]);
    for (size_t ti = 0; ti < rows.size(); ++ti)
        for (size_t g = 0; g < rows[ti].size(); ++g)
            t.set_score(static_cast<int>(ti) + 1, static_cast<int>(g) + 1, rows[ti][g]);
    return t;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

TEST(StepAccuracy, SpecExamples) {
    std::vector<int> z = {10, 2, 2, 2, 2, 2};
    auto ft = make_table({{35.33}, {1.95, 45.36}}, z);
    EXPECT_NEAR(round2(step_forgetting_metric(ft, 2)), 4.59, 0.01 + 1e-9);

    auto mcf = make_table({{35.33}, {29.73, 37.60}}, z);
    EXPECT_NEAR(round2(step_forgetting_metric(mcf, 2)), 15.52, 0.01 + 1e-9);

    auto ideal = make_table({{35.33}, {35.51, 39.25}, {33.61, 41.94, 52.79}}, z);
    EXPECT_NEAR(round2(step_forgetting_metric(ideal, 3)), 12.51, 0.01 + 1e-9);
}

TEST(StepAccuracy, ReproducesAllEighteenReportedValues) {
    const std::vector<int> z = {10, 2, 2, 2, 2, 2};
    struct Row {
        const char* model;
        std::vector<std::vector<double>> subtask_cider;
        std::vector<double> reported;
    };
    const std::vector<Row> models = {
        {"fine-tune",
         {{35.33},
          {1.95, 45.36},
          {0.53, 2.18, 50.48},
          {0.36, 1.04, 0.84, 32.91},
          {1.38, 0.68, 0.72, 1.03, 33.95},
          {1.25, 1.88, 1.47, 0.85, 0.80, 37.08}},
         {35.33, 4.59, 2.63, 1.14, 0.96, 0.81}},
        {"ideal",
         {{35.33},
          {35.51, 39.25},
          {33.61, 41.94, 52.79},
          {33.02, 43.37, 47.24, 30.75},
          {34.17, 39.80, 51.95, 21.10, 33.95},
          {35.09, 44.49, 54.80, 31.81, 33.96, 40.26}},
         {35.33, 18.07, 12.51, 8.95, 7.06, 6.34}},
        {"mcf-vc",
         {{35.33},
          {29.73, 37.60},
          {26.67, 33.49, 50.86},
          {26.66, 30.00, 49.50, 33.11},
          {25.50, 34.90, 50.29, 22.57, 30.79},
          {21.37, 32.95, 44.82, 19.93, 23.99, 26.22}},
         {35.33, 15.52, 10.37, 7.68, 5.91, 4.25}}};

    for (const Row& row : models) {
        StepAccuracyTable t = make_table(row.subtask_cider, z);
        for (int step = 1; step <= 6; ++step) {
            double got = round2(step_forgetting_metric(t, step));
            EXPECT_NEAR(got, row.reported[step - 1], 0.01 + 1e-9)
                << row.model << " step " << step;
        }
    }
}

TEST(StepAccuracy, LinearInEachEntry) {
    std::vector<int> z = {10, 2, 2};
    auto base = make_table({{1.0}, {1.0, 1.0}, {1.0, 1.0, 1.0}}, z);
    double before = step_forgetting_metric(base, 3);
    auto bumped = make_table({{1.0}, {1.0, 1.0}, {1.0, 7.0, 1.0}}, z);
    double after = step_forgetting_metric(bumped, 3);
    // coefficient of entry (t=3, g=2) is z^2 / (t * z_total) = 2 / (3 * 14)
    EXPECT_NEAR(after - before, 6.0 * 2.0 / (3.0 * 14.0), 1e-12);
}

TEST(StepAccuracy, MissingScoreNamesCell) {
    std::vector<int> z = {10, 2};
    auto t = make_table({{35.33}}, z);
    try {
        step_forgetting_metric(t, 2);
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("t=2"), std::string::npos);
        EXPECT_NE(msg.find("g="), std::string::npos);
    }
}

TEST(StepAccuracy, CsvRoundTrip) {
    std::vector<int> z = {10, 2, 2};
    auto t = make_table({{35.33}, {29.73, 37.60}, {26.67, 33.49, 50.86}}, z);
    std::stringstream ss;
    write_score_log_csv(ss, t);
    StepAccuracyTable back = read_score_log_csv(ss);
    for (int step = 1; step <= 3; ++step)
        EXPECT_DOUBLE_EQ(step_forgetting_metric(back, step), step_forgetting_metric(t, step));
}

TEST(StepAccuracy, SingleBaseStepEqualsBaseCider) {
    std::vector<int> z = {10};
    auto t = make_table({{42.5}}, z);
    EXPECT_DOUBLE_EQ(step_forgetting_metric(t, 1), 42.5);
}
