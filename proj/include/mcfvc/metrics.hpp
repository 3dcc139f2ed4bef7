#pragma once

// Caption-quality metrics (BLEU-4, ROUGE-L, exact-match METEOR, CIDEr-D) and
// the class-count-weighted average step accuracy used to track forgetting.
//
// All metrics work on pre-tokenized captions. Scores are fractions in [0,1]
// except CIDEr-D, which uses its conventional [0,10] scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcfvc/errors.hpp"

namespace mcfvc {

using Caption = std::vector<std::string>;
using RefSet = std::vector<Caption>;

// Lowercase, strip ASCII punctuation, split on whitespace.
inline Caption tokenize(const std::string& raw) {
    Caption out;
    std::string cur;
    for (char ch : raw) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c) || std::ispunct(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

namespace detail {

inline void require_corpus(const std::vector<Caption>& cands, const std::vector<RefSet>& refs,
                           const char* metric) {
    if (cands.empty()) throw DomainError(std::string(metric) + ": empty corpus");
    if (cands.size() != refs.size())
        throw DomainError(std::string(metric) + ": candidate/reference count mismatch");
    for (size_t i = 0; i < refs.size(); ++i)
        if (refs[i].empty())
            throw DomainError(std::string(metric) + ": candidate " + std::to_string(i) +
                              " has no references");
}

using NgramCounts = std::map<std::vector<std::string>, int>;

inline NgramCounts ngram_counts(const Caption& toks, int n) {
    NgramCounts out;
    if (static_cast<int>(toks.size()) < n) return out;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
    return out;
}

inline size_t lcs_length(const Caption& a, const Caption& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

// Corpus BLEU-4: clipped modified n-gram precision, geometric mean over
// n=1..4, brevity penalty from closest reference lengths. No smoothing: a
// zero precision at any order zeroes the score.
inline double bleu4(const std::vector<Caption>& cands, const std::vector<RefSet>& refs) {
    detail::require_corpus(cands, refs, "bleu4");
    double match[4] = {0, 0, 0, 0};
    double total[4] = {0, 0, 0, 0};
    long cand_len = 0, ref_len = 0;
    for (size_t i = 0; i < cands.size(); ++i) {
        const Caption& c = cands[i];
        cand_len += static_cast<long>(c.size());
        // closest reference length; ties break toward the shorter one
        long best = static_cast<long>(refs[i][0].size());
        for (const Caption& r : refs[i]) {
            long rl = static_cast<long>(r.size());
            long dc = std::labs(rl - static_cast<long>(c.size()));
            long db = std::labs(best - static_cast<long>(c.size()));
            if (dc < db || (dc == db && rl < best)) best = rl;
        }
        ref_len += best;
        for (int n = 1; n <= 4; ++n) {
            detail::NgramCounts cc = detail::ngram_counts(c, n);
            detail::NgramCounts clip;
            for (const Caption& r : refs[i]) {
                for (auto& [g, cnt] : detail::ngram_counts(r, n)) {
                    auto it = clip.find(g);
                    if (it == clip.end())
                        clip.emplace(g, cnt);
                    else
                        it->second = std::max(it->second, cnt);
                }
            }
            for (auto& [g, cnt] : cc) {
                total[n - 1] += cnt;
                auto it = clip.find(g);
                if (it != clip.end()) match[n - 1] += std::min(cnt, it->second);
            }
        }
    }
    double log_p = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (match[n] == 0.0 || total[n] == 0.0) return 0.0;
        log_p += std::log(match[n] / total[n]);
    }
    double bp = cand_len > ref_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_p / 4.0);
}

// ROUGE-L F-measure with beta = 1.2; best reference per candidate, corpus mean.
inline double rouge_l(const std::vector<Caption>& cands, const std::vector<RefSet>& refs) {
    detail::require_corpus(cands, refs, "rouge_l");
    const double beta2 = 1.2 * 1.2;
    double acc = 0.0;
    for (size_t i = 0; i < cands.size(); ++i) {
        double best = 0.0;
        for (const Caption& r : refs[i]) {
            size_t l = detail::lcs_length(cands[i], r);
            if (l == 0 || cands[i].empty() || r.empty()) continue;
            double prec = static_cast<double>(l) / cands[i].size();
            double rec = static_cast<double>(l) / r.size();
            best = std::max(best, (1.0 + beta2) * prec * rec / (rec + beta2 * prec));
        }
        acc += best;
    }
    return acc / cands.size();
}

namespace detail {

struct Alignment {
    int matches = 0;
    int chunks = 0;
};

// Exact-match alignment, greedy longest-phrase-first (longest common
// contiguous span over still-unmatched positions; ties toward the leftmost
// candidate position, then leftmost reference position). Chunk count comes
// from maximal runs of (i+1, j+1) pairs.
inline Alignment meteor_align(const Caption& c, const Caption& r) {
    std::vector<int> cand_to_ref(c.size(), -1);
    std::vector<bool> ref_used(r.size(), false);
    while (true) {
        size_t best_len = 0, best_i = 0, best_j = 0;
        for (size_t i = 0; i < c.size(); ++i) {
            for (size_t j = 0; j < r.size(); ++j) {
                size_t len = 0;
                while (i + len < c.size() && j + len < r.size() && cand_to_ref[i + len] < 0 &&
                       !ref_used[j + len] && c[i + len] == r[j + len])
                    ++len;
                if (len > best_len) {
                    best_len = len;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_len == 0) break;
        for (size_t k = 0; k < best_len; ++k) {
            cand_to_ref[best_i + k] = static_cast<int>(best_j + k);
            ref_used[best_j + k] = true;
        }
    }
    Alignment a;
    int prev_ref = -2;
    for (size_t i = 0; i < c.size(); ++i) {
        if (cand_to_ref[i] < 0) continue;
        ++a.matches;
        bool contiguous = i > 0 && cand_to_ref[i - 1] == cand_to_ref[i] - 1 && prev_ref == cand_to_ref[i] - 1;
        if (!contiguous) ++a.chunks;
        prev_ref = cand_to_ref[i];
    }
    return a;
}

}  // namespace detail

// Exact-match METEOR: unigram alignment, F-mean with recall weight 9,
// fragmentation penalty 0.5 * (chunks/matches)^3. Synonym and paraphrase
// stages are intentionally absent.
inline double meteor_lite(const std::vector<Caption>& cands, const std::vector<RefSet>& refs) {
    detail::require_corpus(cands, refs, "meteor_lite");
    double acc = 0.0;
    for (size_t i = 0; i < cands.size(); ++i) {
        double best = 0.0;
        for (const Caption& r : refs[i]) {
            if (cands[i].empty() || r.empty()) continue;
            detail::Alignment a = detail::meteor_align(cands[i], r);
            if (a.matches == 0) continue;
            double prec = static_cast<double>(a.matches) / cands[i].size();
            double rec = static_cast<double>(a.matches) / r.size();
            double fmean = 10.0 * prec * rec / (rec + 9.0 * prec);
            double frag = static_cast<double>(a.chunks) / a.matches;
            best = std::max(best, fmean * (1.0 - 0.5 * frag * frag * frag));
        }
        acc += best;
    }
    return acc / cands.size();
}

// CIDEr-D. TF-IDF n-gram vectors (n = 1..4), clipped similarity, gaussian
// length penalty with sigma = 6, averaged over n and references, scaled by
// 10. The IDF is smoothed as ln((1+N)/(1+df)) + 1 so that degenerate corpora
// (every n-gram in every document, e.g. a single-document corpus) still
// produce nonzero vectors instead of collapsing to 0/0.
inline double cider_d(const std::vector<Caption>& cands, const std::vector<RefSet>& refs,
                      const std::vector<RefSet>& corpus) {
    detail::require_corpus(cands, refs, "cider_d");
    if (corpus.empty()) throw DomainError("cider_d: empty IDF corpus");
    constexpr int kMaxN = 4;
    constexpr double kSigma = 6.0;

    std::unordered_map<std::string, double> idf;
    {
        std::unordered_map<std::string, int> df;
        for (const RefSet& doc : corpus) {
            std::set<std::string> grams;
            for (const Caption& r : doc)
                for (int n = 1; n <= kMaxN; ++n)
                    for (auto& [g, cnt] : detail::ngram_counts(r, n)) {
                        std::string key;
                        for (const auto& w : g) {
                            key += w;
                            key += '\x1f';
                        }
                        grams.insert(key);
                    }
            for (const auto& g : grams) df[g]++;
        }
        const double N = static_cast<double>(corpus.size());
        for (auto& [g, d] : df) idf[g] = std::log((1.0 + N) / (1.0 + d)) + 1.0;
    }
    const double default_idf = std::log(1.0 + static_cast<double>(corpus.size())) + 1.0;  // df = 0

    struct Vec {
        std::unordered_map<std::string, double> w[kMaxN];
        double norm[kMaxN] = {0, 0, 0, 0};
        size_t len = 0;
    };
    auto to_vec = [&](const Caption& toks) {
        Vec v;
        v.len = toks.size();
        for (int n = 1; n <= kMaxN; ++n) {
            for (auto& [g, cnt] : detail::ngram_counts(toks, n)) {
                std::string key;
                for (const auto& w : g) {
                    key += w;
                    key += '\x1f';
                }
                auto it = idf.find(key);
                double weight = cnt * (it == idf.end() ? default_idf : it->second);
                v.w[n - 1][key] = weight;
                v.norm[n - 1] += weight * weight;
            }
            v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
        }
        return v;
    };

    double corpus_score = 0.0;
    for (size_t i = 0; i < cands.size(); ++i) {
        Vec vc = to_vec(cands[i]);
        double cand_score = 0.0;
        for (const Caption& r : refs[i]) {
            Vec vr = to_vec(r);
            double delta = static_cast<double>(vc.len) - static_cast<double>(vr.len);
            double len_penalty = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
            for (int n = 0; n < kMaxN; ++n) {
                if (vc.norm[n] == 0.0 || vr.norm[n] == 0.0) continue;
                double dot = 0.0;
                for (auto& [g, wc] : vc.w[n]) {
                    auto it = vr.w[n].find(g);
                    if (it != vr.w[n].end()) dot += std::min(wc, it->second) * it->second;
                }
                cand_score += len_penalty * dot / (vc.norm[n] * vr.norm[n]);
            }
        }
        corpus_score += cand_score / (kMaxN * static_cast<double>(refs[i].size()));
    }
    return 10.0 * corpus_score / static_cast<double>(cands.size());
}

// ---------------------------------------------------------------------------
// average step accuracy

// Lower-triangular CIDEr table: score(t, g) is the CIDEr of sub-task g after
// training step t (1-based, g <= t), plus per-task class counts.
class StepAccuracyTable {
  public:
    void set_class_count(int g, int z) {
        if (g < 1) throw ContractError("task index must be >= 1");
        if (z < 1) throw DomainError("class count must be >= 1 for task " + std::to_string(g));
        if (static_cast<int>(class_counts_.size()) < g) class_counts_.resize(g, 0);
        class_counts_[g - 1] = z;
    }

    void set_score(int t, int g, double cider) {
        if (g > t || g < 1)
            throw ContractError("score (" + std::to_string(t) + "," + std::to_string(g) +
                                ") outside the lower triangle");
        scores_[{t, g}] = cider;
        t_max_ = std::max(t_max_, t);
    }

    bool has_score(int t, int g) const { return scores_.count({t, g}) > 0; }

    double score(int t, int g) const {
        auto it = scores_.find({t, g});
        if (it == scores_.end())
            throw ContractError("missing score for (t=" + std::to_string(t) +
                                ", g=" + std::to_string(g) + ")");
        return it->second;
    }

    int class_count(int g) const {
        if (g < 1 || g > static_cast<int>(class_counts_.size()) || class_counts_[g - 1] == 0)
            throw ContractError("missing class count for task " + std::to_string(g));
        return class_counts_[g - 1];
    }

    int t_max() const { return t_max_; }

  private:
    std::map<std::pair<int, int>, double> scores_;
    std::vector<int> class_counts_;
    int t_max_ = 0;
};

// Average step accuracy after step t: (1/t) * sum_g (z^g / z^total) * CIDEr_{t,g}.
inline double step_forgetting_metric(const StepAccuracyTable& table, int t) {
    if (t < 1) throw ContractError("step_forgetting_metric: t must be >= 1");
    double z_total = 0.0;
    for (int g = 1; g <= t; ++g) z_total += table.class_count(g);
    double acc = 0.0;
    for (int g = 1; g <= t; ++g)
        acc += (table.class_count(g) / z_total) * table.score(t, g);
    return acc / t;
}

// ---------------------------------------------------------------------------
// score-log CSV (columns: task_step, sub_task, class_count, cider)

inline void write_score_log_csv(std::ostream& os, const StepAccuracyTable& table) {
    os << "task_step,sub_task,class_count,cider\n";
    for (int t = 1; t <= table.t_max(); ++t)
        for (int g = 1; g <= t; ++g)
            if (table.has_score(t, g)) {
                std::ostringstream v;
                v.precision(17);
                v << table.score(t, g);
                os << t << "," << g << "," << table.class_count(g) << "," << v.str() << "\n";
            }
}

inline StepAccuracyTable read_score_log_csv(std::istream& is) {
    StepAccuracyTable table;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("score log: empty file");
    if (line.rfind("task_step", 0) != 0)
        throw ConfigError("score log: expected header 'task_step,sub_task,class_count,cider'");
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int vals_i[3];
        for (int k = 0; k < 3; ++k) {
            if (!std::getline(ls, cell, ','))
                throw ConfigError("score log: malformed line " + std::to_string(lineno));
            vals_i[k] = std::stoi(cell);
        }
        if (!std::getline(ls, cell, ','))
            throw ConfigError("score log: malformed line " + std::to_string(lineno));
        double cider = std::stod(cell);
        table.set_class_count(vals_i[1], vals_i[2]);
        table.set_score(vals_i[0], vals_i[1], cider);
    }
    return table;
}

// Pooled scores for one evaluation pass, with the per-task breakdown.
struct MetricReport {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double meteor_lite = 0.0;
    double cider_d = 0.0;
    struct TaskScores {
        int task = 0;
        int class_count = 0;
        double bleu4 = 0.0, rouge_l = 0.0, meteor_lite = 0.0, cider_d = 0.0;
    };
    std::vector<TaskScores> per_task;
};

}  // namespace mcfvc
