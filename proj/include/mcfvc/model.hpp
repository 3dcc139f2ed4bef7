#pragma once

// The toy multimodal encoder-decoder captioner: 2D/3D feature fusion, visual
// self-attention with hard/soft feature selection, semantic attention over
// phrase embeddings, an LSTM decoder with structured dropout, a growable
// glossary, and beam-search decoding.

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcfvc/errors.hpp"
#include "mcfvc/glossary.hpp"
#include "mcfvc/rng.hpp"
#include "mcfvc/tensor.hpp"

namespace mcfvc {

enum class LayerTag { Encoder, Attention, Lstm, Embedding, OutputLinear };

inline const char* to_string(LayerTag t) {
    switch (t) {
        case LayerTag::Encoder: return "encoder";
        case LayerTag::Attention: return "attention";
        case LayerTag::Lstm: return "lstm";
        case LayerTag::Embedding: return "embedding";
        case LayerTag::OutputLinear: return "output_linear";
    }
    throw ContractError("unknown layer tag");
}

inline LayerTag layer_tag_from_string(const std::string& s) {
    if (s == "encoder") return LayerTag::Encoder;
    if (s == "attention") return LayerTag::Attention;
    if (s == "lstm") return LayerTag::Lstm;
    if (s == "embedding") return LayerTag::Embedding;
    if (s == "output_linear") return LayerTag::OutputLinear;
    throw ConfigError("unknown layer tag '" + s + "'");
}

// Parameters of the linear layers that random pruning applies to.
inline bool is_linear_tag(LayerTag t) {
    return t == LayerTag::Encoder || t == LayerTag::Attention || t == LayerTag::OutputLinear;
}

// Named, layer-tagged parameter registry. Insertion order is stable and is
// the canonical ordering for checkpoints and masks.
class ModelParams {
  public:
    struct Entry {
        std::string name;
        Tensor tensor;
        LayerTag tag;
    };

    void add(const std::string& name, Tensor t, LayerTag tag) {
        if (by_name_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
        by_name_.emplace(name, entries_.size());
        entries_.push_back({name, std::move(t), tag});
    }

    bool has(const std::string& name) const { return by_name_.count(name) > 0; }

    const Tensor& at(const std::string& name) const { return entry(name).tensor; }

    void replace(const std::string& name, Tensor t) {
        Entry& e = entry(name);
        if (t.shape() != e.tensor.shape())
            throw ContractError("replace of '" + name + "' changes shape " +
                                shape_str(e.tensor.shape()) + " -> " + shape_str(t.shape()));
        e.tensor = std::move(t);
    }

    // Shape-changing replacement, used when the glossary grows.
    void resize(const std::string& name, Tensor t) { entry(name).tensor = std::move(t); }

    const std::vector<Entry>& entries() const { return entries_; }
    size_t count() const { return entries_.size(); }

    Entry& entry(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second];
    }
    const Entry& entry(const std::string& name) const {
        return const_cast<ModelParams*>(this)->entry(name);
    }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> by_name_;
};

struct ModelDims {
    int frames = 20;
    int d2 = 16;
    int d3 = 16;
    int model_dim = 32;  // cross-modal width: embeddings, encoder output, contexts
    int hidden = 32;
    int max_caption_len = 12;
};

struct ForwardOptions {
    double gamma = 1.0;         // gumbel noise strength in the soft path
    double dropout_rate = 0.1;  // structured dropout on the LSTM output
    bool training = true;       // enables dropout and gumbel noise
    bool gumbel_noise = true;   // can be disabled independently for tests
    // Use the soft selection as the forward value instead of the hard
    // straight-through composite. The hard path is piecewise constant, so
    // finite-difference gradient checks need this.
    bool soft_selection = false;
};

struct CaptionHypothesis {
    std::vector<int> tokens;  // glossary indices, EOS-terminated unless cut at max length
    double log_prob = 0.0;
};

// Eq.-level op: row-wise fusion of static and dynamic features.
inline Tensor encode_visual(const Tensor& f2d, const Tensor& f3d) {
    if (f2d.rank() != 2 || f3d.rank() != 2 || f2d.dim(0) != f3d.dim(0))
        throw ShapeError("encode_visual: row mismatch " + shape_str(f2d.shape()) + " vs " +
                         shape_str(f3d.shape()));
    return concat(f2d, f3d, 1);
}

struct GumbelSelection {
    Tensor forward;        // straight-through: hard values, soft gradients
    Tensor backward_path;  // the soft path on its own
    Tensor hard_weights;   // one-hot rows actually used in the forward values
};

// Hard/soft feature selection from the visual attention map. Selection logits
// are log(AT + 1e-12); noise_rng == nullptr disables the Gumbel noise. With
// noise, each row's hard pick follows Categorical(AT row) (the Gumbel-max
// construction); gamma scales the noise entering the soft path.
inline GumbelSelection gumbel_select(const Tensor& features, const Tensor& attention,
                                     double gamma, Rng* noise_rng) {
    if (gamma <= 0.0) throw DomainError("gumbel_select: gamma must be positive");
    if (attention.rank() != 2 || attention.dim(0) != attention.dim(1) ||
        attention.dim(1) != features.dim(0))
        throw ShapeError("gumbel_select: attention " + shape_str(attention.shape()) +
                         " incompatible with features " + shape_str(features.shape()));
    Tensor logits = log_shifted(attention, 1e-12);
    Tensor hard_in = logits, soft_in = logits;
    if (noise_rng != nullptr) {
        std::vector<double> eta(logits.size());
        for (double& v : eta) v = noise_rng->gumbel();
        Tensor noise(logits.shape(), eta);
        hard_in = add(logits, noise);
        soft_in = add(logits, scale(noise, gamma));
    }
    Tensor hard = argmax_onehot(hard_in, 1);
    Tensor soft = softmax(soft_in, 1);
    Tensor soft_sel = matmul(soft, features);
    Tensor hard_sel;
    {
        NoGradGuard g;
        hard_sel = matmul(hard, features);
    }
    // value(hard) + grad(soft): add the detached residual to the soft path
    Tensor residual = sub(hard_sel, soft_sel.detach());
    return {add(soft_sel, residual), soft_sel, hard};
}

// Eq.-level op: S_A[j] = sum_i alpha_ij * selected_i with alpha the scaled
// dot-product attention of phrase row j over the selected visual rows.
inline Tensor semantic_attention(const Tensor& selected, const Tensor& phrase) {
    if (selected.rank() != 2 || phrase.rank() != 2 || selected.dim(1) != phrase.dim(1))
        throw ShapeError("semantic_attention: width mismatch " + shape_str(selected.shape()) +
                         " vs " + shape_str(phrase.shape()));
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(selected.dim(1)));
    Tensor scores = scale(matmul(phrase, transpose(selected)), inv_sqrt_d);
    return matmul(softmax(scores, 1), selected);
}

// Eq.-level op: o ∘ [R * size(R)/sum(R)] with R ~ Bernoulli(1-rate); identity
// outside training. An all-zero draw is redrawn.
inline Tensor structured_dropout(const Tensor& o, double rate, Rng& rng, bool training = true) {
    if (rate < 0.0 || rate >= 1.0)
        throw DomainError("structured_dropout: rate must lie in [0,1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return o;
    std::vector<double> mask(o.size());
    double kept = 0.0;
    do {
        kept = 0.0;
        for (double& v : mask) {
            v = rng.bernoulli(1.0 - rate) ? 1.0 : 0.0;
            kept += v;
        }
    } while (kept == 0.0);
    double s = static_cast<double>(mask.size()) / kept;
    for (double& v : mask) v *= s;
    return hadamard(o, Tensor(o.shape(), std::move(mask)));
}

// Per-token-averaged cross entropy of a logits sequence against gold indices;
// PAD positions are excluded.
inline Tensor caption_loss(const Tensor& logits_seq, const std::vector<int>& gold,
                           int pad_index = Glossary::kPad) {
    if (logits_seq.rank() != 2 ||
        logits_seq.dim(0) != static_cast<int>(gold.size()))
        throw ShapeError("caption_loss: logits " + shape_str(logits_seq.shape()) + " vs " +
                         std::to_string(gold.size()) + " gold tokens");
    const int vocab = logits_seq.dim(1);
    std::vector<std::pair<int, int>> picks;
    for (size_t k = 0; k < gold.size(); ++k) {
        if (gold[k] >= vocab || gold[k] < 0)
            throw ContractError("caption_loss: gold index " + std::to_string(gold[k]) +
                                " outside vocabulary of size " + std::to_string(vocab));
        if (gold[k] != pad_index) picks.emplace_back(static_cast<int>(k), gold[k]);
    }
    if (picks.empty()) throw ContractError("caption_loss: sequence is all padding");
    Tensor chosen = select_entries(log_softmax(logits_seq, 1), picks);
    return scale(sum(chosen), -1.0 / static_cast<double>(picks.size()));
}

struct LstmState {
    Tensor h;  // [rows x hidden]
    Tensor c;
};

class CaptionModel {
  public:
    CaptionModel(ModelDims dims, Glossary glossary, uint64_t init_seed)
        : dims_(dims), glossary_(std::move(glossary)) {
        Rng rng = Rng::for_stream(init_seed, RngStream::ModelInit);
        auto uniform_init = [&rng](Shape shape) {
            std::vector<double> d(shape_numel(shape));
            for (double& v : d) v = rng.uniform(-0.08, 0.08);
            return Tensor(std::move(shape), std::move(d), true);
        };
        const int d = dims_.model_dim, h = dims_.hidden, v = glossary_.size();
        params_.add("enc.weight", uniform_init({dims_.d2 + dims_.d3, d}), LayerTag::Encoder);
        params_.add("enc.bias", Tensor::zeros({d}, true), LayerTag::Encoder);
        params_.add("att.query", uniform_init({d, d}), LayerTag::Attention);
        params_.add("att.key", uniform_init({d, d}), LayerTag::Attention);
        params_.add("lstm.w_x", uniform_init({2 * d, 4 * h}), LayerTag::Lstm);
        params_.add("lstm.w_h", uniform_init({h, 4 * h}), LayerTag::Lstm);
        params_.add("lstm.bias", Tensor::zeros({4 * h}, true), LayerTag::Lstm);
        params_.add("embed.table", uniform_init({v, d}), LayerTag::Embedding);
        params_.add("out.weight", uniform_init({v, h}), LayerTag::OutputLinear);
        params_.add("out.bias", Tensor::zeros({v}, true), LayerTag::OutputLinear);
    }

    // Internal constructor for checkpoint loading / cloning.
    CaptionModel(ModelDims dims, Glossary glossary, ModelParams params)
        : dims_(dims), glossary_(std::move(glossary)), params_(std::move(params)) {
        validate();
    }

    const ModelDims& dims() const { return dims_; }
    const Glossary& glossary() const { return glossary_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

    void validate() const {
        const int v = glossary_.size();
        if (params_.at("embed.table").dim(0) != v || params_.at("out.weight").dim(0) != v ||
            params_.at("out.bias").dim(0) != v)
            throw ContractError("glossary size " + std::to_string(v) +
                                " does not match embedding/output rows");
    }

    // Frozen deep copy: same values, no gradient tracking anywhere.
    CaptionModel clone_frozen() const {
        ModelParams frozen;
        for (const auto& e : params_.entries())
            frozen.add(e.name, Tensor(e.tensor.shape(), e.tensor.data(), false), e.tag);
        return CaptionModel(dims_, glossary_, std::move(frozen));
    }

    CaptionModel clone_trainable() const {
        ModelParams copy;
        for (const auto& e : params_.entries())
            copy.add(e.name, Tensor(e.tensor.shape(), e.tensor.data(), true), e.tag);
        return CaptionModel(dims_, glossary_, std::move(copy));
    }

    struct Encoded {
        Tensor features;   // [frames x d] encoded visual rows
        Tensor attention;  // [frames x frames] row-stochastic AT
        Tensor selected;   // [frames x d] straight-through selected features
    };

    Encoded encode(const Tensor& f2d, const Tensor& f3d, const ForwardOptions& opt,
                   Rng* rng) const {
        Tensor fused = encode_visual(f2d, f3d);
        Tensor v = tanh(add_rowwise(matmul(fused, params_.at("enc.weight")), params_.at("enc.bias")));
        Tensor q = matmul(v, params_.at("att.query"));
        Tensor k = matmul(v, params_.at("att.key"));
        double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dims_.model_dim));
        Tensor at = softmax(scale(matmul(q, transpose(k)), inv_sqrt_d), 1);
        Rng* noise = (opt.training && opt.gumbel_noise) ? rng : nullptr;
        GumbelSelection sel = gumbel_select(v, at, opt.gamma, noise);
        return {v, at, opt.soft_selection ? sel.backward_path : sel.forward};
    }

    Tensor embed(const std::vector<int>& tokens) const {
        return gather_rows(params_.at("embed.table"), tokens);
    }

    LstmState initial_state(int rows) const {
        return {Tensor::zeros({rows, dims_.hidden}), Tensor::zeros({rows, dims_.hidden})};
    }

    LstmState lstm_cell(const Tensor& x, const LstmState& state) const {
        const int h = dims_.hidden;
        Tensor gates = add_rowwise(
            add(matmul(x, params_.at("lstm.w_x")), matmul(state.h, params_.at("lstm.w_h"))),
            params_.at("lstm.bias"));
        Tensor gi = sigmoid(slice(gates, 1, 0, h));
        Tensor gf = sigmoid(slice(gates, 1, h, h));
        Tensor gg = tanh(slice(gates, 1, 2 * h, h));
        Tensor go = sigmoid(slice(gates, 1, 3 * h, h));
        Tensor c_next = add(hadamard(gf, state.c), hadamard(gi, gg));
        return {hadamard(go, tanh(c_next)), c_next};
    }

    Tensor project_hidden(const Tensor& hidden, const Tensor& out_weight_t) const {
        return add_rowwise(matmul(hidden, out_weight_t), params_.at("out.bias"));
    }

    // One decoder step: LSTM recurrence on [token embedding ; context], then
    // logits over the current glossary. Pure: the input state is not touched.
    std::pair<LstmState, Tensor> decoder_step(const LstmState& state,
                                              const Tensor& token_embedding,
                                              const Tensor& context) const {
        if (state.h.dim(1) != dims_.hidden)
            throw ContractError("decoder_step: state width " + std::to_string(state.h.dim(1)) +
                                " does not match configured hidden " + std::to_string(dims_.hidden));
        LstmState next = lstm_cell(concat(token_embedding, context, 1), state);
        Tensor logits = project_hidden(next.h, transpose(params_.at("out.weight")));
        if (logits.dim(1) != glossary_.size())
            throw ContractError("decoder_step: logits width does not match glossary size");
        return {next, logits};
    }

    // Context row for queries [rows x d] attending over selected features.
    Tensor attend(const Tensor& queries, const Tensor& selected) const {
        return semantic_attention(selected, queries);
    }

    struct BatchForward {
        Tensor loss_vc;                     // scalar, token-averaged over the batch
        Tensor z;                           // [bs x hidden] mean-pooled decoder states
        std::vector<Tensor> semantic_maps;  // per record, gold-prefix x d
        long token_count = 0;
    };

    struct BatchInput {
        std::vector<Tensor> f2d;                 // per record [frames x d2]
        std::vector<Tensor> f3d;                 // per record [frames x d3]
        std::vector<std::vector<int>> captions;  // encoded gold captions, no BOS/EOS
    };

    // Teacher-forced forward over a batch. The phrase input of the semantic
    // attention is the embedded gold prefix (BOS + caption), and the same
    // per-step rows feed the decoder as context.
    BatchForward forward_batch(const BatchInput& in, const ForwardOptions& opt, Rng* rng) const {
        const size_t bs = in.captions.size();
        if (bs == 0 || in.f2d.size() != bs || in.f3d.size() != bs)
            throw ContractError("forward_batch: empty or ragged batch");
        const int max_len = dims_.max_caption_len;

        // input k -> predicts target k; input = BOS + gold[:-1 truncated]
        std::vector<std::vector<int>> inputs(bs), targets(bs);
        int steps = 0;
        for (size_t r = 0; r < bs; ++r) {
            std::vector<int> gold = in.captions[r];
            if (static_cast<int>(gold.size()) > max_len - 1)
                gold.resize(static_cast<size_t>(max_len - 1));
            inputs[r].push_back(Glossary::kBos);
            for (int t : gold) inputs[r].push_back(t);
            targets[r] = gold;
            targets[r].push_back(Glossary::kEos);
            steps = std::max(steps, static_cast<int>(targets[r].size()));
        }
        for (size_t r = 0; r < bs; ++r) {
            inputs[r].resize(static_cast<size_t>(steps), Glossary::kPad);
            targets[r].resize(static_cast<size_t>(steps), Glossary::kPad);
        }

        // Per-record encoding and semantic attention over the gold prefix.
        std::vector<Tensor> maps;
        maps.reserve(bs);
        std::vector<Tensor> full_maps;
        for (size_t r = 0; r < bs; ++r) {
            Encoded enc = encode(in.f2d[r], in.f3d[r], opt, rng);
            Tensor phrase = embed(inputs[r]);
            Tensor sa = semantic_attention(enc.selected, phrase);
            full_maps.push_back(sa);
            int true_len = 1;
            for (size_t k = 0; k < targets[r].size(); ++k)
                if (targets[r][k] != Glossary::kPad) true_len = static_cast<int>(k) + 1;
            maps.push_back(slice(sa, 0, 0, true_len));
        }

        Tensor out_weight_t = transpose(params_.at("out.weight"));
        LstmState state = initial_state(static_cast<int>(bs));
        std::vector<Tensor> step_hidden;
        std::vector<Tensor> step_logits;
        for (int k = 0; k < steps; ++k) {
            std::vector<int> toks(bs);
            for (size_t r = 0; r < bs; ++r) toks[r] = inputs[r][static_cast<size_t>(k)];
            Tensor e = embed(toks);
            Tensor ctx = row(full_maps[0], k);
            for (size_t r = 1; r < bs; ++r) ctx = concat(ctx, row(full_maps[r], k), 0);
            state = lstm_cell(concat(e, ctx, 1), state);
            Tensor dropped = opt.training
                                 ? structured_dropout(state.h, opt.dropout_rate, *rng, true)
                                 : state.h;
            step_hidden.push_back(dropped);
            step_logits.push_back(project_hidden(dropped, out_weight_t));
        }

        // Loss: token-weighted mean of the per-record caption losses.
        Tensor weighted_sum = Tensor::scalar(0.0);
        long total_tokens = 0;
        std::vector<Tensor> z_rows;
        for (size_t r = 0; r < bs; ++r) {
            int true_len = static_cast<int>(maps[r].dim(0));
            Tensor rec_logits = row(step_logits[0], static_cast<int>(r));
            Tensor rec_hidden = row(step_hidden[0], static_cast<int>(r));
            for (int k = 1; k < true_len; ++k) {
                rec_logits = concat(rec_logits, row(step_logits[k], static_cast<int>(r)), 0);
                rec_hidden = concat(rec_hidden, row(step_hidden[k], static_cast<int>(r)), 0);
            }
            std::vector<int> gold(targets[r].begin(), targets[r].begin() + true_len);
            weighted_sum = add(weighted_sum,
                               scale(caption_loss(rec_logits, gold), static_cast<double>(true_len)));
            total_tokens += true_len;
            z_rows.push_back(reshape(mean_axis(rec_hidden, 0), {1, dims_.hidden}));
        }
        Tensor z = z_rows[0];
        for (size_t r = 1; r < bs; ++r) z = concat(z, z_rows[r], 0);

        return {scale(weighted_sum, 1.0 / static_cast<double>(total_tokens)), z, maps,
                total_tokens};
    }

    // Beam-search decoding (noise-free, gradient-free). beam == 1 is greedy.
    CaptionHypothesis beam_search(const Tensor& f2d, const Tensor& f3d, int beam,
                                  int max_len = -1) const {
        if (beam < 1) throw DomainError("beam_search: beam must be >= 1");
        if (max_len < 0) max_len = dims_.max_caption_len;
        NoGradGuard nograd;
        ForwardOptions opt;
        opt.training = false;
        Encoded enc = encode(f2d, f3d, opt, nullptr);

        struct Hyp {
            std::vector<int> tokens;  // generated tokens, excluding BOS
            double log_prob = 0.0;
            bool done = false;
        };
        std::vector<Hyp> live = {{{}, 0.0, false}};
        std::vector<LstmState> states = {initial_state(1)};
        std::vector<Hyp> completed;

        for (int step = 0; step < max_len && !live.empty(); ++step) {
            // Batch the live hypotheses into one decoder step.
            std::vector<int> last(live.size());
            for (size_t i = 0; i < live.size(); ++i)
                last[i] = live[i].tokens.empty() ? Glossary::kBos : live[i].tokens.back();
            Tensor e = embed(last);
            Tensor ctx = attend(e, enc.selected);
            LstmState joint{states[0].h, states[0].c};
            for (size_t i = 1; i < live.size(); ++i) {
                joint.h = concat(joint.h, states[i].h, 0);
                joint.c = concat(joint.c, states[i].c, 0);
            }
            auto [next, logits] = decoder_step(joint, e, ctx);
            Tensor logp = log_softmax(logits, 1);

            struct Cand {
                size_t src;
                int token;
                double score;
            };
            std::vector<Cand> cands;
            const int vocab = glossary_.size();
            for (size_t i = 0; i < live.size(); ++i)
                for (int t = 0; t < vocab; ++t) {
                    if (t == Glossary::kPad || t == Glossary::kBos) continue;
                    cands.push_back({i, t, live[i].log_prob + logp.at(static_cast<int>(i), t)});
                }
            std::stable_sort(cands.begin(), cands.end(),
                             [](const Cand& a, const Cand& b) { return a.score > b.score; });

            // Keep the top `beam` extensions; EOS extensions retire to the
            // completed pool and give up their slot.
            std::vector<Hyp> next_live;
            std::vector<LstmState> next_states;
            int taken = 0;
            for (const Cand& c : cands) {
                if (taken >= beam) break;
                ++taken;
                Hyp h = live[c.src];
                h.tokens.push_back(c.token);
                h.log_prob = c.score;
                if (c.token == Glossary::kEos) {
                    h.done = true;
                    completed.push_back(std::move(h));
                } else {
                    next_live.push_back(std::move(h));
                    next_states.push_back({row(next.h, static_cast<int>(c.src)),
                                           row(next.c, static_cast<int>(c.src))});
                }
            }
            live = std::move(next_live);
            states = std::move(next_states);
        }
        // Hypotheses cut off at max length count as completed.
        for (Hyp& h : live) completed.push_back(std::move(h));
        if (completed.empty()) return {{Glossary::kEos}, -1e300};
        const Hyp* best = &completed[0];
        for (const Hyp& h : completed)
            if (h.log_prob > best->log_prob) best = &h;
        return {best->tokens, best->log_prob};
    }

    // Decoded hypothesis tokens as words, specials stripped.
    std::vector<std::string> hypothesis_words(const CaptionHypothesis& hyp) const {
        std::vector<std::string> out;
        for (int t : hyp.tokens)
            if (t > Glossary::kUnk) out.push_back(glossary_.word(t));
        return out;
    }

    // Grows the glossary from new caption token streams. Existing rows of the
    // embedding and output matrices are preserved bit for bit; new rows are
    // drawn uniform(-0.08, 0.08) from the provided stream.
    void glossary_extend(const std::vector<std::vector<std::string>>& token_streams, Rng& row_rng) {
        const int old_size = glossary_.size();
        glossary_.extend(token_streams);
        const int new_size = glossary_.size();
        if (new_size == old_size) return;
        auto grow_matrix = [&](const std::string& name, int cols) {
            const Tensor& old_t = params_.at(name);
            std::vector<double> data = old_t.data();
            data.resize(static_cast<size_t>(new_size) * cols, 0.0);
            for (size_t i = static_cast<size_t>(old_size) * cols; i < data.size(); ++i)
                data[i] = row_rng.uniform(-0.08, 0.08);
            params_.resize(name, Tensor({new_size, cols}, std::move(data), old_t.requires_grad()));
        };
        grow_matrix("embed.table", dims_.model_dim);
        grow_matrix("out.weight", dims_.hidden);
        {
            const Tensor& old_b = params_.at("out.bias");
            std::vector<double> data = old_b.data();
            data.resize(static_cast<size_t>(new_size), 0.0);  // new bias entries start at zero
            params_.resize("out.bias", Tensor({new_size}, std::move(data), old_b.requires_grad()));
        }
        validate();
    }

  private:
    ModelDims dims_;
    Glossary glossary_;
    ModelParams params_;
};

}  // namespace mcfvc
