#pragma once

// Dense double-precision tensors with reverse-mode autodiff. Expression
// graphs are rebuilt on every forward pass; nodes are immutable once built,
// so tensors can be shared read-only across threads while each graph stays
// confined to the thread that built it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mcfvc/errors.hpp"

namespace mcfvc {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
        n *= static_cast<size_t>(d);
    }
    return n;
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;
    bool grad_valid = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls this node's grad into its parents' grad buffers.
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Depth of nested no-grad scopes for the current thread.
inline int& nograd_depth() {
    thread_local int depth = 0;
    return depth;
}

}  // namespace detail

// RAII scope that suppresses graph construction (evaluation / decoding).
class NoGradGuard {
  public:
    NoGradGuard() { ++detail::nograd_depth(); }
    ~NoGradGuard() { --detail::nograd_depth(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::nograd_depth() == 0; }

class Tensor {
  public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        check_finite(data, "tensor construction");
        n_ = std::make_shared<detail::Node>();
        n_->shape = std::move(shape);
        n_->data = std::move(data);
        n_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(Shape shape, double v) {
        size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor({1}, {v}, requires_grad);
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return node().shape; }
    int rank() const { return static_cast<int>(node().shape.size()); }
    size_t size() const { return node().data.size(); }
    const std::vector<double>& data() const { return node().data; }
    bool requires_grad() const { return node().requires_grad; }

    int dim(int axis) const {
        const Shape& s = node().shape;
        if (axis < 0 || axis >= static_cast<int>(s.size()))
            throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
        return s[axis];
    }

    double value() const {
        if (size() != 1) throw ContractError("value() on non-scalar tensor " + shape_str(shape()));
        return node().data[0];
    }

    double at(int i) const { return node().data.at(static_cast<size_t>(i)); }

    double at(int r, int c) const {
        if (rank() != 2) throw ShapeError("at(r,c) on tensor of rank " + std::to_string(rank()));
        return node().data[static_cast<size_t>(r) * dim(1) + c];
    }

    // Reverse pass from a scalar root. Gradients accumulate into every
    // reachable node that requires grad; call zero_grad() on leaves between
    // independent passes.
    void backward() const {
        detail::Node& root = node();
        if (root.data.size() != 1)
            throw ContractError("backward root must be scalar, got " + shape_str(root.shape));
        std::vector<detail::Node*> topo = topo_order(&root);
        root.ensure_grad();
        root.grad[0] += 1.0;
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            detail::Node* node = *it;
            node->grad_valid = true;
            if (!node->backprop) continue;
            for (auto& p : node->parents) p->ensure_grad();
            node->backprop(*node);
        }
    }

    const std::vector<double>& grad() const {
        const detail::Node& nd = node();
        if (!nd.grad_valid)
            throw ContractError("gradient requested before a backward pass reached this tensor");
        return nd.grad;
    }

    // Whether a backward pass has reached this tensor since the last zero_grad.
    bool grad_ready() const { return node().grad_valid; }

    void zero_grad() const {
        detail::Node& nd = node();
        nd.grad.assign(nd.data.size(), 0.0);
        nd.grad_valid = false;
    }

    // Same values, no history, no grad requirement.
    Tensor detach() const {
        return Tensor(node().shape, node().data, false);
    }

    static void check_finite(const std::vector<double>& v, const std::string& where) {
        for (double x : v)
            if (!std::isfinite(x))
                throw TrainingError("non-finite value produced in " + where);
    }

    detail::Node& node() const {
        if (!n_) throw ContractError("use of undefined tensor");
        return *n_;
    }

    std::shared_ptr<detail::Node> handle() const { return n_; }

    // Builds an op result. parents/backprop are attached only when some input
    // requires grad and grad mode is on; otherwise the result is a plain leaf.
    static Tensor make_op(Shape shape, std::vector<double> data,
                          std::vector<Tensor> inputs,
                          std::function<void(detail::Node&)> backprop,
                          const std::string& opname) {
        check_finite(data, opname);
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        bool needs = false;
        if (grad_enabled())
            for (const Tensor& t : inputs) needs |= t.node().requires_grad;
        if (needs) {
            n->requires_grad = true;
            n->parents.reserve(inputs.size());
            for (const Tensor& t : inputs) n->parents.push_back(t.handle());
            n->backprop = std::move(backprop);
        }
        Tensor out;
        out.n_ = std::move(n);
        return out;
    }

  private:
    static std::vector<detail::Node*> topo_order(detail::Node* root) {
        std::vector<detail::Node*> order;
        std::unordered_set<detail::Node*> seen;
        // Iterative DFS; recursion would overflow on long recurrent chains.
        std::vector<std::pair<detail::Node*, size_t>> stack;
        stack.emplace_back(root, 0);
        seen.insert(root);
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                detail::Node* p = node->parents[idx++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<detail::Node> n_;
};

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

inline void axpy(std::vector<double>& dst, const std::vector<double>& src, double s = 1.0) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b},
                           [](detail::Node& n) {
                               detail::axpy(n.parents[0]->grad, n.grad);
                               detail::axpy(n.parents[1]->grad, n.grad);
                           },
                           "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b},
                           [](detail::Node& n) {
                               detail::axpy(n.parents[0]->grad, n.grad);
                               detail::axpy(n.parents[1]->grad, n.grad, -1.0);
                           },
                           "sub");
}

// Elementwise product (the ∘ of the dropout and mask equations).
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "hadamard");
    std::vector<double> out(a.size());
    const auto& x = a.data();
    const auto& y = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b},
                           [](detail::Node& n) {
                               auto& pa = *n.parents[0];
                               auto& pb = *n.parents[1];
                               for (size_t i = 0; i < n.grad.size(); ++i) {
                                   pa.grad[i] += n.grad[i] * pb.data[i];
                                   pb.grad[i] += n.grad[i] * pa.data[i];
                               }
                           },
                           "hadamard");
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = s * x[i];
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [s](detail::Node& n) { detail::axpy(n.parents[0]->grad, n.grad, s); },
                           "scale");
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [](detail::Node& n) {
                               auto& p = *n.parents[0];
                               for (size_t i = 0; i < n.grad.size(); ++i)
                                   p.grad[i] += n.grad[i] * n.data[i] * (1.0 - n.data[i]);
                           },
                           "sigmoid");
}

inline Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [](detail::Node& n) {
                               auto& p = *n.parents[0];
                               for (size_t i = 0; i < n.grad.size(); ++i)
                                   p.grad[i] += n.grad[i] * (1.0 - n.data[i] * n.data[i]);
                           },
                           "tanh");
}

// log(x + eps); eps guards degenerate attention rows that contain exact zeros.
inline Tensor log_shifted(const Tensor& a, double eps = 0.0) {
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(x[i] + eps);
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [eps](detail::Node& n) {
                               auto& p = *n.parents[0];
                               for (size_t i = 0; i < n.grad.size(); ++i)
                                   p.grad[i] += n.grad[i] / (p.data[i] + eps);
                           },
                           "log");
}

// ---------------------------------------------------------------------------
// matmul / structural ops

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul requires rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& A = a.data();
    const auto& B = b.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = &A[static_cast<size_t>(i) * k];
        double* orow = &out[static_cast<size_t>(i) * n];
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = &B[static_cast<size_t>(kk) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return Tensor::make_op({m, n}, std::move(out), {a, b},
                           [m, k, n](detail::Node& nd) {
                               auto& pa = *nd.parents[0];
                               auto& pb = *nd.parents[1];
                               // dA = dC B^T
                               for (int i = 0; i < m; ++i) {
                                   const double* grow = &nd.grad[static_cast<size_t>(i) * n];
                                   double* garow = &pa.grad[static_cast<size_t>(i) * k];
                                   for (int kk = 0; kk < k; ++kk) {
                                       const double* brow = &pb.data[static_cast<size_t>(kk) * n];
                                       double acc = 0.0;
                                       for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                       garow[kk] += acc;
                                   }
                               }
                               // dB = A^T dC
                               for (int kk = 0; kk < k; ++kk) {
                                   double* gbrow = &pb.grad[static_cast<size_t>(kk) * n];
                                   for (int i = 0; i < m; ++i) {
                                       const double av = pa.data[static_cast<size_t>(i) * k + kk];
                                       if (av == 0.0) continue;
                                       const double* grow = &nd.grad[static_cast<size_t>(i) * n];
                                       for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                                   }
                               }
                           },
                           "matmul");
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose requires rank 2, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    const auto& x = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = x[static_cast<size_t>(i) * n + j];
    return Tensor::make_op({n, m}, std::move(out), {a},
                           [m, n](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < n; ++j)
                                       p.grad[static_cast<size_t>(i) * n + j] +=
                                           nd.grad[static_cast<size_t>(j) * m + i];
                           },
                           "transpose");
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    return Tensor::make_op(std::move(shape), a.data(), {a},
                           [](detail::Node& nd) { detail::axpy(nd.parents[0]->grad, nd.grad); },
                           "reshape");
}

// Concatenation along an axis (the ⊛ of the feature-fusion equation).
inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.rank() != b.rank())
        throw ShapeError("concat rank mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    if (axis < 0 || axis >= a.rank())
        throw ShapeError("concat axis " + std::to_string(axis) + " out of range");
    for (int d = 0; d < a.rank(); ++d)
        if (d != axis && a.shape()[d] != b.shape()[d])
            throw ShapeError("concat: shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ off axis " + std::to_string(axis));

    Shape out_shape = a.shape();
    out_shape[axis] += b.shape()[axis];
    // Treat the tensor as [outer, axis_len, inner].
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
    for (int d = axis + 1; d < a.rank(); ++d) inner *= a.shape()[d];
    const size_t alen = static_cast<size_t>(a.shape()[axis]) * inner;
    const size_t blen = static_cast<size_t>(b.shape()[axis]) * inner;

    std::vector<double> out(a.size() + b.size());
    for (size_t o = 0; o < outer; ++o) {
        std::copy_n(&a.data()[o * alen], alen, &out[o * (alen + blen)]);
        std::copy_n(&b.data()[o * blen], blen, &out[o * (alen + blen) + alen]);
    }
    return Tensor::make_op(std::move(out_shape), std::move(out), {a, b},
                           [outer, alen, blen](detail::Node& nd) {
                               auto& pa = *nd.parents[0];
                               auto& pb = *nd.parents[1];
                               for (size_t o = 0; o < outer; ++o) {
                                   const double* g = &nd.grad[o * (alen + blen)];
                                   for (size_t i = 0; i < alen; ++i) pa.grad[o * alen + i] += g[i];
                                   for (size_t i = 0; i < blen; ++i) pb.grad[o * blen + i] += g[alen + i];
                               }
                           },
                           "concat");
}

inline Tensor slice(const Tensor& a, int axis, int start, int len) {
    if (axis < 0 || axis >= a.rank())
        throw ShapeError("slice axis " + std::to_string(axis) + " out of range");
    if (start < 0 || len <= 0 || start + len > a.shape()[axis])
        throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of bounds for " + shape_str(a.shape()));
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
    for (int d = axis + 1; d < a.rank(); ++d) inner *= a.shape()[d];
    const size_t src_axis = static_cast<size_t>(a.shape()[axis]);
    std::vector<double> out(outer * len * inner);
    for (size_t o = 0; o < outer; ++o)
        std::copy_n(&a.data()[(o * src_axis + start) * inner], static_cast<size_t>(len) * inner,
                    &out[o * len * inner]);
    return Tensor::make_op(std::move(out_shape), std::move(out), {a},
                           [outer, inner, src_axis, start, len](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (size_t o = 0; o < outer; ++o) {
                                   const double* g = &nd.grad[o * len * inner];
                                   double* dst = &p.grad[(o * src_axis + start) * inner];
                                   for (size_t i = 0; i < static_cast<size_t>(len) * inner; ++i)
                                       dst[i] += g[i];
                               }
                           },
                           "slice");
}

inline Tensor row(const Tensor& a, int r) { return slice(a, 0, r, 1); }

// Row gather for embedding lookup; gradients scatter-add into the table.
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& idx) {
    if (table.rank() != 2) throw ShapeError("gather_rows wants a rank-2 table");
    const int rows = table.dim(0), cols = table.dim(1);
    for (int i : idx)
        if (i < 0 || i >= rows)
            throw ContractError("gather_rows: index " + std::to_string(i) +
                                " outside table with " + std::to_string(rows) + " rows");
    std::vector<double> out(idx.size() * static_cast<size_t>(cols));
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(&table.data()[static_cast<size_t>(idx[r]) * cols], cols,
                    &out[r * static_cast<size_t>(cols)]);
    return Tensor::make_op({static_cast<int>(idx.size()), cols}, std::move(out), {table},
                           [idx, cols](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (size_t r = 0; r < idx.size(); ++r) {
                                   const double* g = &nd.grad[r * static_cast<size_t>(cols)];
                                   double* dst = &p.grad[static_cast<size_t>(idx[r]) * cols];
                                   for (int c = 0; c < cols; ++c) dst[c] += g[c];
                               }
                           },
                           "gather_rows");
}

// out[i,:] = a[i,:] + bias
inline Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
    if (a.rank() != 2 || bias.rank() != 1 || bias.dim(0) != a.dim(1))
        throw ShapeError("add_rowwise: " + shape_str(a.shape()) + " + " + shape_str(bias.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(i) * n + j] = a.data()[static_cast<size_t>(i) * n + j] + bias.data()[j];
    return Tensor::make_op(a.shape(), std::move(out), {a, bias},
                           [m, n](detail::Node& nd) {
                               auto& pa = *nd.parents[0];
                               auto& pb = *nd.parents[1];
                               detail::axpy(pa.grad, nd.grad);
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < n; ++j)
                                       pb.grad[j] += nd.grad[static_cast<size_t>(i) * n + j];
                           },
                           "add_rowwise");
}

// Entry selection: out[k] = a[rows[k], cols[k]].
inline Tensor select_entries(const Tensor& a, const std::vector<std::pair<int, int>>& rc) {
    if (a.rank() != 2) throw ShapeError("select_entries wants rank 2");
    const int n = a.dim(1);
    std::vector<double> out(rc.size());
    for (size_t k = 0; k < rc.size(); ++k) {
        auto [r, c] = rc[k];
        if (r < 0 || r >= a.dim(0) || c < 0 || c >= n)
            throw ContractError("select_entries: (" + std::to_string(r) + "," + std::to_string(c) +
                                ") outside " + shape_str(a.shape()));
        out[k] = a.data()[static_cast<size_t>(r) * n + c];
    }
    return Tensor::make_op({static_cast<int>(rc.size())}, std::move(out), {a},
                           [rc, n](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (size_t k = 0; k < rc.size(); ++k)
                                   p.grad[static_cast<size_t>(rc[k].first) * n + rc[k].second] +=
                                       nd.grad[k];
                           },
                           "select_entries");
}

// ---------------------------------------------------------------------------
// reductions

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return Tensor::make_op({1}, {s}, {a},
                           [](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (double& g : p.grad) g += nd.grad[0];
                           },
                           "sum");
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

// Mean along one axis of a rank-2 tensor. axis=0 collapses rows (giving the
// per-column mean vector), axis=1 collapses columns.
inline Tensor mean_axis(const Tensor& a, int axis) {
    if (a.rank() != 2) throw ShapeError("mean_axis wants rank 2, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    if (axis == 0) {
        std::vector<double> out(n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[j] += a.data()[static_cast<size_t>(i) * n + j];
        for (double& v : out) v /= m;
        return Tensor::make_op({n}, std::move(out), {a},
                               [m, n](detail::Node& nd) {
                                   auto& p = *nd.parents[0];
                                   for (int i = 0; i < m; ++i)
                                       for (int j = 0; j < n; ++j)
                                           p.grad[static_cast<size_t>(i) * n + j] += nd.grad[j] / m;
                               },
                               "mean_axis");
    }
    if (axis == 1) {
        std::vector<double> out(m, 0.0);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) out[i] += a.data()[static_cast<size_t>(i) * n + j];
            out[i] /= n;
        }
        return Tensor::make_op({m}, std::move(out), {a},
                               [m, n](detail::Node& nd) {
                                   auto& p = *nd.parents[0];
                                   for (int i = 0; i < m; ++i)
                                       for (int j = 0; j < n; ++j)
                                           p.grad[static_cast<size_t>(i) * n + j] += nd.grad[i] / n;
                               },
                               "mean_axis");
    }
    throw ShapeError("mean_axis: axis must be 0 or 1");
}

inline Tensor mse(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mse");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(a.size());
    return Tensor::make_op({1}, {s * inv_n}, {a, b},
                           [inv_n](detail::Node& nd) {
                               auto& pa = *nd.parents[0];
                               auto& pb = *nd.parents[1];
                               const double g = nd.grad[0];
                               for (size_t i = 0; i < pa.data.size(); ++i) {
                                   double d = 2.0 * inv_n * (pa.data[i] - pb.data[i]) * g;
                                   pa.grad[i] += d;
                                   pb.grad[i] -= d;
                               }
                           },
                           "mse");
}

// ---------------------------------------------------------------------------
// softmax family

namespace detail {

// Normalizes slices along `axis`; f(row_in, row_out, len) does the per-slice work.
template <typename F>
void for_each_slice(const Shape& shape, int axis, F&& f) {
    int rank = static_cast<int>(shape.size());
    if (axis < 0 || axis >= rank)
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= shape[d];
    const size_t len = static_cast<size_t>(shape[axis]);
    for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) f(o * len * inner + in, inner, len);
}

}  // namespace detail

inline Tensor softmax(const Tensor& a, int axis, double temperature = 1.0) {
    if (temperature <= 0.0)
        throw DomainError("softmax temperature must be positive, got " + std::to_string(temperature));
    std::vector<double> out(a.size());
    const auto& x = a.data();
    detail::for_each_slice(a.shape(), axis, [&](size_t base, size_t stride, size_t len) {
        double mx = -1e300;
        for (size_t i = 0; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
        double z = 0.0;
        for (size_t i = 0; i < len; ++i) {
            double e = std::exp((x[base + i * stride] - mx) / temperature);
            out[base + i * stride] = e;
            z += e;
        }
        for (size_t i = 0; i < len; ++i) out[base + i * stride] /= z;
    });
    Shape shape = a.shape();
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [shape, axis, temperature](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               detail::for_each_slice(shape, axis, [&](size_t base, size_t stride, size_t len) {
                                   double dot = 0.0;
                                   for (size_t i = 0; i < len; ++i)
                                       dot += nd.grad[base + i * stride] * nd.data[base + i * stride];
                                   for (size_t i = 0; i < len; ++i) {
                                       size_t k = base + i * stride;
                                       p.grad[k] += nd.data[k] * (nd.grad[k] - dot) / temperature;
                                   }
                               });
                           },
                           "softmax");
}

inline Tensor log_softmax(const Tensor& a, int axis) {
    std::vector<double> out(a.size());
    const auto& x = a.data();
    detail::for_each_slice(a.shape(), axis, [&](size_t base, size_t stride, size_t len) {
        double mx = -1e300;
        for (size_t i = 0; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
        double z = 0.0;
        for (size_t i = 0; i < len; ++i) z += std::exp(x[base + i * stride] - mx);
        const double lz = mx + std::log(z);
        for (size_t i = 0; i < len; ++i) out[base + i * stride] = x[base + i * stride] - lz;
    });
    Shape shape = a.shape();
    return Tensor::make_op(a.shape(), std::move(out), {a},
                           [shape, axis](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               detail::for_each_slice(shape, axis, [&](size_t base, size_t stride, size_t len) {
                                   double gsum = 0.0;
                                   for (size_t i = 0; i < len; ++i) gsum += nd.grad[base + i * stride];
                                   for (size_t i = 0; i < len; ++i) {
                                       size_t k = base + i * stride;
                                       p.grad[k] += nd.grad[k] - std::exp(nd.data[k]) * gsum;
                                   }
                               });
                           },
                           "log_softmax");
}

// logsumexp of each row of a rank-2 tensor -> [m].
inline Tensor logsumexp_rows(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("logsumexp_rows wants rank 2");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i) {
        const double* r = &a.data()[static_cast<size_t>(i) * n];
        double mx = *std::max_element(r, r + n);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(r[j] - mx);
        out[i] = mx + std::log(z);
    }
    return Tensor::make_op({m}, std::move(out), {a},
                           [m, n](detail::Node& nd) {
                               auto& p = *nd.parents[0];
                               for (int i = 0; i < m; ++i) {
                                   const double* r = &p.data[static_cast<size_t>(i) * n];
                                   for (int j = 0; j < n; ++j)
                                       p.grad[static_cast<size_t>(i) * n + j] +=
                                           nd.grad[i] * std::exp(r[j] - nd.data[i]);
                               }
                           },
                           "logsumexp_rows");
}

// Hard one-hot along an axis; ties break toward the lowest index. Piecewise
// constant, so no gradient flows (pair with a soft path for straight-through).
inline Tensor argmax_onehot(const Tensor& a, int axis) {
    std::vector<double> out(a.size(), 0.0);
    const auto& x = a.data();
    detail::for_each_slice(a.shape(), axis, [&](size_t base, size_t stride, size_t len) {
        if (len == 0) throw DomainError("argmax_onehot over empty axis");
        size_t best = 0;
        for (size_t i = 1; i < len; ++i)
            if (x[base + i * stride] > x[base + best * stride]) best = i;
        out[base + best * stride] = 1.0;
    });
    Tensor result(a.shape(), std::move(out), false);
    return result;
}

// ---------------------------------------------------------------------------
// cosine similarity

// Pairwise cosine of the rows of A [n×d] and B [m×d] -> [n×m].
inline Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("cosine_similarity_matrix: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const int n = a.dim(0), m = b.dim(0), d = a.dim(1);
    auto norms = [d](const std::vector<double>& v, int rows, const char* side) {
        std::vector<double> out(rows);
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) {
                double x = v[static_cast<size_t>(i) * d + j];
                s += x * x;
            }
            if (s == 0.0)
                throw DomainError(std::string("cosine_similarity_matrix: zero-norm row ") +
                                  std::to_string(i) + " in " + side + " operand");
            out[i] = std::sqrt(s);
        }
        return out;
    };
    std::vector<double> na = norms(a.data(), n, "left");
    std::vector<double> nb = norms(b.data(), m, "right");
    std::vector<double> out(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double dot = 0.0;
            for (int k = 0; k < d; ++k)
                dot += a.data()[static_cast<size_t>(i) * d + k] * b.data()[static_cast<size_t>(j) * d + k];
            out[static_cast<size_t>(i) * m + j] = dot / (na[i] * nb[j]);
        }
    return Tensor::make_op(
        {n, m}, std::move(out), {a, b},
        [n, m, d, na, nb](detail::Node& nd) {
            auto& pa = *nd.parents[0];
            auto& pb = *nd.parents[1];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    const double g = nd.grad[static_cast<size_t>(i) * m + j];
                    if (g == 0.0) continue;
                    const double c = nd.data[static_cast<size_t>(i) * m + j];
                    for (int k = 0; k < d; ++k) {
                        const double av = pa.data[static_cast<size_t>(i) * d + k];
                        const double bv = pb.data[static_cast<size_t>(j) * d + k];
                        pa.grad[static_cast<size_t>(i) * d + k] +=
                            g * (bv / (na[i] * nb[j]) - c * av / (na[i] * na[i]));
                        pb.grad[static_cast<size_t>(j) * d + k] +=
                            g * (av / (na[i] * nb[j]) - c * bv / (nb[j] * nb[j]));
                    }
                }
        },
        "cosine_similarity_matrix");
}

}  // namespace mcfvc
