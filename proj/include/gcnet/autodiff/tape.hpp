#pragma once

#include "gcnet/autodiff/rng.hpp"
#include "gcnet/autodiff/tensor.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcnet::ad {

enum class OpKind {
    constant,
    param,
    matmul,
    add,
    hadamard,
    relu,
    sigmoid,
    tanh,
    concat_cols,
    softmax_rows,
    dropout,
    sum,
    scale,
    add_row_bias,
    pad_rows,
    lstm,
    cross_entropy,
    squared_error,
};

std::string_view to_string(OpKind kind);

/// Named trainable tensor with its accumulated gradient.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Ordered collection of uniquely named parameters. References handed out by
/// add()/at() stay valid for the lifetime of the set.
class ParamSet {
public:
    Param& add(std::string name, Tensor value);
    Param& at(std::string_view name);
    const Param& at(std::string_view name) const;
    const Param* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    void zero_grad();
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    friend bool operator==(const ParamSet& a, const ParamSet& b);

private:
    std::deque<Param> params_;
};

class Tape;

/// Handle to a node on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Define-by-run record of executed operations. Nodes are appended in
/// execution order, so every input id is smaller than its consumer's id.
class Tape {
public:
    /// Receives the gradient flowing into the node and pushes contributions
    /// into the node's inputs through accumulate().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf bound to `p`; backward() adds the leaf's gradient into p.grad.
    Var param(Param& p);

    Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

    /// Reverse sweep from a scalar node. Gradients from every use site are summed.
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of node `id`, zero-initialized on first access.
    Tensor& accumulate(std::size_t id);

    bool has_grad(Var v) const { return !nodes_[v.id()].grad.empty(); }
    const Tensor& grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    OpKind kind(std::size_t id) const { return nodes_[id].kind; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

private:
    struct Node {
        OpKind kind;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        Param* param = nullptr;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var hadamard(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var scale(Var x, double factor);
/// Scalar sum of all entries.
Var sum(Var x);
/// Columns laid out in argument order; all parts share the row count.
Var concat_cols(std::span<const Var> parts);
Var softmax_rows(Var logits);
/// Inverted dropout. Identity (same node) when !training or p == 0.
Var dropout(Var x, double p, bool training, Rng& rng);
/// x (L x n) plus bias (1 x n) broadcast over rows.
Var add_row_bias(Var x, Var bias);
/// Appends zero rows so the result has `total_rows` rows.
Var pad_rows(Var x, std::size_t total_rows);

/// One LSTM direction over the rows of x. Gate column blocks in w_ih, w_hh and
/// bias are ordered [input, forget, cell, output]. With `reverse` the sequence
/// is consumed from the last row to the first; output row t is always the
/// hidden state produced at input row t.
Var lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse);

/// sum_i w_i * (logsumexp(z_i) - z_i[label_i]); rows with weight 0 are skipped.
Var cross_entropy(Var logits, std::span<const int> labels, std::span<const double> row_weights);

/// sum_i w_i * ||pred_i - target_i||^2 with a constant target.
Var squared_error(Var pred, const Tensor& target, std::span<const double> row_weights);

namespace debug {
/// Mutation-testing hook: negates the upstream gradient handed to every
/// backward rule of `kind` until cleared. Not for production use.
void flip_backward_sign(std::optional<OpKind> kind);
std::optional<OpKind> flipped_backward();
} // namespace debug

} // namespace gcnet::ad
