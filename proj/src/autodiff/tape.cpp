#include "gcnet/autodiff/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace gcnet::ad {

namespace {

std::atomic<int> g_flipped{-1};

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
}

void require_matrix(std::string_view op, const Tensor& a) {
    if (a.rank() != 2)
        throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_to_string(a.shape()));
}

void add_into(Tensor& dst, const Tensor& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// dst += a^T * b  (a: m x k, b: m x n, dst: k x n)
void add_at_b(Tensor& dst, const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            double* drow = &dst(p, 0);
            const double* brow = b.row(i).data();
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * brow[j];
        }
    }
}

// dst += a * b^T  (a: m x n, b: k x n, dst: m x k)
void add_a_bt(Tensor& dst, const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.row(p).data();
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            dst(i, p) += acc;
        }
    }
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Var unary(OpKind kind, Var x, double (*f)(double), double (*dfdx)(double)) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    const std::size_t xid = x.id();
    return x.tape().record(kind, {xid}, std::move(out), [xid, dfdx](Tape& t, const Tensor& g) {
        if (!t.requires_grad(xid)) return;
        const Tensor& xin = t.value(xid);
        Tensor& gx = t.accumulate(xid);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xin[i]);
    });
}

} // namespace

std::string_view to_string(OpKind kind) {
    switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::param: return "param";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::hadamard: return "hadamard";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::dropout: return "dropout";
    case OpKind::sum: return "sum";
    case OpKind::scale: return "scale";
    case OpKind::add_row_bias: return "add_row_bias";
    case OpKind::pad_rows: return "pad_rows";
    case OpKind::lstm: return "lstm";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::squared_error: return "squared_error";
    }
    return "unknown";
}

// --- ParamSet ---------------------------------------------------------------

Param& ParamSet::add(std::string name, Tensor value) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    Tensor grad(value.shape());
    params_.push_back(Param{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
}

const Param* ParamSet::find(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

Param& ParamSet::at(std::string_view name) {
    return const_cast<Param&>(static_cast<const ParamSet&>(*this).at(name));
}

const Param& ParamSet::at(std::string_view name) const {
    const Param* p = find(name);
    if (!p) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return *p;
}

void ParamSet::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
        if (a.params_[i].name != b.params_[i].name || a.params_[i].value != b.params_[i].value) return false;
    return true;
}

// --- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NonFiniteError("constant contains NaN/Inf");
    nodes_.push_back(Node{OpKind::constant, {}, std::move(value), {}, {}, nullptr, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(Param& p) {
    if (!p.value.all_finite()) throw NonFiniteError("parameter '" + p.name + "' contains NaN/Inf");
    if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.shape());
    nodes_.push_back(Node{OpKind::param, {}, p.value, {}, {}, &p, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
    if (!value.all_finite())
        throw NonFiniteError(std::string(to_string(kind)) + " produced NaN/Inf (shape " +
                             shape_to_string(value.shape()) + ")");
    bool needs = false;
    for (auto id : inputs) {
        if (id >= nodes_.size()) throw std::logic_error("tape input id out of range");
        needs = needs || nodes_[id].requires_grad;
    }
    nodes_.push_back(Node{kind, std::move(inputs), std::move(value), {}, std::move(backward), nullptr, needs});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::accumulate(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.empty()) throw std::logic_error("node " + std::to_string(v.id()) + " has no gradient");
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.id() >= nodes_.size()) throw std::logic_error("loss node is not on this tape");
    if (!value(loss.id()).is_scalar())
        throw DimensionError("backward: loss must be scalar, got " + shape_to_string(value(loss.id()).shape()));
    for (auto& n : nodes_) n.grad = Tensor();
    accumulate(loss.id()).fill(1.0);

    const int flipped = g_flipped.load();
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
        Node& n = nodes_[k];
        if (n.grad.empty() || !n.requires_grad) continue;
        if (n.param) {
            add_into(n.param->grad, n.grad);
            continue;
        }
        if (!n.backward) continue;
        if (static_cast<int>(n.kind) == flipped) {
            Tensor negated = n.grad;
            for (auto& v : negated.data()) v = -v;
            n.backward(*this, negated);
        } else {
            n.backward(*this, n.grad);
        }
    }
}

// --- operations -------------------------------------------------------------

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = matmul_plain(av, bv);
    const std::size_t aid = a.id(), bid = b.id();
    return a.tape().record(OpKind::matmul, {aid, bid}, std::move(out), [aid, bid](Tape& t, const Tensor& g) {
        if (t.requires_grad(aid)) add_a_bt(t.accumulate(aid), g, t.value(bid));
        if (t.requires_grad(bid)) add_at_b(t.accumulate(bid), t.value(aid), g);
    });
}

Var add(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape("add", av, bv);
    Tensor out = av;
    add_into(out, bv);
    const std::size_t aid = a.id(), bid = b.id();
    return a.tape().record(OpKind::add, {aid, bid}, std::move(out), [aid, bid](Tape& t, const Tensor& g) {
        if (t.requires_grad(aid)) add_into(t.accumulate(aid), g);
        if (t.requires_grad(bid)) add_into(t.accumulate(bid), g);
    });
}

Var hadamard(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape("hadamard", av, bv);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    const std::size_t aid = a.id(), bid = b.id();
    return a.tape().record(OpKind::hadamard, {aid, bid}, std::move(out), [aid, bid](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(aid);
        const Tensor& y = t.value(bid);
        if (t.requires_grad(aid)) {
            Tensor& ga = t.accumulate(aid);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (t.requires_grad(bid)) {
            Tensor& gb = t.accumulate(bid);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
        }
    });
}

Var relu(Var x) {
    return unary(
        OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double in) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
    return unary(OpKind::sigmoid, x, sigmoid_scalar, [](double in) {
        const double s = sigmoid_scalar(in);
        return s * (1.0 - s);
    });
}

Var tanh(Var x) {
    return unary(
        OpKind::tanh, x, [](double v) { return std::tanh(v); },
        [](double in) {
            const double y = std::tanh(in);
            return 1.0 - y * y;
        });
}

Var scale(Var x, double factor) {
    Tensor out = x.value();
    for (auto& v : out.data()) v *= factor;
    const std::size_t xid = x.id();
    return x.tape().record(OpKind::scale, {xid}, std::move(out), [xid, factor](Tape& t, const Tensor& g) {
        if (!t.requires_grad(xid)) return;
        Tensor& gx = t.accumulate(xid);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const std::size_t xid = x.id();
    return x.tape().record(OpKind::sum, {xid}, Tensor::scalar(s), [xid](Tape& t, const Tensor& g) {
        if (!t.requires_grad(xid)) return;
        const double up = g[0];
        for (auto& v : t.accumulate(xid).data()) v += up;
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    Tape& tape = parts.front().tape();
    const std::size_t rows = parts.front().value().rows();
    std::vector<std::size_t> ids, widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        require_matrix("concat_cols", v);
        if (v.rows() != rows)
            throw DimensionError("concat_cols: first-dimension mismatch " + shape_to_string(parts.front().shape()) +
                                 " vs " + shape_to_string(v.shape()));
        ids.push_back(p.id());
        widths.push_back(v.cols());
        total += v.cols();
    }
    Tensor out = Tensor::matrix(rows, total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
        offset += v.cols();
    }
    auto input_ids = ids;
    return tape.record(OpKind::concat_cols, std::move(input_ids), std::move(out),
                       [ids, widths](Tape& t, const Tensor& g) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < ids.size(); ++k) {
                               if (t.requires_grad(ids[k])) {
                                   Tensor& gk = t.accumulate(ids[k]);
                                   for (std::size_t i = 0; i < g.rows(); ++i)
                                       for (std::size_t j = 0; j < widths[k]; ++j) gk(i, j) += g(i, off + j);
                               }
                               off += widths[k];
                           }
                       });
}

Var softmax_rows(Var logits) {
    const Tensor& z = logits.value();
    require_matrix("softmax_rows", z);
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto zr = z.row(i);
        auto yr = out.row(i);
        const double mx = *std::max_element(zr.begin(), zr.end());
        double s = 0.0;
        for (std::size_t j = 0; j < zr.size(); ++j) s += (yr[j] = std::exp(zr[j] - mx));
        for (auto& v : yr) v /= s;
    }
    Tensor saved = out;
    const std::size_t zid = logits.id();
    return logits.tape().record(OpKind::softmax_rows, {zid}, std::move(out),
                                [zid, y = std::move(saved)](Tape& t, const Tensor& g) {
                                    if (!t.requires_grad(zid)) return;
                                    Tensor& gz = t.accumulate(zid);
                                    for (std::size_t i = 0; i < y.rows(); ++i) {
                                        double dot = 0.0;
                                        for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                                        for (std::size_t j = 0; j < y.cols(); ++j)
                                            gz(i, j) += y(i, j) * (g(i, j) - dot);
                                    }
                                });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const Tensor& xv = x.value();
    Tensor mask(xv.shape());
    const double keep_scale = 1.0 / (1.0 - p);
    for (auto& m : mask.data()) m = rng.uniform() < p ? 0.0 : keep_scale;
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    const std::size_t xid = x.id();
    return x.tape().record(OpKind::dropout, {xid}, std::move(out),
                           [xid, mask = std::move(mask)](Tape& t, const Tensor& g) {
                               if (!t.requires_grad(xid)) return;
                               Tensor& gx = t.accumulate(xid);
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                           });
}

Var add_row_bias(Var x, Var bias) {
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    require_matrix("add_row_bias", xv);
    if (bv.size() != xv.cols())
        throw DimensionError("add_row_bias: bias " + shape_to_string(bv.shape()) + " does not fit " +
                             shape_to_string(xv.shape()));
    Tensor out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv[j];
    const std::size_t xid = x.id(), bid = bias.id();
    return x.tape().record(OpKind::add_row_bias, {xid, bid}, std::move(out), [xid, bid](Tape& t, const Tensor& g) {
        if (t.requires_grad(xid)) add_into(t.accumulate(xid), g);
        if (t.requires_grad(bid)) {
            Tensor& gb = t.accumulate(bid);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
        }
    });
}

Var pad_rows(Var x, std::size_t total_rows) {
    const Tensor& xv = x.value();
    require_matrix("pad_rows", xv);
    if (total_rows < xv.rows())
        throw DimensionError("pad_rows: cannot shrink " + shape_to_string(xv.shape()) + " to " +
                             std::to_string(total_rows) + " rows");
    if (total_rows == xv.rows()) return x;
    Tensor out = Tensor::matrix(total_rows, xv.cols());
    std::copy(xv.data().begin(), xv.data().end(), out.data().begin());
    const std::size_t xid = x.id();
    return x.tape().record(OpKind::pad_rows, {xid}, std::move(out), [xid](Tape& t, const Tensor& g) {
        if (!t.requires_grad(xid)) return;
        Tensor& gx = t.accumulate(xid);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    });
}

Var lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse) {
    const Tensor& xv = x.value();
    const Tensor& wih = w_ih.value();
    const Tensor& whh = w_hh.value();
    const Tensor& bv = bias.value();
    require_matrix("lstm", xv);
    require_matrix("lstm", wih);
    require_matrix("lstm", whh);
    const std::size_t steps = xv.rows();
    const std::size_t hidden = whh.rows();
    if (wih.rows() != xv.cols())
        throw DimensionError("lstm: input width mismatch, x " + shape_to_string(xv.shape()) + " vs w_ih " +
                             shape_to_string(wih.shape()));
    if (wih.cols() != 4 * hidden || whh.cols() != 4 * hidden || bv.size() != 4 * hidden)
        throw DimensionError("lstm: gate shapes inconsistent: w_ih " + shape_to_string(wih.shape()) + ", w_hh " +
                             shape_to_string(whh.shape()) + ", bias " + shape_to_string(bv.shape()));

    const std::size_t g4 = 4 * hidden;
    Tensor pre = matmul_plain(xv, wih); // L x 4H input projections
    Tensor gates = Tensor::matrix(steps, g4);  // post-activation [i f g o]
    Tensor cells = Tensor::matrix(steps, hidden);
    Tensor out = Tensor::matrix(steps, hidden);

    std::vector<double> h_prev(hidden, 0.0), c_prev(hidden, 0.0), a(g4);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        for (std::size_t j = 0; j < g4; ++j) a[j] = pre(t, j) + bv[j];
        for (std::size_t p = 0; p < hidden; ++p) {
            const double hv = h_prev[p];
            if (hv == 0.0) continue;
            const double* wrow = whh.row(p).data();
            for (std::size_t j = 0; j < g4; ++j) a[j] += hv * wrow[j];
        }
        for (std::size_t k = 0; k < hidden; ++k) {
            const double ig = sigmoid_scalar(a[k]);
            const double fg = sigmoid_scalar(a[hidden + k]);
            const double cg = std::tanh(a[2 * hidden + k]);
            const double og = sigmoid_scalar(a[3 * hidden + k]);
            gates(t, k) = ig;
            gates(t, hidden + k) = fg;
            gates(t, 2 * hidden + k) = cg;
            gates(t, 3 * hidden + k) = og;
            const double c = fg * c_prev[k] + ig * cg;
            cells(t, k) = c;
            out(t, k) = og * std::tanh(c);
        }
        for (std::size_t k = 0; k < hidden; ++k) {
            c_prev[k] = cells(t, k);
            h_prev[k] = out(t, k);
        }
    }

    Tensor hs = out;
    const std::size_t xid = x.id(), wid = w_ih.id(), uid = w_hh.id(), bid = bias.id();
    return x.tape().record(
        OpKind::lstm, {xid, wid, uid, bid}, std::move(out),
        [=, gates = std::move(gates), cells = std::move(cells), hs = std::move(hs)](Tape& tp, const Tensor& g) {
            const Tensor& xin = tp.value(xid);
            const Tensor& wih_v = tp.value(wid);
            const Tensor& whh_v = tp.value(uid);
            const bool need_x = tp.requires_grad(xid), need_w = tp.requires_grad(wid);
            const bool need_u = tp.requires_grad(uid), need_b = tp.requires_grad(bid);
            Tensor da_all = Tensor::matrix(steps, g4);
            std::vector<double> dh_next(hidden, 0.0), dc_next(hidden, 0.0);
            for (std::size_t s = steps; s-- > 0;) {
                const std::size_t t = reverse ? steps - 1 - s : s;
                const bool first = (s == 0);
                const std::size_t tp_prev = reverse ? t + 1 : t - 1; // valid only when !first
                for (std::size_t k = 0; k < hidden; ++k) {
                    const double ig = gates(t, k), fg = gates(t, hidden + k);
                    const double cg = gates(t, 2 * hidden + k), og = gates(t, 3 * hidden + k);
                    const double tc = std::tanh(cells(t, k));
                    const double dh = g(t, k) + dh_next[k];
                    const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
                    const double c_before = first ? 0.0 : cells(tp_prev, k);
                    da_all(t, k) = dc * cg * ig * (1.0 - ig);
                    da_all(t, hidden + k) = dc * c_before * fg * (1.0 - fg);
                    da_all(t, 2 * hidden + k) = dc * ig * (1.0 - cg * cg);
                    da_all(t, 3 * hidden + k) = dh * tc * og * (1.0 - og);
                    dc_next[k] = dc * fg;
                }
                // dh_prev = da_t * W_hh^T
                for (std::size_t p = 0; p < hidden; ++p) {
                    const double* wrow = whh_v.row(p).data();
                    double acc = 0.0;
                    for (std::size_t j = 0; j < g4; ++j) acc += da_all(t, j) * wrow[j];
                    dh_next[p] = acc;
                }
                if (need_u && !first) {
                    Tensor& gu = tp.accumulate(uid);
                    for (std::size_t p = 0; p < hidden; ++p) {
                        const double hv = hs(tp_prev, p);
                        if (hv == 0.0) continue;
                        for (std::size_t j = 0; j < g4; ++j) gu(p, j) += hv * da_all(t, j);
                    }
                }
            }
            if (need_w) add_at_b(tp.accumulate(wid), xin, da_all);
            if (need_x) add_a_bt(tp.accumulate(xid), da_all, wih_v);
            if (need_b) {
                Tensor& gb = tp.accumulate(bid);
                for (std::size_t t = 0; t < steps; ++t)
                    for (std::size_t j = 0; j < g4; ++j) gb[j] += da_all(t, j);
            }
        });
}

Var cross_entropy(Var logits, std::span<const int> labels, std::span<const double> row_weights) {
    const Tensor& z = logits.value();
    require_matrix("cross_entropy", z);
    const std::size_t rows = z.rows(), classes = z.cols();
    if (labels.size() != rows || row_weights.size() != rows)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels / " +
                             std::to_string(row_weights.size()) + " weights for logits " + shape_to_string(z.shape()));
    Tensor probs(z.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        auto zr = z.row(i);
        const double mx = *std::max_element(zr.begin(), zr.end());
        double s = 0.0;
        for (std::size_t j = 0; j < classes; ++j) s += (probs(i, j) = std::exp(zr[j] - mx));
        for (std::size_t j = 0; j < classes; ++j) probs(i, j) /= s;
        if (row_weights[i] == 0.0) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                                    std::to_string(classes) + ") at row " + std::to_string(i));
        total += row_weights[i] * (mx + std::log(s) - zr[static_cast<std::size_t>(labels[i])]);
    }
    std::vector<int> lab(labels.begin(), labels.end());
    std::vector<double> w(row_weights.begin(), row_weights.end());
    const std::size_t zid = logits.id();
    return logits.tape().record(
        OpKind::cross_entropy, {zid}, Tensor::scalar(total),
        [zid, probs = std::move(probs), lab = std::move(lab), w = std::move(w)](Tape& t, const Tensor& g) {
            if (!t.requires_grad(zid)) return;
            Tensor& gz = t.accumulate(zid);
            const double up = g[0];
            for (std::size_t i = 0; i < probs.rows(); ++i) {
                if (w[i] == 0.0) continue;
                for (std::size_t j = 0; j < probs.cols(); ++j) {
                    const double onehot = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                    gz(i, j) += up * w[i] * (probs(i, j) - onehot);
                }
            }
        });
}

Var squared_error(Var pred, const Tensor& target, std::span<const double> row_weights) {
    const Tensor& p = pred.value();
    require_matrix("squared_error", p);
    require_same_shape("squared_error", p, target);
    if (row_weights.size() != p.rows())
        throw DimensionError("squared_error: " + std::to_string(row_weights.size()) + " weights for " +
                             shape_to_string(p.shape()));
    double total = 0.0;
    Tensor diff(p.shape());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        if (row_weights[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            const double d = p(i, j) - target(i, j);
            diff(i, j) = d;
            row += d * d;
        }
        total += row_weights[i] * row;
    }
    std::vector<double> w(row_weights.begin(), row_weights.end());
    const std::size_t pid = pred.id();
    return pred.tape().record(OpKind::squared_error, {pid}, Tensor::scalar(total),
                              [pid, diff = std::move(diff), w = std::move(w)](Tape& t, const Tensor& g) {
                                  if (!t.requires_grad(pid)) return;
                                  Tensor& gp = t.accumulate(pid);
                                  const double up = g[0];
                                  for (std::size_t i = 0; i < diff.rows(); ++i) {
                                      if (w[i] == 0.0) continue;
                                      for (std::size_t j = 0; j < diff.cols(); ++j)
                                          gp(i, j) += up * 2.0 * w[i] * diff(i, j);
                                  }
                              });
}

namespace debug {

void flip_backward_sign(std::optional<OpKind> kind) { g_flipped.store(kind ? static_cast<int>(*kind) : -1); }

std::optional<OpKind> flipped_backward() {
    const int v = g_flipped.load();
    if (v < 0) return std::nullopt;
    return static_cast<OpKind>(v);
}

} // namespace debug

} // namespace gcnet::ad
