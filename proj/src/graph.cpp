#include "atlab/graph.hpp"

#include <algorithm>
#include <cmath>

namespace atlab {

// ---------------------------------------------------------------- kernels

Tensor matmul_value(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out.data[i * n + j] += av * b.data[p * n + j];
            }
        }
    }
    return out;
}

Tensor log_softmax_value(const Tensor& logits) {
    require_rank2(logits, "log_softmax");
    const std::size_t m = logits.rows(), c = logits.cols();
    Tensor out = Tensor::zeros({m, c});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = logits.data[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.data[i * c + j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits.data[i * c + j] - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = logits.data[i * c + j] - lse;
    }
    return out;
}

Tensor softmax_value(const Tensor& logits) {
    require_rank2(logits, "softmax");
    if (logits.cols() < 2) {
        throw ShapeError("softmax: needs at least 2 classes, got shape " + shape_str(logits.shape));
    }
    Tensor lsm = log_softmax_value(logits);
    for (double& x : lsm.data) x = std::exp(x);
    return lsm;
}

Tensor l2_normalize_value(const Tensor& v) {
    require_rank2(v, "l2_normalize");
    const std::size_t m = v.rows(), c = v.cols();
    Tensor out = Tensor::zeros({m, c});
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < c; ++j) sq += v.data[i * c + j] * v.data[i * c + j];
        const double norm = std::sqrt(sq);
        if (!(norm >= kLogitNormEps)) {
            throw DegenerateLogitsError("l2_normalize: row " + std::to_string(i) +
                                        " has norm below threshold");
        }
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = v.data[i * c + j] / norm;
    }
    return out;
}

namespace {

void check_labels(const Tensor& logits, const std::vector<int>& labels, const char* who) {
    if (labels.size() != logits.rows()) {
        throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
    }
    const int c = static_cast<int>(logits.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= c) {
            throw IndexError(std::string(who) + ": label " + std::to_string(labels[i]) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
        }
    }
}

}  // namespace

double cross_entropy_value(const Tensor& logits, const std::vector<int>& labels) {
    check_labels(logits, labels, "cross_entropy");
    const Tensor lsm = log_softmax_value(logits);
    const std::size_t m = logits.rows(), c = logits.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += -lsm.data[i * c + static_cast<std::size_t>(labels[i])];
    return total / static_cast<double>(m);
}

double kl_divergence_value(const Tensor& p_logits, const Tensor& q_logits) {
    require_same_shape(p_logits, q_logits, "kl_divergence");
    const Tensor lp = log_softmax_value(p_logits);
    const Tensor lq = log_softmax_value(q_logits);
    const std::size_t m = p_logits.rows(), c = p_logits.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(lp.data[i * c + j]);
            if (p > 0.0) total += p * (lp.data[i * c + j] - lq.data[i * c + j]);
        }
    }
    return total / static_cast<double>(m);
}

// ------------------------------------------------------------------ graph

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::checked(Var v, const char* who) const {
    if (v.graph != this || v.index < 0 || v.index >= static_cast<int>(nodes_.size())) {
        throw ContractError(std::string(who) + ": Var does not belong to this graph");
    }
    return nodes_[static_cast<std::size_t>(v.index)];
}

Var Graph::leaf(Tensor value) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    return Var{this, push(std::move(n))};
}

Var Graph::matmul(Var a, Var b) {
    const Node& na = checked(a, "matmul");
    const Node& nb = checked(b, "matmul");
    Node n;
    n.op = Op::kMatMul;
    n.a = a.index;
    n.b = b.index;
    n.value = matmul_value(na.value, nb.value);
    return Var{this, push(std::move(n))};
}

Var Graph::add(Var a, Var b) {
    const Node& na = checked(a, "add");
    const Node& nb = checked(b, "add");
    require_same_shape(na.value, nb.value, "add");
    Node n;
    n.op = Op::kAdd;
    n.a = a.index;
    n.b = b.index;
    n.value = na.value;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += nb.value.data[i];
    return Var{this, push(std::move(n))};
}

Var Graph::sub(Var a, Var b) {
    const Node& na = checked(a, "sub");
    const Node& nb = checked(b, "sub");
    require_same_shape(na.value, nb.value, "sub");
    Node n;
    n.op = Op::kSub;
    n.a = a.index;
    n.b = b.index;
    n.value = na.value;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= nb.value.data[i];
    return Var{this, push(std::move(n))};
}

Var Graph::mul(Var a, Var b) {
    const Node& na = checked(a, "mul");
    const Node& nb = checked(b, "mul");
    require_same_shape(na.value, nb.value, "mul");
    Node n;
    n.op = Op::kMul;
    n.a = a.index;
    n.b = b.index;
    n.value = na.value;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= nb.value.data[i];
    return Var{this, push(std::move(n))};
}

Var Graph::add_row(Var a, Var bias) {
    const Node& na = checked(a, "add_row");
    const Node& nb = checked(bias, "add_row");
    require_rank2(na.value, "add_row");
    if (nb.value.rank() != 1 || nb.value.shape[0] != na.value.cols()) {
        throw ShapeError("add_row: bias shape " + shape_str(nb.value.shape) + " does not match " +
                         shape_str(na.value.shape));
    }
    Node n;
    n.op = Op::kAddRow;
    n.a = a.index;
    n.b = bias.index;
    n.value = na.value;
    const std::size_t m = na.value.rows(), c = na.value.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) n.value.data[i * c + j] += nb.value.data[j];
    }
    return Var{this, push(std::move(n))};
}

Var Graph::relu(Var a) {
    const Node& na = checked(a, "relu");
    Node n;
    n.op = Op::kRelu;
    n.a = a.index;
    n.value = na.value;
    for (double& x : n.value.data) x = x > 0.0 ? x : 0.0;
    return Var{this, push(std::move(n))};
}

Var Graph::softmax(Var logits) {
    const Node& nl = checked(logits, "softmax");
    Node n;
    n.op = Op::kSoftmax;
    n.a = logits.index;
    n.value = softmax_value(nl.value);
    return Var{this, push(std::move(n))};
}

Var Graph::l2_normalize(Var a) {
    const Node& na = checked(a, "l2_normalize");
    Node n;
    n.op = Op::kL2Normalize;
    n.a = a.index;
    n.value = l2_normalize_value(na.value);
    // cache row norms for the backward pass
    const std::size_t m = na.value.rows(), c = na.value.cols();
    n.aux = Tensor::zeros({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < c; ++j) sq += na.value.data[i * c + j] * na.value.data[i * c + j];
        n.aux.data[i] = std::sqrt(sq);
    }
    return Var{this, push(std::move(n))};
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& labels) {
    const Node& nl = checked(logits, "cross_entropy");
    check_labels(nl.value, labels, "cross_entropy");
    Node n;
    n.op = Op::kCrossEntropy;
    n.a = logits.index;
    n.labels = labels;
    n.aux = log_softmax_value(nl.value);  // backward turns this into probabilities
    const std::size_t m = nl.value.rows(), c = nl.value.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += -n.aux.data[i * c + static_cast<std::size_t>(labels[i])];
    n.value = Tensor::scalar(total / static_cast<double>(m));
    return Var{this, push(std::move(n))};
}

Var Graph::kl_divergence(Var p_logits, Var q_logits) {
    const Node& np = checked(p_logits, "kl_divergence");
    const Node& nq = checked(q_logits, "kl_divergence");
    require_same_shape(np.value, nq.value, "kl_divergence");
    Node n;
    n.op = Op::kKlDivergence;
    n.a = p_logits.index;
    n.b = q_logits.index;
    n.aux = log_softmax_value(np.value);
    n.aux2 = log_softmax_value(nq.value);
    const std::size_t m = np.value.rows(), c = np.value.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(n.aux.data[i * c + j]);
            if (p > 0.0) total += p * (n.aux.data[i * c + j] - n.aux2.data[i * c + j]);
        }
    }
    n.value = Tensor::scalar(total / static_cast<double>(m));
    return Var{this, push(std::move(n))};
}

Var Graph::cw_margin(Var logits, const std::vector<int>& labels, double kappa) {
    const Node& nl = checked(logits, "cw_margin");
    check_labels(nl.value, labels, "cw_margin");
    if (nl.value.cols() < 2) {
        throw ShapeError("cw_margin: needs at least 2 classes, got shape " + shape_str(nl.value.shape));
    }
    Node n;
    n.op = Op::kCwMargin;
    n.a = logits.index;
    n.labels = labels;
    n.alpha = kappa;
    const std::size_t m = nl.value.rows(), c = nl.value.cols();
    // aux row i: [best_other_index, active?]. Ascending this objective pushes
    // the runner-up logit above the true one until the margin reaches kappa,
    // where the clamp stops the push (the CW success-confidence semantics).
    n.aux = Tensor::zeros({m, 2});
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        std::size_t best = y == 0 ? 1 : 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j == y) continue;
            if (nl.value.data[i * c + j] > nl.value.data[i * c + best]) best = j;
        }
        const double margin = nl.value.data[i * c + best] - nl.value.data[i * c + y];
        n.aux.data[i * 2] = static_cast<double>(best);
        n.aux.data[i * 2 + 1] = margin < kappa ? 1.0 : 0.0;
        total += std::min(margin, kappa);
    }
    n.value = Tensor::scalar(total / static_cast<double>(m));
    return Var{this, push(std::move(n))};
}

Var Graph::scale(Var a, double alpha) {
    const Node& na = checked(a, "scale");
    Node n;
    n.op = Op::kScale;
    n.a = a.index;
    n.alpha = alpha;
    n.value = na.value;
    for (double& x : n.value.data) x *= alpha;
    return Var{this, push(std::move(n))};
}

Var Graph::mul_const(Var a, Tensor constant) {
    const Node& na = checked(a, "mul_const");
    require_same_shape(na.value, constant, "mul_const");
    Node n;
    n.op = Op::kMulConst;
    n.a = a.index;
    n.value = na.value;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= constant.data[i];
    n.aux = std::move(constant);
    return Var{this, push(std::move(n))};
}

Var Graph::sum_all(Var a) {
    const Node& na = checked(a, "sum_all");
    Node n;
    n.op = Op::kSum;
    n.a = a.index;
    double total = 0.0;
    for (double x : na.value.data) total += x;
    n.value = Tensor::scalar(total);
    return Var{this, push(std::move(n))};
}

Var Graph::row_sum(Var a) {
    const Node& na = checked(a, "row_sum");
    require_rank2(na.value, "row_sum");
    const std::size_t m = na.value.rows(), c = na.value.cols();
    Node n;
    n.op = Op::kRowSum;
    n.a = a.index;
    n.value = Tensor::zeros({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += na.value.data[i * c + j];
        n.value.data[i] = total;
    }
    return Var{this, push(std::move(n))};
}

const Tensor& Graph::value(Var v) const { return checked(v, "value").value; }

Tensor Graph::grad(Var v) const {
    const Node& n = checked(v, "grad");
    if (!backward_done_) throw ContractError("grad: backward has not run on this graph");
    if (!n.has_grad) return Tensor::zeros(n.value.shape);
    return n.grad;
}

void Graph::accumulate(int idx, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
        return;
    }
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += g.data[i];
}

void Graph::backward(Var root) {
    (void)checked(root, "backward");
    if (backward_done_) {
        throw ContractError("backward: graph already traversed (single-use contract)");
    }
    Node& r = nodes_[static_cast<std::size_t>(root.index)];
    if (r.value.size() != 1) {
        throw ContractError("backward: root must be scalar, got shape " + shape_str(r.value.shape));
    }
    backward_done_ = true;
    r.grad = Tensor(r.value.shape, {1.0});
    r.has_grad = true;
    for (int i = root.index; i >= 0; --i) {
        if (nodes_[static_cast<std::size_t>(i)].has_grad) backward_node(i);
    }
}

void Graph::backward_node(int idx) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kMatMul: {
            const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& b = nodes_[static_cast<std::size_t>(n.b)].value;
            const std::size_t m = a.rows(), k = a.cols(), c = b.cols();
            Tensor ga = Tensor::zeros(a.shape);  // g @ b^T
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double gv = g.data[i * c + j];
                    if (gv == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) ga.data[i * k + p] += gv * b.data[p * c + j];
                }
            }
            Tensor gb = Tensor::zeros(b.shape);  // a^T @ g
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = a.data[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < c; ++j) gb.data[p * c + j] += av * g.data[i * c + j];
                }
            }
            accumulate(n.a, ga);
            accumulate(n.b, gb);
            break;
        }
        case Op::kAdd:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case Op::kSub: {
            accumulate(n.a, g);
            Tensor gb = g;
            for (double& x : gb.data) x = -x;
            accumulate(n.b, gb);
            break;
        }
        case Op::kMul: {
            const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& b = nodes_[static_cast<std::size_t>(n.b)].value;
            Tensor ga = g, gb = g;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] *= b.data[i];
                gb.data[i] *= a.data[i];
            }
            accumulate(n.a, ga);
            accumulate(n.b, gb);
            break;
        }
        case Op::kAddRow: {
            accumulate(n.a, g);
            const Tensor& bias = nodes_[static_cast<std::size_t>(n.b)].value;
            Tensor gb = Tensor::zeros(bias.shape);
            const std::size_t m = g.rows(), c = g.cols();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) gb.data[j] += g.data[i * c + j];
            }
            accumulate(n.b, gb);
            break;
        }
        case Op::kRelu: {
            const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) {
                if (!(a.data[i] > 0.0)) ga.data[i] = 0.0;
            }
            accumulate(n.a, ga);
            break;
        }
        case Op::kSoftmax: {
            // dz = p * (g - sum_j g_j p_j) per row
            const Tensor& p = n.value;
            const std::size_t m = p.rows(), c = p.cols();
            Tensor ga = Tensor::zeros(p.shape);
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g.data[i * c + j] * p.data[i * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    ga.data[i * c + j] = p.data[i * c + j] * (g.data[i * c + j] - dot);
                }
            }
            accumulate(n.a, ga);
            break;
        }
        case Op::kL2Normalize: {
            // dv = (g - y * (g . y)) / ||v|| per row
            const Tensor& y = n.value;
            const std::size_t m = y.rows(), c = y.cols();
            Tensor ga = Tensor::zeros(y.shape);
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g.data[i * c + j] * y.data[i * c + j];
                const double inv = 1.0 / n.aux.data[i];
                for (std::size_t j = 0; j < c; ++j) {
                    ga.data[i * c + j] = (g.data[i * c + j] - y.data[i * c + j] * dot) * inv;
                }
            }
            accumulate(n.a, ga);
            break;
        }
        case Op::kCrossEntropy: {
            // dlogits = (softmax - onehot) * g / m
            const std::size_t m = n.aux.rows(), c = n.aux.cols();
            const double gs = g.data[0] / static_cast<double>(m);
            Tensor ga = Tensor::zeros({m, c});
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    double p = std::exp(n.aux.data[i * c + j]);
                    if (j == static_cast<std::size_t>(n.labels[i])) p -= 1.0;
                    ga.data[i * c + j] = p * gs;
                }
            }
            accumulate(n.a, ga);
            break;
        }
        case Op::kKlDivergence: {
            // With p = softmax(zp), q = softmax(zq), row KL = sum p (logp - logq):
            //   dKL/dzp_k = p_k * ((logp_k - logq_k) - KL_row)
            //   dKL/dzq_k = q_k - p_k
            const std::size_t m = n.aux.rows(), c = n.aux.cols();
            const double gs = g.data[0] / static_cast<double>(m);
            Tensor gp = Tensor::zeros({m, c});
            Tensor gq = Tensor::zeros({m, c});
            for (std::size_t i = 0; i < m; ++i) {
                double kl_row = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(n.aux.data[i * c + j]);
                    if (p > 0.0) kl_row += p * (n.aux.data[i * c + j] - n.aux2.data[i * c + j]);
                }
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(n.aux.data[i * c + j]);
                    const double q = std::exp(n.aux2.data[i * c + j]);
                    gp.data[i * c + j] = p * ((n.aux.data[i * c + j] - n.aux2.data[i * c + j]) - kl_row) * gs;
                    gq.data[i * c + j] = (q - p) * gs;
                }
            }
            accumulate(n.a, gp);
            accumulate(n.b, gq);
            break;
        }
        case Op::kCwMargin: {
            const Tensor& logits = nodes_[static_cast<std::size_t>(n.a)].value;
            const std::size_t m = logits.rows(), c = logits.cols();
            const double gs = g.data[0] / static_cast<double>(m);
            Tensor ga = Tensor::zeros(logits.shape);
            for (std::size_t i = 0; i < m; ++i) {
                if (n.aux.data[i * 2 + 1] == 0.0) continue;  // clamped at kappa
                const std::size_t best = static_cast<std::size_t>(n.aux.data[i * 2]);
                const std::size_t y = static_cast<std::size_t>(n.labels[i]);
                ga.data[i * c + best] += gs;
                ga.data[i * c + y] -= gs;
            }
            accumulate(n.a, ga);
            break;
        }
        case Op::kScale: {
            Tensor ga = g;
            for (double& x : ga.data) x *= n.alpha;
            accumulate(n.a, ga);
            break;
        }
        case Op::kMulConst: {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= n.aux.data[i];
            accumulate(n.a, ga);
            break;
        }
        case Op::kSum: {
            const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
            Tensor ga(a.shape, std::vector<double>(a.size(), g.data[0]));
            accumulate(n.a, ga);
            break;
        }
        case Op::kRowSum: {
            const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
            const std::size_t m = a.rows(), c = a.cols();
            Tensor ga = Tensor::zeros(a.shape);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) ga.data[i * c + j] = g.data[i];
            }
            accumulate(n.a, ga);
            break;
        }
    }
}

}  // namespace atlab
