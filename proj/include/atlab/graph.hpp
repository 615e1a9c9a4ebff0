#pragma once

#include <vector>

#include "atlab/tensor.hpp"

namespace atlab {

class Graph;

// Lightweight handle to a node owned by a Graph.
struct Var {
    Graph* graph = nullptr;
    int index = -1;
};

// Append-only computation tape with reverse-mode differentiation.
//
// Nodes are created in topological order (parents before children), so one
// reverse sweep over creation order is a valid reverse-topological traversal.
// A graph is single-use: exactly one backward pass; a second traversal is a
// contract error.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var leaf(Tensor value);

    // ---- differentiable ops ----
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_row(Var a, Var bias);  // bias is rank-1 [cols], broadcast over rows
    Var relu(Var a);
    Var softmax(Var logits);       // row-wise, max-subtracted
    Var l2_normalize(Var a);       // row-wise; degenerate rows are an error
    Var cross_entropy(Var logits, const std::vector<int>& labels);   // scalar
    Var kl_divergence(Var p_logits, Var q_logits);                   // scalar
    Var cw_margin(Var logits, const std::vector<int>& labels, double kappa);  // scalar
    Var scale(Var a, double alpha);
    Var mul_const(Var a, Tensor constant);  // elementwise by a fixed tensor
    Var sum_all(Var a);                     // scalar
    Var row_sum(Var a);                     // [m,n] -> [m,1]

    const Tensor& value(Var v) const;

    // Adjoint from the last backward pass; zeros for nodes the sweep
    // never reached.
    Tensor grad(Var v) const;

    // Reverse sweep from a scalar root. Throws ContractError for a
    // non-scalar root or a second traversal of the same graph.
    void backward(Var root);

    bool backward_done() const { return backward_done_; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf,
        kMatMul,
        kAdd,
        kSub,
        kMul,
        kAddRow,
        kRelu,
        kSoftmax,
        kL2Normalize,
        kCrossEntropy,
        kKlDivergence,
        kCwMargin,
        kScale,
        kMulConst,
        kSum,
        kRowSum,
    };

    struct Node {
        Op op = Op::kLeaf;
        int a = -1;
        int b = -1;
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        std::vector<int> labels;  // kCrossEntropy, kCwMargin
        Tensor aux;               // op-dependent cache (softmax, log-probs, norms)
        Tensor aux2;
        double alpha = 0.0;       // kScale factor, kCwMargin kappa
    };

    int push(Node n);
    const Node& checked(Var v, const char* who) const;
    void accumulate(int idx, const Tensor& g);
    void backward_node(int idx);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Plain-tensor kernels shared with the graph forward pass, for evaluation
// paths that do not need gradients. Same arithmetic, same rounding.
Tensor matmul_value(const Tensor& a, const Tensor& b);
Tensor softmax_value(const Tensor& logits);
Tensor l2_normalize_value(const Tensor& v);
double cross_entropy_value(const Tensor& logits, const std::vector<int>& labels);
double kl_divergence_value(const Tensor& p_logits, const Tensor& q_logits);

// Row-wise log softmax, the stabilized building block behind CE and KL.
Tensor log_softmax_value(const Tensor& logits);

inline constexpr double kLogitNormEps = 1e-12;

}  // namespace atlab
