#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include "imfield/tensor.hpp"

namespace imfield {

using NodeId = int;

enum class OpKind {
    Leaf,
    Matmul,
    Add,
    Sub,
    Mul,
    Affine,
    AddRowVec,
    LeakyRelu,
    Sigmoid,
    ConcatCols,
    SliceCols,
    PadCols,
    BroadcastRows,
    BroadcastCols,
    BroadcastScalar,
    RowSum,
    ColSum,
    SumAll,
    Sqrt,
    Recip,
    Reshape,
    Conv,
    ConvGradInput,
    ConvGradKernel,
    AddChanBias,
    ChanSum,
    BroadcastChan,
};

// Reverse-mode tape over dense tensors. Values are computed eagerly; the
// backward pass appends new nodes (gradients are themselves differentiable),
// which is what allows the WGAN gradient penalty to be trained through.
//
// Convolution is the exception: its vjp uses dedicated value-level nodes and
// cannot be differentiated a second time.
template <class T>
class Graph {
public:
    struct Node {
        OpKind kind = OpKind::Leaf;
        std::array<NodeId, 2> in{-1, -1};
        Tensor<T> value;
        bool needs_grad = false;
        int ia = 0, ib = 0, ic = 0;  // op attributes (stride, pad, slice bounds, ...)
        T fa{}, fb{};
        std::vector<int> ishape;  // saved shape for reshape/conv/broadcast vjps
    };

    NodeId leaf(Tensor<T> t, bool needs_grad = false) {
        Node n;
        n.kind = OpKind::Leaf;
        n.value = std::move(t);
        n.needs_grad = needs_grad;
        return push(std::move(n));
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }
    size_t size() const { return nodes_.size(); }

    // ---- matrix ops -------------------------------------------------------

    NodeId matmul(NodeId a, NodeId b, bool ta = false, bool tb = false) {
        const Tensor<T>& A = val2(a, "matmul lhs");
        const Tensor<T>& B = val2(b, "matmul rhs");
        int ar = ta ? A.cols() : A.rows(), ac = ta ? A.rows() : A.cols();
        int br = tb ? B.cols() : B.rows(), bc = tb ? B.rows() : B.cols();
        if (ac != br)
            throw ShapeError("matmul inner dims disagree: " + A.shape_str() + (ta ? "^T" : "") +
                             " x " + B.shape_str() + (tb ? "^T" : ""));
        Tensor<T> out = Tensor<T>::zeros({ar, bc});
        auto MA = emap(A), MB = emap(B);
        auto MO = emap_mut(out);
        if (!ta && !tb) MO.noalias() = MA * MB;
        else if (ta && !tb) MO.noalias() = MA.transpose() * MB;
        else if (!ta && tb) MO.noalias() = MA * MB.transpose();
        else MO.noalias() = MA.transpose() * MB.transpose();
        return push_op(OpKind::Matmul, a, b, std::move(out), ta ? 1 : 0, tb ? 1 : 0);
    }

    NodeId add(NodeId a, NodeId b) { return ew2(OpKind::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return ew2(OpKind::Sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return ew2(OpKind::Mul, a, b); }

    NodeId affine(NodeId x, T a, T b) {
        Tensor<T> out = nodes_[x].value;
        for (T& v : out.data) v = a * v + b;
        NodeId id = push_op(OpKind::Affine, x, -1, std::move(out));
        nodes_[id].fa = a;
        nodes_[id].fb = b;
        return id;
    }

    NodeId add_row_vec(NodeId x, NodeId bias) {
        const Tensor<T>& X = val2(x, "add_row_vec input");
        const Tensor<T>& B = nodes_[bias].value;
        if (B.rank() != 1 || B.shape[0] != X.cols())
            throw ShapeError("bias " + B.shape_str() + " does not match row width of " + X.shape_str());
        Tensor<T> out = X;
        for (int r = 0; r < X.rows(); ++r)
            for (int c = 0; c < X.cols(); ++c) out.at(r, c) += B.data[c];
        return push_op(OpKind::AddRowVec, x, bias, std::move(out));
    }

    // ---- nonlinearities ---------------------------------------------------

    NodeId leaky_relu(NodeId x, T alpha) {
        if (!(alpha > T(0) && alpha < T(1))) throw ContractError("leaky_relu alpha must be in (0,1)");
        Tensor<T> out = nodes_[x].value;
        for (T& v : out.data) v = v > T(0) ? v : alpha * v;
        NodeId id = push_op(OpKind::LeakyRelu, x, -1, std::move(out));
        nodes_[id].fa = alpha;
        return id;
    }

    NodeId sigmoid(NodeId x) {
        Tensor<T> out = nodes_[x].value;
        for (T& v : out.data) {
            if (v >= T(0)) {
                T e = std::exp(-v);
                v = T(1) / (T(1) + e);
            } else {
                T e = std::exp(v);
                v = e / (T(1) + e);
            }
        }
        return push_op(OpKind::Sigmoid, x, -1, std::move(out));
    }

    // ---- structure --------------------------------------------------------

    NodeId concat_cols(NodeId a, NodeId b) {
        const Tensor<T>& A = val2(a, "concat lhs");
        const Tensor<T>& B = val2(b, "concat rhs");
        if (A.rows() != B.rows())
            throw ShapeError("concat leading dims differ: " + A.shape_str() + " vs " + B.shape_str());
        int m = A.cols(), n = B.cols();
        Tensor<T> out = Tensor<T>::zeros({A.rows(), m + n});
        for (int r = 0; r < A.rows(); ++r) {
            for (int c = 0; c < m; ++c) out.at(r, c) = A.at(r, c);
            for (int c = 0; c < n; ++c) out.at(r, m + c) = B.at(r, c);
        }
        NodeId id = push_op(OpKind::ConcatCols, a, b, std::move(out));
        nodes_[id].ia = m;
        return id;
    }

    NodeId slice_cols(NodeId x, int lo, int hi) {
        const Tensor<T>& X = val2(x, "slice input");
        if (lo < 0 || hi < lo || hi > X.cols()) throw ShapeError("slice_cols bounds out of range");
        Tensor<T> out = Tensor<T>::zeros({X.rows(), hi - lo});
        for (int r = 0; r < X.rows(); ++r)
            for (int c = lo; c < hi; ++c) out.at(r, c - lo) = X.at(r, c);
        return push_op(OpKind::SliceCols, x, -1, std::move(out), lo, hi);
    }

    NodeId pad_cols(NodeId x, int total, int lo) {
        const Tensor<T>& X = val2(x, "pad input");
        if (lo < 0 || lo + X.cols() > total) throw ShapeError("pad_cols bounds out of range");
        Tensor<T> out = Tensor<T>::zeros({X.rows(), total});
        for (int r = 0; r < X.rows(); ++r)
            for (int c = 0; c < X.cols(); ++c) out.at(r, lo + c) = X.at(r, c);
        return push_op(OpKind::PadCols, x, -1, std::move(out), lo, total);
    }

    NodeId broadcast_rows(NodeId x, int rows) {
        const Tensor<T>& X = val2(x, "broadcast_rows input");
        if (X.rows() != 1) throw ShapeError("broadcast_rows expects a 1xN input, got " + X.shape_str());
        Tensor<T> out = Tensor<T>::zeros({rows, X.cols()});
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < X.cols(); ++c) out.at(r, c) = X.at(0, c);
        return push_op(OpKind::BroadcastRows, x, -1, std::move(out), rows);
    }

    NodeId broadcast_cols(NodeId x, int cols) {
        const Tensor<T>& X = val2(x, "broadcast_cols input");
        if (X.cols() != 1) throw ShapeError("broadcast_cols expects a Bx1 input, got " + X.shape_str());
        Tensor<T> out = Tensor<T>::zeros({X.rows(), cols});
        for (int r = 0; r < X.rows(); ++r)
            for (int c = 0; c < cols; ++c) out.at(r, c) = X.at(r, 0);
        return push_op(OpKind::BroadcastCols, x, -1, std::move(out), cols);
    }

    NodeId broadcast_scalar(NodeId s, std::vector<int> shape) {
        const Tensor<T>& S = nodes_[s].value;
        if (S.numel() != 1) throw ShapeError("broadcast_scalar expects a scalar, got " + S.shape_str());
        Tensor<T> out = Tensor<T>::full(shape, S.data[0]);
        NodeId id = push_op(OpKind::BroadcastScalar, s, -1, std::move(out));
        nodes_[id].ishape = std::move(shape);
        return id;
    }

    // ---- reductions -------------------------------------------------------

    NodeId row_sum(NodeId x) {
        const Tensor<T>& X = val2(x, "row_sum input");
        Tensor<T> out = Tensor<T>::zeros({X.rows(), 1});
        for (int r = 0; r < X.rows(); ++r) {
            T s = T(0);
            for (int c = 0; c < X.cols(); ++c) s += X.at(r, c);
            out.at(r, 0) = s;
        }
        return push_op(OpKind::RowSum, x, -1, std::move(out), X.cols());
    }

    NodeId col_sum(NodeId x) {
        const Tensor<T>& X = val2(x, "col_sum input");
        Tensor<T> out = Tensor<T>::zeros({1, X.cols()});
        for (int r = 0; r < X.rows(); ++r)
            for (int c = 0; c < X.cols(); ++c) out.at(0, c) += X.at(r, c);
        return push_op(OpKind::ColSum, x, -1, std::move(out), X.rows());
    }

    NodeId sum_all(NodeId x) {
        std::vector<int> xshape = nodes_[x].value.shape;  // push_op may reallocate
        T s = T(0);
        for (T v : nodes_[x].value.data) s += v;
        NodeId id = push_op(OpKind::SumAll, x, -1, Tensor<T>::scalar(s));
        nodes_[id].ishape = std::move(xshape);
        return id;
    }

    NodeId sqrt_op(NodeId x) {
        Tensor<T> out = nodes_[x].value;
        for (T& v : out.data) v = std::sqrt(v);
        return push_op(OpKind::Sqrt, x, -1, std::move(out));
    }

    NodeId recip(NodeId x) {
        Tensor<T> out = nodes_[x].value;
        for (T& v : out.data) v = T(1) / v;
        return push_op(OpKind::Recip, x, -1, std::move(out));
    }

    NodeId reshape(NodeId x, std::vector<int> shape) {
        std::vector<int> xshape = nodes_[x].value.shape;
        Tensor<T> out;
        out.shape = shape;
        out.data = nodes_[x].value.data;
        if (out.numel() != nodes_[x].value.numel()) throw ShapeError("reshape changes element count");
        NodeId id = push_op(OpKind::Reshape, x, -1, std::move(out));
        nodes_[id].ishape = std::move(xshape);
        return id;
    }

    // ---- convolution ------------------------------------------------------

    // Valid cross-correlation with symmetric stride and zero padding.
    // dims==2: x [b,ci,H,W], k [co,ci,kh,kw]. dims==3: x [b,ci,D,H,W],
    // k [co,ci,kd,kh,kw]. 2D inputs are lifted to 3D with a unit depth axis.
    NodeId conv(NodeId x, NodeId k, int dims, int stride, int pad) {
        const Tensor<T>& X = nodes_[x].value;
        const Tensor<T>& K = nodes_[k].value;
        check_conv_shapes(X, K, dims, stride, pad);
        Tensor<T> out = conv_forward(X, K, dims, stride, pad);
        return push_op(OpKind::Conv, x, k, std::move(out), dims, stride, pad);
    }

    NodeId add_chan_bias(NodeId x, NodeId bias) {
        const Tensor<T>& X = nodes_[x].value;
        const Tensor<T>& B = nodes_[bias].value;
        if (X.rank() < 3 || B.rank() != 1 || B.shape[0] != X.shape[1])
            throw ShapeError("channel bias " + B.shape_str() + " does not match " + X.shape_str());
        Tensor<T> out = X;
        int64_t spatial = X.numel() / (int64_t(X.shape[0]) * X.shape[1]);
        int64_t i = 0;
        for (int b = 0; b < X.shape[0]; ++b)
            for (int c = 0; c < X.shape[1]; ++c)
                for (int64_t s = 0; s < spatial; ++s) out.data[i++] += B.data[c];
        return push_op(OpKind::AddChanBias, x, bias, std::move(out));
    }

    NodeId chan_sum(NodeId x) {
        const Tensor<T>& X = val_conv(x);
        std::vector<int> xshape = X.shape;
        Tensor<T> out = Tensor<T>::zeros({X.shape[1]});
        int64_t spatial = X.numel() / (int64_t(X.shape[0]) * X.shape[1]);
        int64_t i = 0;
        for (int b = 0; b < X.shape[0]; ++b)
            for (int c = 0; c < X.shape[1]; ++c)
                for (int64_t s = 0; s < spatial; ++s) out.data[c] += X.data[i++];
        NodeId id = push_op(OpKind::ChanSum, x, -1, std::move(out));
        nodes_[id].ishape = std::move(xshape);
        return id;
    }

    NodeId broadcast_chan(NodeId bias, std::vector<int> shape) {
        const Tensor<T>& B = nodes_[bias].value;
        if (B.rank() != 1 || shape.size() < 3 || B.shape[0] != shape[1])
            throw ShapeError("broadcast_chan shape mismatch");
        Tensor<T> out = Tensor<T>::zeros(shape);
        int64_t spatial = out.numel() / (int64_t(shape[0]) * shape[1]);
        int64_t i = 0;
        for (int b = 0; b < shape[0]; ++b)
            for (int c = 0; c < shape[1]; ++c)
                for (int64_t s = 0; s < spatial; ++s) out.data[i++] = B.data[c];
        NodeId id = push_op(OpKind::BroadcastChan, bias, -1, std::move(out));
        nodes_[id].ishape = std::move(shape);
        return id;
    }

    // ---- composites -------------------------------------------------------

    NodeId linear(NodeId x, NodeId W, NodeId b) { return add_row_vec(matmul(x, W), b); }

    NodeId mean_all(NodeId x) {
        int64_t n = nodes_[x].value.numel();
        return affine(sum_all(x), T(1) / T(n), T(0));
    }

    // Eq-style weighted squared error: sum(w * (pred - label)^2) / sum(w).
    // The weight total is treated as a constant (weights are data, not
    // parameters), keeping the loss a plain differentiable composite.
    NodeId weighted_mse(NodeId pred, NodeId labels, NodeId weights) {
        const Tensor<T>& W = nodes_[weights].value;
        T wsum = T(0);
        for (T v : W.data) wsum += v;
        if (!(wsum > T(0))) throw ContractError("weighted_mse: total weight must be positive");
        NodeId d = sub(pred, labels);
        NodeId sq = mul(d, d);
        return affine(sum_all(mul(sq, weights)), T(1) / wsum, T(0));
    }

    // ---- backward ---------------------------------------------------------

    // Reverse pass from a scalar loss; returns gradient node ids aligned with
    // `wrt` (zero tensors for parameters the loss does not depend on). May be
    // invoked repeatedly; nodes appended by earlier calls are differentiable.
    std::vector<NodeId> backward(NodeId loss, std::span<const NodeId> wrt) {
        if (nodes_[loss].value.numel() != 1)
            throw ContractError("backward: loss must be a scalar, got " +
                                nodes_[loss].value.shape_str());
        std::vector<NodeId> grad_of(static_cast<size_t>(loss) + 1, -1);
        grad_of[loss] = leaf(Tensor<T>::full(nodes_[loss].value.shape, T(1)));
        for (NodeId id = loss; id >= 0; --id) {
            if (grad_of[id] < 0 || !nodes_[id].needs_grad) continue;
            backprop_node(id, grad_of[id], grad_of);
        }
        std::vector<NodeId> out;
        out.reserve(wrt.size());
        for (NodeId p : wrt) {
            if (p <= loss && grad_of[p] >= 0) out.push_back(grad_of[p]);
            else out.push_back(leaf(Tensor<T>::zeros(nodes_[p].value.shape)));
        }
        return out;
    }

private:
    std::vector<Node> nodes_;

    using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    static Eigen::Map<const EMat> emap(const Tensor<T>& t) {
        return Eigen::Map<const EMat>(t.data.data(), t.rows(), t.cols());
    }
    static Eigen::Map<EMat> emap_mut(Tensor<T>& t) {
        return Eigen::Map<EMat>(t.data.data(), t.rows(), t.cols());
    }

    const Tensor<T>& val2(NodeId id, const char* what) const {
        const Tensor<T>& t = nodes_[id].value;
        if (t.rank() != 2) throw ShapeError(std::string(what) + " must be rank 2, got " + t.shape_str());
        return t;
    }
    const Tensor<T>& val_conv(NodeId id) const {
        const Tensor<T>& t = nodes_[id].value;
        if (t.rank() < 3) throw ShapeError("expected a conv activation, got " + t.shape_str());
        return t;
    }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId push_op(OpKind kind, NodeId a, NodeId b, Tensor<T> value, int ia = 0, int ib = 0, int ic = 0) {
        Node n;
        n.kind = kind;
        n.in = {a, b};
        n.value = std::move(value);
        n.ia = ia;
        n.ib = ib;
        n.ic = ic;
        n.needs_grad = (a >= 0 && nodes_[a].needs_grad) || (b >= 0 && nodes_[b].needs_grad);
        return push(std::move(n));
    }

    NodeId ew2(OpKind kind, NodeId a, NodeId b) {
        const Tensor<T>& A = nodes_[a].value;
        const Tensor<T>& B = nodes_[b].value;
        if (!A.same_shape(B))
            throw ShapeError("elementwise op on mismatched shapes " + A.shape_str() + " vs " + B.shape_str());
        Tensor<T> out = A;
        switch (kind) {
            case OpKind::Add:
                for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
                break;
            case OpKind::Sub:
                for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
                break;
            case OpKind::Mul:
                for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
                break;
            default: throw ContractError("ew2: bad op");
        }
        return push_op(kind, a, b, std::move(out));
    }

    void accumulate(std::vector<NodeId>& grad_of, NodeId target, NodeId g) {
        if (target < 0 || static_cast<size_t>(target) >= grad_of.size()) return;
        if (!nodes_[target].needs_grad) return;
        grad_of[target] = grad_of[target] < 0 ? g : add(grad_of[target], g);
    }

    void backprop_node(NodeId id, NodeId g, std::vector<NodeId>& grad_of) {
        // Copy the plain fields: the ops below append nodes, which can move
        // the node storage out from under a held reference.
        const Node n = [&] {
            Node c;
            const Node& src = nodes_[id];
            c.kind = src.kind;
            c.in = src.in;
            c.ia = src.ia;
            c.ib = src.ib;
            c.ic = src.ic;
            c.fa = src.fa;
            c.fb = src.fb;
            c.ishape = src.ishape;
            return c;
        }();
        NodeId a = n.in[0], b = n.in[1];
        switch (n.kind) {
            case OpKind::Leaf: break;
            case OpKind::Matmul: {
                bool ta = n.ia != 0, tb = n.ib != 0;
                if (a >= 0 && nodes_[a].needs_grad)
                    accumulate(grad_of, a, ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb));
                if (b >= 0 && nodes_[b].needs_grad)
                    accumulate(grad_of, b, tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false));
                break;
            }
            case OpKind::Add:
                accumulate(grad_of, a, g);
                accumulate(grad_of, b, g);
                break;
            case OpKind::Sub:
                accumulate(grad_of, a, g);
                if (b >= 0 && nodes_[b].needs_grad) accumulate(grad_of, b, affine(g, T(-1), T(0)));
                break;
            case OpKind::Mul:
                if (a >= 0 && nodes_[a].needs_grad) accumulate(grad_of, a, mul(g, b));
                if (b >= 0 && nodes_[b].needs_grad) accumulate(grad_of, b, mul(g, a));
                break;
            case OpKind::Affine:
                accumulate(grad_of, a, affine(g, n.fa, T(0)));
                break;
            case OpKind::AddRowVec:
                accumulate(grad_of, a, g);
                if (b >= 0 && nodes_[b].needs_grad)
                    accumulate(grad_of, b, reshape(col_sum(g), {nodes_[b].value.shape[0]}));
                break;
            case OpKind::LeakyRelu: {
                if (a < 0 || !nodes_[a].needs_grad) break;
                Tensor<T> mask = nodes_[a].value;
                for (T& v : mask.data) v = v > T(0) ? T(1) : n.fa;
                accumulate(grad_of, a, mul(g, leaf(std::move(mask))));
                break;
            }
            case OpKind::Sigmoid: {
                // d/dx sigmoid = s * (1 - s), expressed on-tape via the output
                // node so second-order gradients stay exact.
                NodeId one_minus = affine(id, T(-1), T(1));
                accumulate(grad_of, a, mul(g, mul_nodes(id, one_minus)));
                break;
            }
            case OpKind::ConcatCols: {
                int m = n.ia;
                if (a >= 0 && nodes_[a].needs_grad) accumulate(grad_of, a, slice_cols(g, 0, m));
                if (b >= 0 && nodes_[b].needs_grad)
                    accumulate(grad_of, b, slice_cols(g, m, nodes_[id].value.cols()));
                break;
            }
            case OpKind::SliceCols:
                accumulate(grad_of, a, pad_cols(g, nodes_[a].value.cols(), n.ia));
                break;
            case OpKind::PadCols:
                accumulate(grad_of, a, slice_cols(g, n.ia, n.ia + nodes_[a].value.cols()));
                break;
            case OpKind::BroadcastRows: accumulate(grad_of, a, col_sum(g)); break;
            case OpKind::BroadcastCols: accumulate(grad_of, a, row_sum(g)); break;
            case OpKind::BroadcastScalar: accumulate(grad_of, a, sum_all(g)); break;
            case OpKind::RowSum: accumulate(grad_of, a, broadcast_cols(g, n.ia)); break;
            case OpKind::ColSum: accumulate(grad_of, a, broadcast_rows(g, n.ia)); break;
            case OpKind::SumAll: accumulate(grad_of, a, broadcast_scalar(g, n.ishape)); break;
            case OpKind::Sqrt: {
                accumulate(grad_of, a, affine(mul(g, recip(id)), T(0.5), T(0)));
                break;
            }
            case OpKind::Recip: {
                NodeId r2 = mul_nodes(id, id);
                accumulate(grad_of, a, affine(mul(g, r2), T(-1), T(0)));
                break;
            }
            case OpKind::Reshape: accumulate(grad_of, a, reshape(g, n.ishape)); break;
            case OpKind::Conv: {
                int dims = n.ia, stride = n.ib, pad = n.ic;
                if (a >= 0 && nodes_[a].needs_grad) {
                    Tensor<T> gx = conv_grad_input(nodes_[g].value, nodes_[b].value,
                                                   nodes_[a].value.shape, dims, stride, pad);
                    NodeId gi = push_op(OpKind::ConvGradInput, g, b, std::move(gx), dims, stride, pad);
                    accumulate(grad_of, a, gi);
                }
                if (b >= 0 && nodes_[b].needs_grad) {
                    Tensor<T> gk = conv_grad_kernel(nodes_[g].value, nodes_[a].value,
                                                    nodes_[b].value.shape, dims, stride, pad);
                    NodeId gkid = push_op(OpKind::ConvGradKernel, g, a, std::move(gk), dims, stride, pad);
                    accumulate(grad_of, b, gkid);
                }
                break;
            }
            case OpKind::ConvGradInput:
            case OpKind::ConvGradKernel:
                throw ContractError("second-order gradients through convolution are not supported");
            case OpKind::AddChanBias:
                accumulate(grad_of, a, g);
                if (b >= 0 && nodes_[b].needs_grad) accumulate(grad_of, b, chan_sum(g));
                break;
            case OpKind::ChanSum: accumulate(grad_of, a, broadcast_chan(g, n.ishape)); break;
            case OpKind::BroadcastChan: accumulate(grad_of, a, chan_sum(g)); break;
        }
    }

    // mul() rejects needs_grad bookkeeping shortcuts; helper for vjps that
    // multiply two existing nodes regardless of grad flags.
    NodeId mul_nodes(NodeId a, NodeId b) { return ew2(OpKind::Mul, a, b); }

    // ---- convolution kernels (im2col + GEMM) ------------------------------

    struct ConvDims {
        int batch, ci, co;
        int in[3], k[3], out[3];
        int64_t cols_rows, cols_cols;
    };

    static ConvDims conv_dims(const std::vector<int>& xs, const std::vector<int>& ks,
                              int dims, int stride, int pad) {
        ConvDims d{};
        d.batch = xs[0];
        d.ci = xs[1];
        d.co = ks[0];
        for (int i = 0; i < 3; ++i) {
            int lift = 3 - dims;  // leading unit depth axis for 2D
            d.in[i] = i < lift ? 1 : xs[2 + i - lift];
            d.k[i] = i < lift ? 1 : ks[2 + i - lift];
            int p = i < lift ? 0 : pad;
            int s = i < lift ? 1 : stride;
            d.out[i] = (d.in[i] + 2 * p - d.k[i]) / s + 1;
        }
        d.cols_rows = int64_t(d.ci) * d.k[0] * d.k[1] * d.k[2];
        d.cols_cols = int64_t(d.out[0]) * d.out[1] * d.out[2];
        return d;
    }

    static void check_conv_shapes(const Tensor<T>& X, const Tensor<T>& K, int dims, int stride, int pad) {
        if (dims != 2 && dims != 3) throw ContractError("conv dims must be 2 or 3");
        if (stride < 1) throw ContractError("conv stride must be >= 1");
        if (X.rank() != dims + 2 || K.rank() != dims + 2)
            throw ShapeError("conv expects rank " + std::to_string(dims + 2) + " input/kernel, got " +
                             X.shape_str() + " and " + K.shape_str());
        if (X.shape[1] != K.shape[1])
            throw ShapeError("conv channel mismatch: " + X.shape_str() + " vs kernel " + K.shape_str());
        for (int i = 0; i < dims; ++i)
            if (K.shape[2 + i] > X.shape[2 + i] + 2 * pad)
                throw ShapeError("conv kernel extent exceeds padded input: kernel " + K.shape_str() +
                                 " on " + X.shape_str());
    }

    static void im2col(const T* x, const ConvDims& d, int dims, int stride, int pad, T* cols) {
        int lift = 3 - dims;
        int64_t C = d.cols_cols;
        int64_t col = 0;
        for (int od = 0; od < d.out[0]; ++od)
            for (int oh = 0; oh < d.out[1]; ++oh)
                for (int ow = 0; ow < d.out[2]; ++ow, ++col) {
                    int64_t row = 0;
                    for (int ci = 0; ci < d.ci; ++ci) {
                        const T* xc = x + int64_t(ci) * d.in[0] * d.in[1] * d.in[2];
                        for (int kd = 0; kd < d.k[0]; ++kd) {
                            int id = od * (lift > 0 ? 1 : stride) - (lift > 0 ? 0 : pad) + kd;
                            for (int kh = 0; kh < d.k[1]; ++kh) {
                                int ih = oh * (lift > 1 ? 1 : stride) - (lift > 1 ? 0 : pad) + kh;
                                for (int kw = 0; kw < d.k[2]; ++kw, ++row) {
                                    int iw = ow * stride - pad + kw;
                                    T v = T(0);
                                    if (id >= 0 && id < d.in[0] && ih >= 0 && ih < d.in[1] &&
                                        iw >= 0 && iw < d.in[2])
                                        v = xc[(int64_t(id) * d.in[1] + ih) * d.in[2] + iw];
                                    cols[row * C + col] = v;
                                }
                            }
                        }
                    }
                }
    }

    static void col2im(const T* cols, const ConvDims& d, int dims, int stride, int pad, T* x) {
        int lift = 3 - dims;
        int64_t C = d.cols_cols;
        int64_t col = 0;
        for (int od = 0; od < d.out[0]; ++od)
            for (int oh = 0; oh < d.out[1]; ++oh)
                for (int ow = 0; ow < d.out[2]; ++ow, ++col) {
                    int64_t row = 0;
                    for (int ci = 0; ci < d.ci; ++ci) {
                        T* xc = x + int64_t(ci) * d.in[0] * d.in[1] * d.in[2];
                        for (int kd = 0; kd < d.k[0]; ++kd) {
                            int id = od * (lift > 0 ? 1 : stride) - (lift > 0 ? 0 : pad) + kd;
                            for (int kh = 0; kh < d.k[1]; ++kh) {
                                int ih = oh * (lift > 1 ? 1 : stride) - (lift > 1 ? 0 : pad) + kh;
                                for (int kw = 0; kw < d.k[2]; ++kw, ++row) {
                                    int iw = ow * stride - pad + kw;
                                    if (id >= 0 && id < d.in[0] && ih >= 0 && ih < d.in[1] &&
                                        iw >= 0 && iw < d.in[2])
                                        xc[(int64_t(id) * d.in[1] + ih) * d.in[2] + iw] += cols[row * C + col];
                                }
                            }
                        }
                    }
                }
    }

    static Tensor<T> conv_forward(const Tensor<T>& X, const Tensor<T>& K, int dims, int stride, int pad) {
        ConvDims d = conv_dims(X.shape, K.shape, dims, stride, pad);
        std::vector<int> oshape{d.batch, d.co};
        for (int i = 3 - dims; i < 3; ++i) oshape.push_back(d.out[i]);
        Tensor<T> Y = Tensor<T>::zeros(oshape);
        std::vector<T> cols(d.cols_rows * d.cols_cols);
        int64_t in_sz = int64_t(d.ci) * d.in[0] * d.in[1] * d.in[2];
        int64_t out_sz = int64_t(d.co) * d.cols_cols;
        Eigen::Map<const EMat> W(K.data.data(), d.co, d.cols_rows);
        for (int b = 0; b < d.batch; ++b) {
            im2col(X.data.data() + b * in_sz, d, dims, stride, pad, cols.data());
            Eigen::Map<const EMat> Cm(cols.data(), d.cols_rows, d.cols_cols);
            Eigen::Map<EMat> Ym(Y.data.data() + b * out_sz, d.co, d.cols_cols);
            Ym.noalias() = W * Cm;
        }
        return Y;
    }

    static Tensor<T> conv_grad_input(const Tensor<T>& GY, const Tensor<T>& K,
                                     const std::vector<int>& xshape, int dims, int stride, int pad) {
        ConvDims d = conv_dims(xshape, K.shape, dims, stride, pad);
        Tensor<T> GX = Tensor<T>::zeros(xshape);
        std::vector<T> cols(d.cols_rows * d.cols_cols);
        int64_t in_sz = int64_t(d.ci) * d.in[0] * d.in[1] * d.in[2];
        int64_t out_sz = int64_t(d.co) * d.cols_cols;
        Eigen::Map<const EMat> W(K.data.data(), d.co, d.cols_rows);
        for (int b = 0; b < d.batch; ++b) {
            Eigen::Map<const EMat> Gm(GY.data.data() + b * out_sz, d.co, d.cols_cols);
            Eigen::Map<EMat> Cm(cols.data(), d.cols_rows, d.cols_cols);
            Cm.noalias() = W.transpose() * Gm;
            col2im(cols.data(), d, dims, stride, pad, GX.data.data() + b * in_sz);
        }
        return GX;
    }

    static Tensor<T> conv_grad_kernel(const Tensor<T>& GY, const Tensor<T>& X,
                                      const std::vector<int>& kshape, int dims, int stride, int pad) {
        ConvDims d = conv_dims(X.shape, kshape, dims, stride, pad);
        Tensor<T> GK = Tensor<T>::zeros(kshape);
        std::vector<T> cols(d.cols_rows * d.cols_cols);
        int64_t in_sz = int64_t(d.ci) * d.in[0] * d.in[1] * d.in[2];
        int64_t out_sz = int64_t(d.co) * d.cols_cols;
        Eigen::Map<EMat> GW(GK.data.data(), d.co, d.cols_rows);
        for (int b = 0; b < d.batch; ++b) {
            im2col(X.data.data() + b * in_sz, d, dims, stride, pad, cols.data());
            Eigen::Map<const EMat> Cm(cols.data(), d.cols_rows, d.cols_cols);
            Eigen::Map<const EMat> Gm(GY.data.data() + b * out_sz, d.co, d.cols_cols);
            GW.noalias() += Gm * Cm.transpose();
        }
        return GK;
    }
};

}  // namespace imfield
