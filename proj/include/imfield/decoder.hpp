#pragma once

#include <string>
#include <vector>

#include "imfield/params.hpp"
#include "imfield/sampling.hpp"

namespace imfield {

// Implicit-field decoder: (latent code z, point p) -> inside probability.
// Each hidden layer after the first can re-concatenate the original z (+) p
// input onto its own input ("skip"); the output layer is a single sigmoid
// unit.
struct DecoderArch {
    int latent_dim = 16;
    int point_dim = 3;
    std::vector<int> widths = {256, 256, 128};
    bool skip = true;
    float alpha = 0.02f;  // leaky_relu slope for hidden layers
};

std::string decoder_param_name(size_t layer, char which);  // 1-based; 0 = output layer
std::vector<std::string> decoder_param_names(const DecoderArch& arch);
int64_t decoder_param_count(const DecoderArch& arch);

// Fills `store` with dec.* tensors, Glorot-uniform weights and zero biases.
void init_decoder(ParamStore& store, const DecoderArch& arch, uint64_t seed);

// Builds the forward pass on an existing graph. `param` maps a parameter
// name to a graph node (a ParamBinder works directly). z_row is 1 x d and is
// broadcast across the point batch; pts is b x D.
template <class T, class ParamFn>
NodeId decoder_forward(Graph<T>& g, ParamFn&& param, const DecoderArch& arch, NodeId z_row,
                       NodeId pts) {
    if (arch.widths.empty()) throw ContractError("decoder needs at least one hidden layer");
    const int d = arch.latent_dim, D = arch.point_dim;
    if (g.value(z_row).cols() != d)
        throw ShapeError("latent code width " + g.value(z_row).shape_str() + " != " + std::to_string(d));
    if (g.value(pts).cols() != D)
        throw ShapeError("point batch " + g.value(pts).shape_str() + " does not have " +
                         std::to_string(D) + " columns");
    int b = g.value(pts).rows();
    NodeId zb = g.value(z_row).rows() == b ? z_row : g.broadcast_rows(z_row, b);
    NodeId in = g.concat_cols(zb, pts);
    NodeId h = in;
    for (size_t i = 0; i < arch.widths.size(); ++i) {
        NodeId x = (i == 0 || !arch.skip) ? h : g.concat_cols(h, in);
        NodeId W = param(decoder_param_name(i + 1, 'W'));
        NodeId bias = param(decoder_param_name(i + 1, 'b'));
        h = g.leaky_relu(g.linear(x, W, bias), T(arch.alpha));
    }
    return g.sigmoid(g.linear(h, param(decoder_param_name(0, 'W')), param(decoder_param_name(0, 'b'))));
}

// Gradient-free evaluation of f(z, p) over a batch of points; returns b x 1.
Tensor<float> decode(const ParamStore& store, const DecoderArch& arch, const std::vector<float>& z,
                     const Tensor<float>& pts);

// Upper bound on the Lipschitz constant of p -> decode(z, p): chains
// per-layer operator-norm bounds through the skip concatenations and the
// sigmoid's 1/4 slope cap.
double decoder_lipschitz_bound(const ParamStore& store, const DecoderArch& arch);

// Weighted-MSE loss node for a prediction column against a sampled batch.
template <class T>
NodeId weighted_loss(Graph<T>& g, NodeId pred, const PointBatch& batch) {
    if (batch.weights.numel() == 0) throw ContractError("weighted_loss: empty batch");
    for (float w : batch.weights.data)
        if (!(w > 0.0f)) throw ContractError("weighted_loss: weights must be positive");
    NodeId labels = g.leaf(batch.labels.template cast<T>());
    NodeId weights = g.leaf(batch.weights.template cast<T>());
    return g.weighted_mse(pred, labels, weights);
}

}  // namespace imfield
