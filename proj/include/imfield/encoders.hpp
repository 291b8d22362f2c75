#pragma once

#include <string>
#include <vector>

#include "imfield/params.hpp"
#include "imfield/voxel.hpp"

namespace imfield {

// Conv stack over raw occupancy (0/1 floats): kernel 4, stride 2, pad 1
// halves the spatial extent per layer until it reaches 1, channels doubling
// from base_channels up to max_channels, then a dense layer to the latent
// dimension. native_n fixes the stack depth; coarser grids are upsampled to
// native_n before encoding.
struct VoxelEncoderArch {
    int dims = 3;
    int native_n = 16;
    int latent_dim = 16;
    int base_channels = 16;
    int max_channels = 128;
    float alpha = 0.02f;

    int layer_count() const;
    int channels_at(int layer) const;  // 1-based
};

// Fixed four-layer conv net over a single-channel side^2 silhouette, dense
// head to the latent dimension.
struct ImageEncoderArch {
    int side = 64;
    int conv_layers = 4;
    int latent_dim = 16;
    int base_channels = 16;
    int max_channels = 128;
    float alpha = 0.02f;
};

std::string voxel_encoder_param_name(int layer, char which);  // 0 = dense head
std::string image_encoder_param_name(int layer, char which);
std::vector<std::string> voxel_encoder_param_names(const VoxelEncoderArch& arch);
std::vector<std::string> image_encoder_param_names(const ImageEncoderArch& arch);

void init_voxel_encoder(ParamStore& store, const VoxelEncoderArch& arch, uint64_t seed);
void init_image_encoder(ParamStore& store, const ImageEncoderArch& arch, uint64_t seed);

// Occupancy as a conv activation [1, 1, (n)^dims], z-major.
Tensor<float> grid_to_tensor(const VoxelGrid& g);

template <class T, class ParamFn>
NodeId voxel_encoder_forward(Graph<T>& g, ParamFn&& param, const VoxelEncoderArch& arch, NodeId x) {
    int layers = arch.layer_count();
    NodeId h = x;
    for (int i = 1; i <= layers; ++i) {
        NodeId K = param(voxel_encoder_param_name(i, 'K'));
        NodeId b = param(voxel_encoder_param_name(i, 'b'));
        h = g.leaky_relu(g.add_chan_bias(g.conv(h, K, arch.dims, 2, 1), b), T(arch.alpha));
    }
    const auto& shape = g.value(h).shape;
    int batch = shape[0];
    int feat = int(g.value(h).numel() / batch);
    NodeId flat = g.reshape(h, {batch, feat});
    return g.linear(flat, param(voxel_encoder_param_name(0, 'W')),
                    param(voxel_encoder_param_name(0, 'b')));
}

template <class T, class ParamFn>
NodeId image_encoder_forward(Graph<T>& g, ParamFn&& param, const ImageEncoderArch& arch, NodeId x) {
    NodeId h = x;
    for (int i = 1; i <= arch.conv_layers; ++i) {
        NodeId K = param(image_encoder_param_name(i, 'K'));
        NodeId b = param(image_encoder_param_name(i, 'b'));
        h = g.leaky_relu(g.add_chan_bias(g.conv(h, K, 2, 2, 1), b), T(arch.alpha));
    }
    const auto& shape = g.value(h).shape;
    int batch = shape[0];
    int feat = int(g.value(h).numel() / batch);
    NodeId flat = g.reshape(h, {batch, feat});
    return g.linear(flat, param(image_encoder_param_name(0, 'W')),
                    param(image_encoder_param_name(0, 'b')));
}

// Grid -> latent code. Grids coarser than native_n are nearest-neighbor
// upsampled; finer ones are rejected.
std::vector<float> encode_voxels(const ParamStore& store, const VoxelEncoderArch& arch,
                                 const VoxelGrid& g);

// Silhouette image -> latent code; the image side must match the arch.
std::vector<float> encode_image(const ParamStore& store, const ImageEncoderArch& arch,
                                const VoxelGrid& img);

// Orthographic occupancy projection of a 3D grid along an axis (0=x towards
// +x, 1=y, 2=z), resampled to side^2. Pixel axes: x -> (y,z), y -> (x,z),
// z -> (x,y).
VoxelGrid render_silhouette(const VoxelGrid& g, int axis, int side);

}  // namespace imfield
