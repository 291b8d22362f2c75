#include "imfield/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace imfield {

int VoxelEncoderArch::layer_count() const {
    int n = native_n, c = 0;
    while (n > 1) {
        if (n % 2) throw ContractError("encoder native resolution must be a power of two");
        n /= 2;
        ++c;
    }
    return c;
}

int VoxelEncoderArch::channels_at(int layer) const {
    int c = base_channels;
    for (int i = 1; i < layer; ++i) c = std::min(c * 2, max_channels);
    return std::min(c, max_channels);
}

std::string voxel_encoder_param_name(int layer, char which) {
    if (layer == 0) return std::string("enc.out.") + which;
    return "enc.layer" + std::to_string(layer) + "." + which;
}

std::string image_encoder_param_name(int layer, char which) {
    if (layer == 0) return std::string("imenc.out.") + which;
    return "imenc.layer" + std::to_string(layer) + "." + which;
}

std::vector<std::string> voxel_encoder_param_names(const VoxelEncoderArch& arch) {
    std::vector<std::string> names;
    for (int i = 1; i <= arch.layer_count(); ++i) {
        names.push_back(voxel_encoder_param_name(i, 'K'));
        names.push_back(voxel_encoder_param_name(i, 'b'));
    }
    names.push_back(voxel_encoder_param_name(0, 'W'));
    names.push_back(voxel_encoder_param_name(0, 'b'));
    return names;
}

std::vector<std::string> image_encoder_param_names(const ImageEncoderArch& arch) {
    std::vector<std::string> names;
    for (int i = 1; i <= arch.conv_layers; ++i) {
        names.push_back(image_encoder_param_name(i, 'K'));
        names.push_back(image_encoder_param_name(i, 'b'));
    }
    names.push_back(image_encoder_param_name(0, 'W'));
    names.push_back(image_encoder_param_name(0, 'b'));
    return names;
}

namespace {

std::vector<int> kernel_shape(int co, int ci, int dims) {
    std::vector<int> s{co, ci};
    for (int i = 0; i < dims; ++i) s.push_back(4);
    return s;
}

int64_t kernel_fan(int channels, int dims) {
    int64_t f = channels;
    for (int i = 0; i < dims; ++i) f *= 4;
    return f;
}

}  // namespace

void init_voxel_encoder(ParamStore& store, const VoxelEncoderArch& arch, uint64_t seed) {
    Rng rng(seed);
    int ci = 1;
    for (int i = 1; i <= arch.layer_count(); ++i) {
        int co = arch.channels_at(i);
        store.add(voxel_encoder_param_name(i, 'K'),
                  glorot_uniform(kernel_shape(co, ci, arch.dims), int(kernel_fan(ci, arch.dims)),
                                 int(kernel_fan(co, arch.dims)), rng));
        store.add(voxel_encoder_param_name(i, 'b'), Tensor<float>::zeros({co}));
        ci = co;
    }
    store.add(voxel_encoder_param_name(0, 'W'),
              glorot_uniform({ci, arch.latent_dim}, ci, arch.latent_dim, rng));
    store.add(voxel_encoder_param_name(0, 'b'), Tensor<float>::zeros({arch.latent_dim}));
}

void init_image_encoder(ParamStore& store, const ImageEncoderArch& arch, uint64_t seed) {
    Rng rng(seed);
    int ci = 1, side = arch.side;
    for (int i = 1; i <= arch.conv_layers; ++i) {
        int co = std::min(arch.base_channels << (i - 1), arch.max_channels);
        store.add(image_encoder_param_name(i, 'K'),
                  glorot_uniform(kernel_shape(co, ci, 2), int(kernel_fan(ci, 2)),
                                 int(kernel_fan(co, 2)), rng));
        store.add(image_encoder_param_name(i, 'b'), Tensor<float>::zeros({co}));
        ci = co;
        side /= 2;
    }
    int feat = ci * side * side;
    store.add(image_encoder_param_name(0, 'W'),
              glorot_uniform({feat, arch.latent_dim}, feat, arch.latent_dim, rng));
    store.add(image_encoder_param_name(0, 'b'), Tensor<float>::zeros({arch.latent_dim}));
}

Tensor<float> grid_to_tensor(const VoxelGrid& g) {
    std::vector<int> shape{1, 1};
    for (int i = 0; i < g.dims; ++i) shape.push_back(g.n);
    Tensor<float> t = Tensor<float>::zeros(shape);
    for (int64_t i = 0; i < g.cell_count(); ++i) t.data[size_t(i)] = g.occ[size_t(i)] ? 1.0f : 0.0f;
    return t;
}

std::vector<float> encode_voxels(const ParamStore& store, const VoxelEncoderArch& arch,
                                 const VoxelGrid& g) {
    if (g.dims != arch.dims)
        throw ShapeError("encoder is " + std::to_string(arch.dims) + "D, grid is " +
                         std::to_string(g.dims) + "D");
    if (g.n > arch.native_n)
        throw ShapeError("grid resolution " + std::to_string(g.n) + " exceeds encoder native " +
                         std::to_string(arch.native_n));
    const VoxelGrid& input = g;
    VoxelGrid up;
    if (g.n < arch.native_n) {
        up = resample_nearest(g, arch.native_n);
    }
    Graph<float> gr;
    auto binder = ParamBinder<float>::from_store(gr, store);
    NodeId x = gr.leaf(grid_to_tensor(g.n < arch.native_n ? up : input));
    NodeId z = voxel_encoder_forward(gr, binder, arch, x);
    return gr.value(z).data;
}

std::vector<float> encode_image(const ParamStore& store, const ImageEncoderArch& arch,
                                const VoxelGrid& img) {
    if (img.dims != 2) throw ShapeError("image encoder expects a 2D grid");
    if (img.n != arch.side)
        throw ShapeError("image side " + std::to_string(img.n) + " != encoder side " +
                         std::to_string(arch.side));
    Graph<float> gr;
    auto binder = ParamBinder<float>::from_store(gr, store);
    NodeId z = image_encoder_forward(gr, binder, arch, gr.leaf(grid_to_tensor(img)));
    return gr.value(z).data;
}

VoxelGrid render_silhouette(const VoxelGrid& g, int axis, int side) {
    if (g.dims != 3) throw ContractError("render_silhouette expects a 3D grid");
    if (axis < 0 || axis > 2) throw ContractError("axis must be 0, 1 or 2");
    VoxelGrid img = VoxelGrid::empty(2, g.n);
    for (int v = 0; v < g.n; ++v)
        for (int u = 0; u < g.n; ++u) {
            bool hit = false;
            for (int t = 0; t < g.n && !hit; ++t) {
                int x = axis == 0 ? t : u;
                int y = axis == 1 ? t : (axis == 0 ? u : v);
                int z = axis == 2 ? t : v;
                hit = g.at(x, y, z);
            }
            img.set(u, v, 0, hit);
        }
    return img.n == side ? img : resample_nearest(img, side);
}

}  // namespace imfield
