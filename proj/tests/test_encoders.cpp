#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "imfield/decoder.hpp"
#include "imfield/encoders.hpp"
#include "imfield/fdcheck.hpp"

using namespace imfield;

namespace {
ShapeSpec centered_sphere(double r) {
    ShapeSpec s;
    s.parts.push_back(Sphere{{0.5, 0.5, 0.5}, r});
    return s;
}
}  // namespace

TEST_CASE("voxel encoder: stack geometry and parameter naming") {
    VoxelEncoderArch arch;
    CHECK(arch.layer_count() == 4);  // 16 -> 8 -> 4 -> 2 -> 1
    CHECK(arch.channels_at(1) == 16);
    CHECK(arch.channels_at(4) == 128);

    ParamStore store;
    init_voxel_encoder(store, arch, 3);
    CHECK(store.get("enc.layer1.K").value.shape == std::vector<int>{16, 1, 4, 4, 4});
    CHECK(store.get("enc.layer4.K").value.shape == std::vector<int>{128, 64, 4, 4, 4});
    CHECK(store.get("enc.out.W").value.shape == std::vector<int>{128, 16});
}

TEST_CASE("encode_voxels: deterministic, right length, pure") {
    VoxelEncoderArch arch;
    ParamStore store;
    init_voxel_encoder(store, arch, 5);
    VoxelGrid g = rasterize(centered_sphere(0.3), 16);
    auto z1 = encode_voxels(store, arch, g);
    auto z2 = encode_voxels(store, arch, g);
    CHECK(z1.size() == 16);
    CHECK(z1 == z2);
    for (float v : z1) CHECK(std::isfinite(v));

    ShapeSpec box;
    box.parts.push_back(Box{{0.5, 0.5, 0.5}, {0.2, 0.2, 0.2}});
    auto zb = encode_voxels(store, arch, rasterize(box, 16));
    CHECK(zb != z1);
}

TEST_CASE("encode_voxels: coarse grids are upsampled, finer rejected") {
    VoxelEncoderArch arch;
    arch.native_n = 32;
    ParamStore store;
    init_voxel_encoder(store, arch, 5);
    VoxelGrid g16 = rasterize(centered_sphere(0.3), 16);
    auto z = encode_voxels(store, arch, g16);
    auto z_manual = encode_voxels(store, arch, resample_nearest(g16, 32));
    CHECK(z == z_manual);

    VoxelGrid g64 = rasterize(centered_sphere(0.3), 64);
    CHECK_THROWS_AS(encode_voxels(store, arch, g64), ShapeError);
}

TEST_CASE("image encoder: shapes, determinism, mismatch") {
    ImageEncoderArch arch;
    ParamStore store;
    init_image_encoder(store, arch, 9);
    CHECK(store.get("imenc.layer1.K").value.shape == std::vector<int>{16, 1, 4, 4});
    // 64 -> 32 -> 16 -> 8 -> 4, 128 channels at 4x4
    CHECK(store.get("imenc.out.W").value.shape == std::vector<int>{128 * 4 * 4, 16});

    VoxelGrid g = rasterize(centered_sphere(0.3), 64);
    VoxelGrid img = render_silhouette(g, 2, 64);
    auto z1 = encode_image(store, arch, img);
    auto z2 = encode_image(store, arch, img);
    CHECK(z1.size() == 16);
    CHECK(z1 == z2);

    VoxelGrid small = render_silhouette(g, 2, 32);
    CHECK_THROWS_AS(encode_image(store, arch, small), ShapeError);
    CHECK_THROWS_AS(encode_image(store, arch, g), ShapeError);
}

TEST_CASE("render_silhouette: constants and disc area") {
    VoxelGrid empty = VoxelGrid::empty(3, 16);
    CHECK(render_silhouette(empty, 0, 16).occupied_count() == 0);

    VoxelGrid full = VoxelGrid::empty(3, 16);
    std::fill(full.occ.begin(), full.occ.end(), 1);
    CHECK(render_silhouette(full, 1, 16).occupied_count() == 256);

    VoxelGrid sph = rasterize(centered_sphere(0.3), 64);
    for (int axis = 0; axis < 3; ++axis) {
        VoxelGrid disc = render_silhouette(sph, axis, 64);
        double area = M_PI * (0.3 * 64) * (0.3 * 64);
        CHECK(std::abs(double(disc.occupied_count()) - area) <= 0.05 * area);
    }
}

TEST_CASE("render_silhouette: axis mapping distinguishes an offset box") {
    ShapeSpec s;
    s.parts.push_back(Box{{0.3, 0.5, 0.7}, {0.08, 0.2, 0.05}});
    VoxelGrid g = rasterize(s, 32);
    VoxelGrid px = render_silhouette(g, 0, 32);  // (y,z): 0.4 x 0.1 extents
    VoxelGrid py = render_silhouette(g, 1, 32);  // (x,z): 0.16 x 0.1
    VoxelGrid pz = render_silhouette(g, 2, 32);  // (x,y): 0.16 x 0.4

    auto bbox = [](const VoxelGrid& img) {
        int ulo = 1 << 20, uhi = -1, vlo = 1 << 20, vhi = -1;
        for (int v = 0; v < img.n; ++v)
            for (int u = 0; u < img.n; ++u)
                if (img.at(u, v)) {
                    ulo = std::min(ulo, u);
                    uhi = std::max(uhi, u);
                    vlo = std::min(vlo, v);
                    vhi = std::max(vhi, v);
                }
        return std::array<int, 4>{ulo, uhi, vlo, vhi};
    };
    auto bx = bbox(px);
    CHECK(bx[1] - bx[0] + 1 == 12);  // y extent 0.4: centers 10..21
    CHECK(bx[3] - bx[2] + 1 == 3);   // z extent 0.1
    auto by = bbox(py);
    CHECK(by[1] - by[0] + 1 == 5);  // x extent 0.16
    CHECK(by[3] - by[2] + 1 == 3);
    auto bz = bbox(pz);
    CHECK(bz[1] - bz[0] + 1 == 5);
    CHECK(bz[3] - bz[2] + 1 == 12);
}

TEST_CASE("end-to-end AE gradient matches finite differences (f64 shadow)") {
    VoxelEncoderArch enc;
    enc.native_n = 8;
    enc.latent_dim = 4;
    enc.base_channels = 4;
    enc.max_channels = 8;
    DecoderArch dec;
    dec.latent_dim = 4;
    dec.widths = {10, 8};

    ParamStore store;
    init_voxel_encoder(store, enc, 71);
    init_decoder(store, dec, 72);

    VoxelGrid g = VoxelGrid::empty(3, 8);
    Rng grng(73);
    for (auto& v : g.occ) v = grng.uniform() < 0.4 ? 1 : 0;
    Tensor<float> vox = grid_to_tensor(g);

    Rng rng(74);
    Tensor<float> pts = Tensor<float>::zeros({5, 3});
    for (auto& v : pts.data) v = float(rng.uniform(0, 1));
    Tensor<float> labels = Tensor<float>::zeros({5, 1});
    Tensor<float> weights = Tensor<float>::zeros({5, 1});
    for (int i = 0; i < 5; ++i) {
        labels.at(i, 0) = float(rng.uniform_int(2));
        weights.at(i, 0) = float(rng.uniform(0.5, 2.0));
    }

    std::vector<std::string> names = voxel_encoder_param_names(enc);
    auto dnames = decoder_param_names(dec);
    names.insert(names.end(), dnames.begin(), dnames.end());
    std::vector<Tensor<double>> inputs;
    for (const auto& name : names) inputs.push_back(store.get(name).value.cast<double>());

    auto rep = fd_check(inputs, [&](Graph<double>& gr, const std::vector<NodeId>& in) {
        std::map<std::string, NodeId> bound;
        for (size_t i = 0; i < names.size(); ++i) bound[names[i]] = in[i];
        auto param = [&](const std::string& name) { return bound.at(name); };
        NodeId z = voxel_encoder_forward(gr, param, enc, gr.leaf(vox.cast<double>()));
        NodeId pred = decoder_forward(gr, param, dec, z, gr.leaf(pts.cast<double>()));
        return gr.weighted_mse(pred, gr.leaf(labels.cast<double>()), gr.leaf(weights.cast<double>()));
    }, 1e-5);
    CHECK(rep.max_rel_err < 1e-4);
}
