#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "imfield/decoder.hpp"
#include "imfield/fdcheck.hpp"

using namespace imfield;

namespace {

DecoderArch desk_arch() { return DecoderArch{}; }

std::vector<float> random_code(Rng& rng, int d) {
    auto z = std::vector<float>(size_t(d));
    for (float& v : z) v = float(rng.normal());
    return z;
}

Tensor<float> random_points(Rng& rng, int b, int D) {
    Tensor<float> p = Tensor<float>::zeros({b, D});
    for (float& v : p.data) v = float(rng.uniform(0, 1));
    return p;
}

}  // namespace

TEST_CASE("init_decoder: deterministic and correctly sized") {
    DecoderArch arch = desk_arch();
    ParamStore a, b;
    init_decoder(a, arch, 42);
    init_decoder(b, arch, 42);
    REQUIRE(a.entries().size() == b.entries().size());
    for (size_t i = 0; i < a.entries().size(); ++i) {
        CHECK(a.entries()[i].name == b.entries()[i].name);
        CHECK(a.entries()[i].value.data == b.entries()[i].value.data);
    }

    ParamStore c;
    init_decoder(c, arch, 43);
    CHECK(c.entries()[0].value.data != a.entries()[0].value.data);

    int64_t total = 0;
    for (const auto& e : a.entries()) total += e.value.numel();
    // 19*256+256 + 275*256+256 + 275*128+128 + 128+1
    CHECK(total == 111233);
    CHECK(decoder_param_count(arch) == total);
    CHECK(a.get("dec.layer2.W").value.shape == std::vector<int>{256 + 19, 256});
    CHECK(a.get("dec.out.W").value.shape == std::vector<int>{128, 1});
}

TEST_CASE("decoder accepts 2D points") {
    DecoderArch arch = desk_arch();
    arch.point_dim = 2;
    ParamStore store;
    init_decoder(store, arch, 1);
    Rng rng(2);
    Tensor<float> out = decode(store, arch, random_code(rng, 16), random_points(rng, 5, 2));
    CHECK(out.shape == std::vector<int>{5, 1});
}

TEST_CASE("decode: outputs in (0,1) for 1000 random (z,p)") {
    DecoderArch arch = desk_arch();
    ParamStore store;
    init_decoder(store, arch, 7);
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor<float> out = decode(store, arch, random_code(rng, 16), random_points(rng, 100, 3));
        for (float v : out.data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
}

TEST_CASE("decode: dimension mismatches rejected") {
    DecoderArch arch = desk_arch();
    ParamStore store;
    init_decoder(store, arch, 7);
    Rng rng(1);
    CHECK_THROWS_AS(decode(store, arch, random_code(rng, 8), random_points(rng, 4, 3)), ShapeError);
    CHECK_THROWS_AS(decode(store, arch, random_code(rng, 16), random_points(rng, 4, 2)), ShapeError);
}

TEST_CASE("decode: Lipschitz bound holds under small perturbations") {
    DecoderArch arch = desk_arch();
    arch.widths = {64, 64};  // keep the bound product moderate
    ParamStore store;
    init_decoder(store, arch, 11);
    double L = decoder_lipschitz_bound(store, arch);
    CHECK(L > 0.0);

    Rng rng(12);
    std::vector<float> z = random_code(rng, 16);
    const double delta = 1e-4;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<float> p = random_points(rng, 1, 3);
        std::array<double, 3> dir{rng.normal(), rng.normal(), rng.normal()};
        double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        Tensor<float> q = p;
        for (int k = 0; k < 3; ++k) {
            double moved = double(p.data[size_t(k)]) + delta * dir[size_t(k)] / norm;
            q.data[size_t(k)] = float(std::clamp(moved, 0.0, 1.0));
        }
        double actual_step = 0;
        for (int k = 0; k < 3; ++k) {
            double diff = double(q.data[size_t(k)]) - double(p.data[size_t(k)]);
            actual_step += diff * diff;
        }
        double fp = decode(store, arch, z, p).data[0];
        double fq = decode(store, arch, z, q).data[0];
        CHECK(std::abs(fp - fq) <= L * std::sqrt(actual_step) + 1e-6);
    }
}

TEST_CASE("decode: evaluating on a 4x finer grid than training stays in range") {
    DecoderArch arch = desk_arch();
    ParamStore store;
    init_decoder(store, arch, 21);
    Rng rng(22);
    std::vector<float> z = random_code(rng, 16);
    int n = 64;  // vs a 16^3 training grid
    Tensor<float> pts = Tensor<float>::zeros({n * n, 3});
    for (int i = 0; i < n * n; ++i) {
        pts.at(i, 0) = float((i % n + 0.5) / n);
        pts.at(i, 1) = float((i / n % n + 0.5) / n);
        pts.at(i, 2) = 0.5f;
    }
    Tensor<float> out = decode(store, arch, z, pts);
    REQUIRE(out.rows() == n * n);
    for (float v : out.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("weighted_loss: hand arithmetic and degenerate weights") {
    Graph<float> g;
    PointBatch batch;
    batch.labels = Tensor<float>({2, 1}, {1.0f, 0.0f});
    batch.weights = Tensor<float>({2, 1}, {1.0f, 3.0f});
    NodeId pred = g.leaf(Tensor<float>({2, 1}, {0.5f, 0.0f}));
    NodeId loss = weighted_loss(g, pred, batch);
    CHECK(g.value(loss).data[0] == doctest::Approx(0.0625).epsilon(1e-7));

    NodeId exact = g.leaf(batch.labels);
    CHECK(g.value(weighted_loss(g, exact, batch)).data[0] == 0.0f);

    PointBatch uniform = batch;
    uniform.weights = Tensor<float>({2, 1}, {2.0f, 2.0f});
    float mse = (0.5f * 0.5f + 0.0f) / 2.0f;
    CHECK(g.value(weighted_loss(g, pred, uniform)).data[0] == doctest::Approx(mse).epsilon(1e-7));

    PointBatch bad = batch;
    bad.weights = Tensor<float>({2, 1}, {1.0f, 0.0f});
    CHECK_THROWS_AS(weighted_loss(g, pred, bad), ContractError);
    PointBatch empty;
    empty.labels = Tensor<float>::zeros({0, 1});
    empty.weights = Tensor<float>::zeros({0, 1});
    CHECK_THROWS_AS(weighted_loss(g, g.leaf(Tensor<float>::zeros({0, 1})), empty), ContractError);
}

TEST_CASE("full decoder + loss gradient matches finite differences (f64 shadow)") {
    DecoderArch arch = desk_arch();
    arch.latent_dim = 4;
    arch.widths = {12, 10};
    ParamStore store;
    init_decoder(store, arch, 31);

    Rng rng(32);
    Tensor<float> pts = random_points(rng, 6, 3);
    Tensor<float> labels = Tensor<float>::zeros({6, 1});
    Tensor<float> weights = Tensor<float>::zeros({6, 1});
    for (int i = 0; i < 6; ++i) {
        labels.at(i, 0) = float(rng.uniform_int(2));
        weights.at(i, 0) = float(rng.uniform(0.5, 4.0));
    }

    std::vector<std::string> names = decoder_param_names(arch);
    std::vector<Tensor<double>> inputs;
    for (const auto& name : names) inputs.push_back(store.get(name).value.cast<double>());
    Tensor<double> zcode = Tensor<double>::zeros({1, 4});
    for (auto& v : zcode.data) v = rng.normal();
    inputs.push_back(zcode);

    auto rep = fd_check(inputs, [&](Graph<double>& g, const std::vector<NodeId>& in) {
        std::map<std::string, NodeId> bound;
        for (size_t i = 0; i < names.size(); ++i) bound[names[i]] = in[i];
        auto param = [&](const std::string& name) { return bound.at(name); };
        NodeId pred = decoder_forward(g, param, arch, in.back(), g.leaf(pts.cast<double>()));
        return g.weighted_mse(pred, g.leaf(labels.cast<double>()), g.leaf(weights.cast<double>()));
    }, 1e-5);  // small h keeps probes off the leaky_relu kinks
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("weight scale invariance: c*w leaves loss and gradients nearly unchanged") {
    DecoderArch arch = desk_arch();
    arch.latent_dim = 4;
    arch.widths = {16, 12};
    ParamStore store;
    init_decoder(store, arch, 51);

    Rng rng(52);
    Tensor<float> pts = random_points(rng, 32, 3);
    PointBatch batch;
    batch.points = pts;
    batch.labels = Tensor<float>::zeros({32, 1});
    batch.weights = Tensor<float>::zeros({32, 1});
    for (int i = 0; i < 32; ++i) {
        batch.labels.at(i, 0) = float(rng.uniform_int(2));
        batch.weights.at(i, 0) = float(rng.uniform(0.5, 8.0));
    }
    std::vector<float> z = random_code(rng, 4);

    auto run = [&](const PointBatch& b) {
        Graph<float> g;
        auto binder = ParamBinder<float>::from_store(g, store);
        NodeId zn = g.leaf(Tensor<float>({1, 4}, std::vector<float>(z)));
        NodeId pred = decoder_forward(g, binder, arch, zn, g.leaf(pts));
        NodeId loss = weighted_loss(g, pred, b);
        auto grads = binder.gradients(g, loss);
        return std::make_pair(g.value(loss).data[0], grads);
    };

    PointBatch scaled = batch;
    for (float& w : scaled.weights.data) w *= 7.25f;  // exact in binary fp

    auto [l1, g1] = run(batch);
    auto [l2, g2] = run(scaled);
    CHECK(std::abs(l1 - l2) <= 1e-6f * std::max(std::abs(l1), 1e-6f));
    REQUIRE(g1.size() == g2.size());
    for (size_t i = 0; i < g1.size(); ++i) {
        double scale = 0;
        for (float v : g1[i].second.data) scale = std::max(scale, double(std::abs(v)));
        for (size_t k = 0; k < g1[i].second.data.size(); ++k) {
            double diff = std::abs(double(g1[i].second.data[k]) - double(g2[i].second.data[k]));
            CHECK(diff <= 1e-6 * std::max(scale, 1e-6));
        }
    }
}
