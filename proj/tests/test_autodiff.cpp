#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imfield/autodiff.hpp"
#include "imfield/fdcheck.hpp"
#include "imfield/params.hpp"

using namespace imfield;

namespace {

Tensor<float> make2(int r, int c, std::vector<float> v) { return Tensor<float>({r, c}, std::move(v)); }

// Independent triple-loop oracle for matmul.
Tensor<float> naive_matmul(const Tensor<float>& a, const Tensor<float>& b) {
    Tensor<float> out = Tensor<float>::zeros({a.rows(), b.cols()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            float s = 0;
            for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            out.at(i, j) = s;
        }
    return out;
}

// Direct 6-loop convolution oracle (no padding lift tricks).
Tensor<float> naive_conv3d(const Tensor<float>& x, const Tensor<float>& k, int stride, int pad) {
    int b = x.shape[0], ci = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    int co = k.shape[0], kd = k.shape[2], kh = k.shape[3], kw = k.shape[4];
    int od = (D + 2 * pad - kd) / stride + 1;
    int oh = (H + 2 * pad - kh) / stride + 1;
    int ow = (W + 2 * pad - kw) / stride + 1;
    Tensor<float> y = Tensor<float>::zeros({b, co, od, oh, ow});
    auto xat = [&](int bb, int c, int z, int yy, int xx) -> float {
        if (z < 0 || z >= D || yy < 0 || yy >= H || xx < 0 || xx >= W) return 0.f;
        return x.data[(((int64_t(bb) * ci + c) * D + z) * H + yy) * W + xx];
    };
    for (int bb = 0; bb < b; ++bb)
        for (int c = 0; c < co; ++c)
            for (int z = 0; z < od; ++z)
                for (int yy = 0; yy < oh; ++yy)
                    for (int xx = 0; xx < ow; ++xx) {
                        float s = 0;
                        for (int c2 = 0; c2 < ci; ++c2)
                            for (int dz = 0; dz < kd; ++dz)
                                for (int dy = 0; dy < kh; ++dy)
                                    for (int dx = 0; dx < kw; ++dx)
                                        s += xat(bb, c2, z * stride - pad + dz, yy * stride - pad + dy,
                                                 xx * stride - pad + dx) *
                                             k.data[(((int64_t(c) * ci + c2) * kd + dz) * kh + dy) * kw + dx];
                        y.data[(((int64_t(bb) * co + c) * od + z) * oh + yy) * ow + xx] = s;
                    }
    return y;
}

}  // namespace

TEST_CASE("linear: identity and hand arithmetic") {
    Graph<float> g;
    NodeId x = g.leaf(make2(1, 2, {1, 2}));
    NodeId W = g.leaf(make2(2, 2, {1, 0, 0, 1}));
    NodeId b = g.leaf(Tensor<float>({2}, {0, 0}));
    NodeId y = g.linear(x, W, b);
    CHECK(g.value(y).at(0, 0) == 1.0f);
    CHECK(g.value(y).at(0, 1) == 2.0f);

    NodeId x2 = g.leaf(make2(1, 2, {1, 1}));
    NodeId W2 = g.leaf(make2(2, 1, {1, 1}));
    NodeId b2 = g.leaf(Tensor<float>({1}, {0.5f}));
    NodeId y2 = g.linear(x2, W2, b2);
    CHECK(g.value(y2).at(0, 0) == doctest::Approx(2.5).epsilon(1e-7));
}

TEST_CASE("linear: random 3x4 x 4x2 matches triple-loop oracle") {
    Rng rng(41);
    Tensor<float> a = Tensor<float>::zeros({3, 4}), b = Tensor<float>::zeros({4, 2});
    for (auto& v : a.data) v = float(rng.uniform(-2, 2));
    for (auto& v : b.data) v = float(rng.uniform(-2, 2));
    Graph<float> g;
    NodeId y = g.matmul(g.leaf(a), g.leaf(b));
    Tensor<float> expect = naive_matmul(a, b);
    for (size_t i = 0; i < expect.data.size(); ++i)
        CHECK(g.value(y).data[i] == doctest::Approx(expect.data[i]).epsilon(1e-6));
}

TEST_CASE("linear: shape mismatch rejected with diagnostic") {
    Graph<float> g;
    NodeId x = g.leaf(make2(1, 3, {1, 2, 3}));
    NodeId W = g.leaf(make2(2, 2, {1, 0, 0, 1}));
    CHECK_THROWS_AS(g.matmul(x, W), ShapeError);
}

TEST_CASE("leaky_relu values") {
    Graph<float> g;
    NodeId x = g.leaf(make2(1, 3, {2.0f, -1.0f, 0.0f}));
    NodeId y = g.leaky_relu(x, 0.02f);
    CHECK(g.value(y).data[0] == 2.0f);
    CHECK(g.value(y).data[1] == doctest::Approx(-0.02).epsilon(1e-7));
    CHECK(g.value(y).data[2] == 0.0f);
    CHECK_THROWS_AS(g.leaky_relu(x, 1.5f), ContractError);
}

TEST_CASE("sigmoid values and saturation") {
    Graph<float> g;
    NodeId y = g.sigmoid(g.leaf(make2(1, 3, {0.0f, 1.0f, 200.0f})));
    CHECK(g.value(y).data[0] == 0.5f);
    double oracle = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(g.value(y).data[1] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(g.value(y).data[2] <= 1.0f);  // f32 saturation, never NaN
    CHECK(std::isfinite(g.value(y).data[2]));
}

TEST_CASE("sigmoid outputs in (0,1); leaky_relu preserves positive sign") {
    Rng rng(7);
    Graph<float> g;
    Tensor<float> x = Tensor<float>::zeros({4, 16});
    for (auto& v : x.data) v = float(rng.uniform(-12, 12));
    NodeId s = g.sigmoid(g.leaf(x));
    for (float v : g.value(s).data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    NodeId r = g.leaky_relu(g.leaf(x), 0.02f);
    for (size_t i = 0; i < x.data.size(); ++i)
        if (x.data[i] > 0) CHECK(g.value(r).data[i] == x.data[i]);
}

TEST_CASE("concat rows and empty-width input") {
    Graph<float> g;
    NodeId y = g.concat_cols(g.leaf(make2(1, 1, {1})), g.leaf(make2(1, 2, {2, 3})));
    CHECK(g.value(y).data == std::vector<float>{1, 2, 3});

    NodeId e = g.concat_cols(g.leaf(make2(2, 2, {1, 2, 3, 4})), g.leaf(Tensor<float>({2, 0}, {})));
    CHECK(g.value(e).data == std::vector<float>{1, 2, 3, 4});

    CHECK_THROWS_AS(g.concat_cols(g.leaf(make2(1, 1, {1})), g.leaf(make2(2, 1, {1, 2}))), ShapeError);
}

TEST_CASE("concat gradient splits to both inputs (finite differences)") {
    Rng rng(3);
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor({2, 2}, rng);
    auto rep = fd_check({a, b}, [](Graph<double>& g, const std::vector<NodeId>& in) {
        NodeId c = g.concat_cols(in[0], in[1]);
        return g.sum_all(g.mul(c, c));
    });
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("conv: 1x1 identity kernel and all-ones 2x2") {
    Graph<float> g;
    Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
    NodeId y = g.conv(g.leaf(x), g.leaf(Tensor<float>({1, 1, 1, 1}, {1.0f})), 2, 1, 0);
    CHECK(g.value(y).data == x.data);

    Tensor<float> ones({1, 1, 2, 2}, {1, 1, 1, 1});
    NodeId s = g.conv(g.leaf(ones), g.leaf(Tensor<float>({1, 1, 2, 2}, {1, 1, 1, 1})), 2, 1, 0);
    CHECK(g.value(s).data.size() == 1);
    CHECK(g.value(s).data[0] == 4.0f);

    // kernel larger than padded input
    CHECK_THROWS_AS(g.conv(g.leaf(x), g.leaf(Tensor<float>::zeros({1, 1, 5, 5})), 2, 1, 0), ShapeError);
}

TEST_CASE("conv3d matches direct 6-loop oracle") {
    Rng rng(11);
    Tensor<float> x = Tensor<float>::zeros({2, 2, 5, 4, 4});
    Tensor<float> k = Tensor<float>::zeros({3, 2, 3, 2, 2});
    for (auto& v : x.data) v = float(rng.uniform(-1, 1));
    for (auto& v : k.data) v = float(rng.uniform(-1, 1));
    for (int pad : {0, 1}) {
        for (int stride : {1, 2}) {
            Graph<float> g;
            NodeId y = g.conv(g.leaf(x), g.leaf(k), 3, stride, pad);
            Tensor<float> expect = naive_conv3d(x, k, stride, pad);
            REQUIRE(g.value(y).shape == expect.shape);
            for (size_t i = 0; i < expect.data.size(); ++i)
                CHECK(g.value(y).data[i] == doctest::Approx(expect.data[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("backward: linear-in-parameter and unused-parameter gradients") {
    Graph<float> g;
    NodeId w = g.leaf(make2(1, 3, {0.5f, -1.0f, 2.0f}), true);
    NodeId x = g.leaf(make2(1, 3, {3.0f, 4.0f, 5.0f}));
    NodeId unused = g.leaf(make2(1, 2, {7.0f, 8.0f}), true);
    NodeId loss = g.sum_all(g.mul(w, x));
    auto grads = g.backward(loss, std::array{w, unused});
    CHECK(g.value(grads[0]).data == std::vector<float>{3, 4, 5});
    CHECK(g.value(grads[1]).data == std::vector<float>{0, 0});

    NodeId vec = g.mul(w, x);
    CHECK_THROWS_AS(g.backward(vec, std::array{w}), ContractError);
}

TEST_CASE("finite-difference property across all differentiable ops, 20 seeds") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        auto x = random_tensor({3, 4}, rng);
        auto W = random_tensor({4, 5}, rng);
        auto b = random_tensor({5}, rng);
        auto x2 = random_tensor({3, 5}, rng);

        auto rep = fd_check({x, W, b, x2}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId h = g.linear(in[0], in[1], in[2]);
            NodeId r = g.leaky_relu(h, 0.02);
            NodeId s = g.sigmoid(g.mul(r, in[3]));
            NodeId c = g.concat_cols(r, s);
            NodeId t = g.slice_cols(c, 1, 6);
            NodeId q = g.sqrt_op(g.affine(t, 0.5, 2.0));
            NodeId rs = g.row_sum(g.recip(q));
            NodeId cs = g.col_sum(g.sub(t, g.broadcast_cols(rs, 5)));
            return g.mean_all(g.mul(cs, cs));
        }, 1e-5);
        CHECK(rep.max_rel_err < 1e-4);

        auto xc = random_tensor({1, 2, 4, 4, 4}, rng, -0.5, 0.5);
        auto kc = random_tensor({3, 2, 2, 2, 2}, rng, -0.5, 0.5);
        auto bc = random_tensor({3}, rng);
        auto rep2 = fd_check({xc, kc, bc}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId y = g.add_chan_bias(g.conv(in[0], in[1], 3, 2, 1), in[2]);
            NodeId a = g.leaky_relu(y, 0.02);
            return g.mean_all(g.mul(a, a));
        }, 1e-5);
        CHECK(rep2.max_rel_err < 1e-4);
    }
}

TEST_CASE("second-order gradients through the tape (gradient-penalty shape)") {
    // D(x) = x * w elementwise-summed; d/dx D = w, so (||dD/dx|| - 1)^2 as a
    // function of w must match finite differences.
    Rng rng(5);
    auto w = random_tensor({1, 4}, rng, 0.3, 1.2);
    auto x = random_tensor({1, 4}, rng);
    auto rep = fd_check({w}, [&x](Graph<double>& g, const std::vector<NodeId>& in) {
        NodeId xi = g.leaf(x, true);
        NodeId d = g.sum_all(g.mul(xi, in[0]));
        NodeId gx = g.backward(d, std::array{xi})[0];
        NodeId norm = g.sqrt_op(g.sum_all(g.mul(gx, gx)));
        NodeId diff = g.affine(norm, 1.0, -1.0);
        return g.mul(diff, diff);
    });
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("forward determinism: identical inputs give bit-identical outputs") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Graph<float> g;
        Tensor<float> x = Tensor<float>::zeros({8, 8});
        Tensor<float> W = Tensor<float>::zeros({8, 8});
        for (auto& v : x.data) v = float(rng.uniform(-1, 1));
        for (auto& v : W.data) v = float(rng.uniform(-1, 1));
        NodeId y = g.sigmoid(g.matmul(g.leaf(x), g.leaf(W)));
        return g.value(y).data;
    };
    CHECK(run(99) == run(99));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, t increments") {
    ParamStore store({.lr = 0.1f});
    store.add("w", Tensor<float>({2}, {1.0f, -2.0f}));
    store.adam_step({{"w", Tensor<float>({2}, {0.0f, 0.0f})}});
    CHECK(store.get("w").value.data == std::vector<float>{1.0f, -2.0f});
    CHECK(store.step() == 1);
}

TEST_CASE("adam: first-step magnitude is about lr * sign(g)") {
    ParamStore store({.lr = 0.01f});
    store.add("w", Tensor<float>({2}, {0.0f, 0.0f}));
    store.adam_step({{"w", Tensor<float>({2}, {3.7f, -0.2f})}});
    CHECK(store.get("w").value.data[0] == doctest::Approx(-0.01).epsilon(1e-3));
    CHECK(store.get("w").value.data[1] == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("adam: 100 steps on (w-3)^2 converge near 3") {
    ParamStore store({.lr = 0.1f});
    store.add("w", Tensor<float>({1}, {0.0f}));
    for (int i = 0; i < 100; ++i) {
        float w = store.get("w").value.data[0];
        store.adam_step({{"w", Tensor<float>({1}, {2.0f * (w - 3.0f)})}});
    }
    CHECK(std::abs(store.get("w").value.data[0] - 3.0f) < 0.05f);
}

TEST_CASE("adam: NaN gradient aborts naming the parameter") {
    ParamStore store;
    store.add("dec.layer0.W", Tensor<float>({1}, {1.0f}));
    try {
        store.adam_step({{"dec.layer0.W", Tensor<float>({1}, {std::nanf("")})}});
        FAIL("expected TrainError");
    } catch (const TrainError& e) {
        CHECK(std::string(e.what()).find("dec.layer0.W") != std::string::npos);
    }
}
