#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "imfield/dataset.hpp"
#include "imfield/training.hpp"

using namespace imfield;

namespace {

TrainAeConfig tiny_ae_config(std::vector<int> schedule, std::vector<int> epochs) {
    TrainAeConfig cfg;
    cfg.schedule = std::move(schedule);
    cfg.epochs = std::move(epochs);
    cfg.points_per_step = {{16, 256}, {32, 512}};
    cfg.far_budget = {{16, 256}, {32, 1024}};
    cfg.lr = 2e-3;
    cfg.seed = 5;
    cfg.decoder.latent_dim = 8;
    cfg.decoder.point_dim = 3;
    cfg.decoder.widths = {32, 32};
    cfg.encoder.dims = 3;
    cfg.encoder.native_n = cfg.schedule.back();
    cfg.encoder.latent_dim = 8;
    cfg.encoder.base_channels = 8;
    cfg.encoder.max_channels = 32;
    return cfg;
}

std::vector<ShapePyramid> pyramids(int count, const std::vector<int>& schedule) {
    std::vector<ShapePyramid> shapes;
    for (int i = 0; i < count; ++i) {
        ShapePyramid p;
        for (int res : schedule) p.levels.push_back(rasterize(corpus_shape(i, 3, 7), res));
        shapes.push_back(std::move(p));
    }
    return shapes;
}

std::vector<uint8_t> store_bytes(const ParamStore& store) {
    return save_imck(checkpoint_from_store(store, {}));
}

// Critic that computes D(x) = w.x + const by keeping both hidden layers in
// the positive (slope 1) region of the leaky activation.
ParamStore linear_critic(const std::vector<float>& w) {
    const int d = int(w.size());
    ParamStore store;
    auto identity = [&](int n) {
        Tensor<float> t = Tensor<float>::zeros({n, n});
        for (int i = 0; i < n; ++i) t.at(i, i) = 1.0f;
        return t;
    };
    store.add("gan.d.1.W", identity(d));
    store.add("gan.d.1.b", Tensor<float>::full({d}, 100.0f));
    store.add("gan.d.2.W", identity(d));
    store.add("gan.d.2.b", Tensor<float>::full({d}, 100.0f));
    store.add("gan.d.out.W", Tensor<float>({d, 1}, w));
    store.add("gan.d.out.b", Tensor<float>({1}, {0.0f}));
    return store;
}

ParamStore zero_critic(int d, int hidden) {
    ParamStore store;
    store.add("gan.d.1.W", Tensor<float>::zeros({d, hidden}));
    store.add("gan.d.1.b", Tensor<float>::zeros({hidden}));
    store.add("gan.d.2.W", Tensor<float>::zeros({hidden, hidden}));
    store.add("gan.d.2.b", Tensor<float>::zeros({hidden}));
    store.add("gan.d.out.W", Tensor<float>::zeros({hidden, 1}));
    store.add("gan.d.out.b", Tensor<float>::zeros({1}));
    return store;
}

Tensor<float> random_batch(int rows, int cols, uint64_t seed) {
    Rng rng(seed);
    Tensor<float> t = Tensor<float>::zeros({rows, cols});
    for (float& v : t.data) v = float(rng.uniform(-2.0, 2.0));
    return t;
}

// Mirrors the mixing convention: one uniform epsilon per row, row order,
// mixed in float before widening.
Tensor<double> oracle_mix(const Tensor<float>& real, const Tensor<float>& fake, uint64_t seed) {
    Rng rng(seed);
    Tensor<float> out = real;
    for (int r = 0; r < real.rows(); ++r) {
        const float eps = float(rng.uniform());
        for (int c = 0; c < real.cols(); ++c)
            out.at(r, c) = eps * real.at(r, c) + (1.0f - eps) * fake.at(r, c);
    }
    return out.cast<double>();
}

double critic_value(const ParamStore& store, const std::vector<double>& x) {
    Graph<double> g;
    auto param = [&](const std::string& name) {
        return g.leaf(store.get(name).value.cast<double>());
    };
    NodeId out = gan_mlp_forward(g, param, 'd', g.leaf(Tensor<double>({1, int(x.size())}, x)));
    return g.value(out).data[0];
}

}  // namespace

TEST_CASE("interpolate endpoints and midpoint") {
    const std::vector<float> a = {1, 2, 3}, b = {3, 0, -1};
    CHECK(interpolate(a, b, 0.0) == a);
    CHECK(interpolate(a, b, 1.0) == b);
    CHECK(interpolate(a, b, 0.5) == std::vector<float>{2, 1, 1});
    CHECK_THROWS_AS(interpolate(a, {1, 2}, 0.5), ShapeError);
    CHECK_THROWS_AS(interpolate(a, b, 1.5), ContractError);
    CHECK_THROWS_AS(interpolate(a, b, -0.1), ContractError);
}

TEST_CASE("gradient penalty: unit-gradient critic scores zero") {
    std::vector<float> w = {1, 0, 0};
    ParamStore critic = linear_critic(w);
    const double gp = gradient_penalty(critic, random_batch(6, 3, 1), random_batch(6, 3, 2), 9);
    CHECK(gp == 0.0);

    // A non-axis unit vector is float-rounded, so merely near zero.
    ParamStore critic2 = linear_critic({0.6f, 0.8f, 0.0f});
    const double gp2 = gradient_penalty(critic2, random_batch(6, 3, 1), random_batch(6, 3, 2), 9);
    CHECK(gp2 == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("gradient penalty: zero critic scores one") {
    ParamStore critic = zero_critic(4, 8);
    const double gp = gradient_penalty(critic, random_batch(5, 4, 3), random_batch(5, 4, 4), 11);
    CHECK(gp == 1.0);
}

TEST_CASE("gradient penalty matches a finite-difference gradient-norm oracle") {
    Rng rng(21);
    ParamStore critic;
    const int d = 4, hidden = 8;
    critic.add("gan.d.1.W", glorot_uniform({d, hidden}, d, hidden, rng));
    critic.add("gan.d.1.b", glorot_uniform({hidden}, 1, hidden, rng));
    critic.add("gan.d.2.W", glorot_uniform({hidden, hidden}, hidden, hidden, rng));
    critic.add("gan.d.2.b", glorot_uniform({hidden}, 1, hidden, rng));
    critic.add("gan.d.out.W", glorot_uniform({hidden, 1}, hidden, 1, rng));
    critic.add("gan.d.out.b", glorot_uniform({1}, 1, 1, rng));

    const Tensor<float> real = random_batch(4, d, 31), fake = random_batch(4, d, 32);
    const uint64_t seed = 77;
    const double gp = gradient_penalty(critic, real, fake, seed);

    const Tensor<double> xhat = oracle_mix(real, fake, seed);
    const double h = 1e-5;
    double fd_pen = 0.0;
    for (int r = 0; r < xhat.rows(); ++r) {
        std::vector<double> x(xhat.data.begin() + int64_t(r) * d,
                              xhat.data.begin() + int64_t(r + 1) * d);
        double sq = 0.0;
        for (int c = 0; c < d; ++c) {
            std::vector<double> up = x, dn = x;
            up[size_t(c)] += h;
            dn[size_t(c)] -= h;
            const double grad = (critic_value(critic, up) - critic_value(critic, dn)) / (2 * h);
            sq += grad * grad;
        }
        const double diff = std::sqrt(sq) - 1.0;
        fd_pen += diff * diff;
    }
    fd_pen /= xhat.rows();
    CHECK(gp == doctest::Approx(fd_pen).epsilon(1e-3));
}

TEST_CASE("gradient penalty is distributionally symmetric in real/fake") {
    Rng rng(22);
    ParamStore critic;
    critic.add("gan.d.1.W", glorot_uniform({3, 8}, 3, 8, rng));
    critic.add("gan.d.1.b", Tensor<float>::zeros({8}));
    critic.add("gan.d.2.W", glorot_uniform({8, 8}, 8, 8, rng));
    critic.add("gan.d.2.b", Tensor<float>::zeros({8}));
    critic.add("gan.d.out.W", glorot_uniform({8, 1}, 8, 1, rng));
    critic.add("gan.d.out.b", Tensor<float>::zeros({1}));

    const Tensor<float> a = random_batch(8, 3, 51), b = random_batch(8, 3, 52);
    double mean_ab = 0.0, mean_ba = 0.0;
    for (uint64_t s = 0; s < 100; ++s) {
        mean_ab += gradient_penalty(critic, a, b, 1000 + s);
        mean_ba += gradient_penalty(critic, b, a, 5000 + s);
    }
    mean_ab /= 100.0;
    mean_ba /= 100.0;
    CHECK(std::abs(mean_ab - mean_ba) < 0.05 * std::max(mean_ab, mean_ba));
}

TEST_CASE("train_ae single-shape loss decreases and emits the log format") {
    TrainAeConfig cfg = tiny_ae_config({16}, {25});
    std::ostringstream log;
    std::vector<double> losses;
    TrainHooks hooks;
    hooks.log = &log;
    hooks.on_epoch = [&](int res, int epoch, double loss, const ParamStore&) {
        CHECK(res == 16);
        CHECK(epoch == int(losses.size()) + 1);
        losses.push_back(loss);
        return true;
    };

    const AeResult result = train_ae(pyramids(1, cfg.schedule), cfg, hooks);
    CHECK(result.epochs_run == 25);
    CHECK(losses.size() == 25);
    CHECK(losses.back() < 0.5 * losses.front());
    CHECK(result.codes.size() == 1);
    CHECK(result.codes[0].size() == 8);
    for (float v : result.codes[0]) CHECK(std::isfinite(v));

    std::istringstream lines(log.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        ++count;
        int epoch = 0, res = 0;
        double loss = 0, wall = -1;
        std::istringstream ls(line);
        CHECK(bool(ls >> epoch >> res >> loss >> wall));
        CHECK(epoch == count);
        CHECK(res == 16);
        CHECK(wall >= 0.0);
    }
    CHECK(count == 25);
}

TEST_CASE("progressive stages warm-start byte-identically") {
    TrainAeConfig cfg = tiny_ae_config({16, 32}, {2, 2});
    std::map<int, std::vector<uint8_t>> begin_bytes, end_bytes;
    std::vector<std::pair<int, int>> epoch_stages;
    TrainHooks hooks;
    hooks.on_stage_begin = [&](int res, const ParamStore& s) { begin_bytes[res] = store_bytes(s); };
    hooks.on_stage_end = [&](int res, const ParamStore& s) { end_bytes[res] = store_bytes(s); };
    hooks.on_epoch = [&](int res, int epoch, double, const ParamStore&) {
        epoch_stages.emplace_back(epoch, res);
        return true;
    };

    train_ae(pyramids(2, cfg.schedule), cfg, hooks);
    REQUIRE(begin_bytes.count(16));
    REQUIRE(begin_bytes.count(32));
    CHECK(end_bytes.at(16) == begin_bytes.at(32));
    CHECK(end_bytes.at(16) != begin_bytes.at(16));
    CHECK(epoch_stages == std::vector<std::pair<int, int>>{{1, 16}, {2, 16}, {3, 32}, {4, 32}});
}

TEST_CASE("train_ae is deterministic and resume reproduces the uninterrupted run") {
    TrainAeConfig cfg = tiny_ae_config({16, 32}, {2, 2});
    const auto shapes = pyramids(2, cfg.schedule);

    const AeResult full_a = train_ae(shapes, cfg);
    const AeResult full_b = train_ae(shapes, cfg);
    CHECK(store_bytes(full_a.store) == store_bytes(full_b.store));
    CHECK(full_a.codes == full_b.codes);

    // Stop after two epochs, checkpoint, resume; the result must match.
    Checkpoint mid;
    TrainHooks stop_hooks;
    stop_hooks.on_epoch = [&](int res, int epoch, double, const ParamStore& s) {
        if (epoch == 2) {
            mid = checkpoint_from_store(s, {uint32_t(res), uint32_t(epoch), cfg.seed});
            return false;
        }
        return true;
    };
    const AeResult half = train_ae(shapes, cfg, stop_hooks);
    CHECK(half.epochs_run == 2);

    const Checkpoint restored = load_imck(save_imck(mid));
    const AeResult resumed = train_ae(shapes, cfg, {}, &restored);
    CHECK(resumed.epochs_run == 4);
    CHECK(store_bytes(resumed.store) == store_bytes(full_a.store));
    CHECK(resumed.codes == full_a.codes);
}

TEST_CASE("train_ae aborts on a poisoned checkpoint with a training error") {
    TrainAeConfig cfg = tiny_ae_config({16}, {3});
    const auto shapes = pyramids(1, cfg.schedule);
    Checkpoint ck;
    TrainHooks hooks;
    hooks.on_epoch = [&](int res, int epoch, double, const ParamStore& s) {
        ck = checkpoint_from_store(s, {uint32_t(res), uint32_t(epoch), cfg.seed});
        return false;
    };
    train_ae(shapes, cfg, hooks);

    ck.arrays.at("dec.layer1.W").data[0] = std::nanf("");
    CHECK_THROWS_WITH_AS(train_ae(shapes, cfg, {}, &ck), doctest::Contains("non-finite"),
                         TrainError);
}

TEST_CASE("train_ae validates schedule, pyramid, and architecture wiring") {
    TrainAeConfig cfg = tiny_ae_config({16, 32}, {1, 1});
    const auto shapes = pyramids(1, cfg.schedule);

    TrainAeConfig bad = cfg;
    bad.schedule = {32, 16};
    CHECK_THROWS_AS(train_ae(pyramids(1, {32, 16}), bad, {}), ContractError);
    bad = cfg;
    bad.schedule = {16, 24};
    CHECK_THROWS_AS(train_ae(shapes, bad, {}), ContractError);
    bad = cfg;
    bad.epochs = {1};
    CHECK_THROWS_AS(train_ae(shapes, bad, {}), ContractError);
    bad = cfg;
    bad.encoder.native_n = 16;
    CHECK_THROWS_AS(train_ae(shapes, bad, {}), ContractError);
    bad = cfg;
    bad.decoder.latent_dim = 4;
    CHECK_THROWS_AS(train_ae(shapes, bad, {}), ContractError);
    CHECK_THROWS_AS(train_ae({}, cfg, {}), ContractError);
}

TEST_CASE("latent gan trains on clustered codes and stays in their vicinity") {
    Rng rng(61);
    std::vector<std::vector<float>> codes;
    for (int i = 0; i < 16; ++i) {
        std::vector<float> c(4);
        const float sign = i % 2 ? 1.0f : -1.0f;
        for (auto& v : c) v = sign + float(rng.uniform(-0.05, 0.05));
        codes.push_back(std::move(c));
    }

    GanConfig cfg;
    cfg.noise_dim = 4;
    cfg.hidden = 32;
    cfg.batch = 8;
    cfg.epochs = 15000;
    cfg.seed = 13;
    std::vector<double> w_series;
    TrainHooks hooks;
    hooks.on_epoch = [&](int, int, double w, const ParamStore&) {
        w_series.push_back(w);
        return true;
    };
    const GanResult result = train_latent_gan(codes, cfg, hooks);
    CHECK(result.code_dim == 4);
    CHECK(result.epochs_run == 15000);

    // Codes span roughly [-1,1]^4; the box inflated by half its extent is
    // [-2,2]^4. At least 90% of draws must land inside.
    int inside = 0;
    const int draws = 50;
    for (int i = 0; i < draws; ++i) {
        const std::vector<float> z = gan_generate(result.store, 9000 + uint64_t(i));
        CHECK(z.size() == 4);
        bool ok = true;
        for (float v : z) ok = ok && std::isfinite(v) && std::abs(v) <= 2.0f;
        inside += ok;
    }
    CHECK(inside >= 45);

    // Critic separation rises while the critic learns, then shrinks as the
    // generator catches up: the converged tail sits well below the peak
    // (seed-fixed trend).
    double peak = 0.0;
    for (size_t a = 0; a + 1000 <= w_series.size(); a += 1000) {
        double win = 0.0;
        for (size_t i = a; i < a + 1000; ++i) win += std::abs(w_series[i]);
        peak = std::max(peak, win / 1000.0);
    }
    double tail = 0.0;
    for (size_t i = w_series.size() - 1000; i < w_series.size(); ++i)
        tail += std::abs(w_series[i]);
    tail /= 1000.0;
    CHECK(peak > 2.0 * tail);

    const GanResult again = train_latent_gan(codes, cfg);
    CHECK(store_bytes(again.store) == store_bytes(result.store));

    CHECK_THROWS_AS(train_latent_gan({codes[0]}, cfg), ContractError);
    CHECK_THROWS_AS(train_latent_gan({{1.0f, 2.0f}, {1.0f}}, cfg), ShapeError);
}

TEST_CASE("svr regression reduces code error without touching anything else") {
    Rng rng(71);
    SvrConfig cfg;
    cfg.arch.side = 16;
    cfg.arch.latent_dim = 4;
    cfg.arch.base_channels = 8;
    cfg.arch.max_channels = 16;
    cfg.epochs = 60;
    cfg.lr = 3e-3;

    std::vector<SvrPair> pairs;
    for (int i = 0; i < 6; ++i) {
        VoxelGrid img = VoxelGrid::empty(2, 16);
        const int r2 = (2 + i) * (2 + i);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                img.set(x, y, 0, (x - 8) * (x - 8) + (y - 8) * (y - 8) < r2);
        std::vector<float> code(4);
        for (auto& v : code) v = float(rng.uniform(-1.0, 1.0));
        pairs.push_back({std::move(img), std::move(code)});
    }

    ParamStore init;
    init_image_encoder(init, cfg.arch, Rng(cfg.seed).child(0x517, 4).next_u64());
    const double before = svr_code_mse(init, cfg.arch, pairs);

    const ParamStore trained = train_svr(pairs, cfg);
    const double after = svr_code_mse(trained, cfg.arch, pairs);
    CHECK(after < 0.3 * before);

    const ParamStore trained2 = train_svr(pairs, cfg);
    CHECK(store_bytes(trained2) == store_bytes(trained));

    std::vector<SvrPair> bad = pairs;
    bad[0].code = {1.0f};
    CHECK_THROWS_AS(train_svr(bad, cfg), ShapeError);
    std::vector<SvrPair> wrong_side = pairs;
    wrong_side[0].image = VoxelGrid::empty(2, 32);
    CHECK_THROWS_AS(train_svr(wrong_side, cfg), ShapeError);
    CHECK_THROWS_AS(train_svr({}, cfg), ContractError);
}
