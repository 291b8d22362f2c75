#include "imfield/training.hpp"

#include <chrono>
#include <cmath>
#include <unordered_map>

namespace imfield {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Binds each parameter at most once so gradient collection never sees
// duplicate names (forward passes may request the same parameter repeatedly).
template <class T>
struct CachedBinder {
    ParamBinder<T>& binder;
    std::unordered_map<std::string, NodeId> seen;

    NodeId operator()(const std::string& name) {
        auto it = seen.find(name);
        if (it != seen.end()) return it->second;
        NodeId id = binder(name);
        seen.emplace(name, id);
        return id;
    }
};

// Constant (gradient-free) view of another network's parameters.
template <class T>
struct ConstBinder {
    Graph<T>& g;
    const ParamStore& store;
    std::unordered_map<std::string, NodeId> seen;

    NodeId operator()(const std::string& name) {
        auto it = seen.find(name);
        if (it != seen.end()) return it->second;
        NodeId id = g.leaf(store.get(name).value.template cast<T>());
        seen.emplace(name, id);
        return id;
    }
};

void check_finite_loss(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw TrainError("non-finite loss at " + where);
}

void validate_ae_config(const std::vector<ShapePyramid>& shapes, const TrainAeConfig& cfg) {
    if (shapes.empty()) throw ContractError("train_ae: no shapes");
    if (cfg.schedule.empty()) throw ContractError("train_ae: empty schedule");
    if (cfg.schedule.size() != cfg.epochs.size())
        throw ContractError("train_ae: schedule and epochs lengths differ");
    for (size_t i = 0; i < cfg.schedule.size(); ++i) {
        int n = cfg.schedule[i];
        if (n < 2 || (n & (n - 1)) != 0)
            throw ContractError("train_ae: schedule entry " + std::to_string(n) +
                                " is not a power of two");
        if (i > 0 && n <= cfg.schedule[i - 1])
            throw ContractError("train_ae: schedule must be strictly increasing");
        if (cfg.epochs[i] < 1) throw ContractError("train_ae: epochs must be >= 1");
        if (!cfg.points_per_step.count(n))
            throw ContractError("train_ae: no points_per_step for resolution " + std::to_string(n));
        if (cfg.scheme == SampleScheme::SurfaceBiased && !cfg.far_budget.count(n))
            throw ContractError("train_ae: no far_budget for resolution " + std::to_string(n));
    }
    if (cfg.encoder.native_n != cfg.schedule.back())
        throw ContractError("train_ae: encoder native_n " + std::to_string(cfg.encoder.native_n) +
                            " != finest scheduled resolution " + std::to_string(cfg.schedule.back()));
    if (cfg.encoder.latent_dim != cfg.decoder.latent_dim)
        throw ContractError("train_ae: encoder and decoder latent dims differ");
    if (cfg.decoder.point_dim != cfg.encoder.dims)
        throw ContractError("train_ae: decoder point_dim != encoder dims");
    for (const auto& shape : shapes) {
        if (shape.levels.size() != cfg.schedule.size())
            throw ContractError("train_ae: pyramid level count != schedule length");
        for (size_t i = 0; i < shape.levels.size(); ++i) {
            if (shape.levels[i].n != cfg.schedule[i])
                throw ContractError("train_ae: pyramid level resolution " +
                                    std::to_string(shape.levels[i].n) + " != scheduled " +
                                    std::to_string(cfg.schedule[i]));
            if (shape.levels[i].dims != cfg.encoder.dims)
                throw ContractError("train_ae: pyramid dims != encoder dims");
        }
    }
}

PointBatch draw_batch(const SampledPointSet& set, int count, int dims, Rng& rng) {
    Tensor<float> pts = Tensor<float>::zeros({count, dims});
    Tensor<float> labels = Tensor<float>::zeros({count, 1});
    Tensor<float> weights = Tensor<float>::zeros({count, 1});
    for (int i = 0; i < count; ++i) {
        const SampledPoint& p = set.points[rng.uniform_int(set.points.size())];
        for (int d = 0; d < dims; ++d) pts.data[size_t(i) * dims + d] = p.p[size_t(d)];
        labels.data[size_t(i)] = float(p.label);
        weights.data[size_t(i)] = p.weight;
    }
    return {std::move(pts), std::move(labels), std::move(weights)};
}

Tensor<float> normal_tensor(int rows, int cols, Rng& rng) {
    Tensor<float> t = Tensor<float>::zeros({rows, cols});
    for (float& v : t.data) v = float(rng.normal());
    return t;
}

// epsilon-mixed rows of real and fake, plus the epsilon column itself.
Tensor<float> mix_rows(const Tensor<float>& real, const Tensor<float>& fake, Rng& rng) {
    if (!real.same_shape(fake))
        throw ShapeError("gradient penalty batches " + real.shape_str() + " vs " + fake.shape_str());
    Tensor<float> out = real;
    const int cols = real.cols();
    for (int r = 0; r < real.rows(); ++r) {
        const float eps = float(rng.uniform());
        for (int c = 0; c < cols; ++c) {
            const size_t i = size_t(r) * cols + c;
            out.data[i] = eps * real.data[i] + (1.0f - eps) * fake.data[i];
        }
    }
    return out;
}

// (||d/dxhat sum D(xhat)||_2 - 1)^2 averaged over rows, as a graph node.
template <class T, class ParamFn>
NodeId penalty_node(Graph<T>& g, ParamFn&& param, NodeId xhat) {
    NodeId dsum = g.sum_all(gan_mlp_forward(g, param, 'd', xhat));
    NodeId gx = g.backward(dsum, std::array{xhat})[0];
    NodeId norm = g.sqrt_op(g.row_sum(g.mul(gx, gx)));
    NodeId diff = g.affine(norm, T(1), T(-1));
    return g.mean_all(g.mul(diff, diff));
}

void init_gan_params(ParamStore& store, int noise_dim, int code_dim, int hidden, uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x6a09e667f3bcc908ULL));
    auto dense = [&](const std::string& prefix, int in, int out) {
        store.add(prefix + ".W", glorot_uniform({in, out}, in, out, rng));
        store.add(prefix + ".b", Tensor<float>::zeros({out}));
    };
    dense("gan.g.1", noise_dim, hidden);
    dense("gan.g.2", hidden, hidden);
    dense("gan.g.out", hidden, code_dim);
    dense("gan.d.1", code_dim, hidden);
    dense("gan.d.2", hidden, hidden);
    dense("gan.d.out", hidden, 1);
}

}  // namespace

std::string gan_param_name(char net, int layer, char which) {
    std::string name = "gan.";
    name += net;
    name += '.';
    name += layer == 0 ? "out" : std::to_string(layer);
    name += '.';
    name += which;
    return name;
}

AeResult train_ae(const std::vector<ShapePyramid>& shapes, const TrainAeConfig& cfg,
                  const TrainHooks& hooks, const Checkpoint* resume) {
    validate_ae_config(shapes, cfg);
    const int dims = cfg.encoder.dims;
    const Rng root(cfg.seed);
    const auto t0 = Clock::now();

    ParamStore store = resume ? store_from_checkpoint(*resume, AdamConfig{float(cfg.lr)})
                              : ParamStore(AdamConfig{float(cfg.lr)});
    if (!resume) {
        init_decoder(store, cfg.decoder, root.child(0x0de, 1).next_u64());
        init_voxel_encoder(store, cfg.encoder, root.child(0xe2c, 2).next_u64());
    }
    const int resume_epoch = resume ? int(resume->meta.epoch) : 0;

    int global_epoch = 0;
    bool stopped = false;
    for (size_t stage = 0; stage < cfg.schedule.size() && !stopped; ++stage) {
        const int res = cfg.schedule[stage];
        const int stage_last = global_epoch + cfg.epochs[stage];
        if (stage_last <= resume_epoch) {  // fully covered by the checkpoint
            global_epoch = stage_last;
            continue;
        }

        std::vector<SampledPointSet> sets(shapes.size());
        for (size_t s = 0; s < shapes.size(); ++s) {
            const VoxelGrid& level = shapes[s].levels[stage];
            sets[s] = cfg.scheme == SampleScheme::Naive
                          ? sample_naive(level)
                          : sample_surface_biased(level, cfg.far_budget.at(res),
                                                  root.child(0xabcdefULL ^ uint64_t(res), s).next_u64());
        }

        if (global_epoch >= resume_epoch && hooks.on_stage_begin) hooks.on_stage_begin(res, store);
        const int points = cfg.points_per_step.at(res);

        for (int e = 1; e <= cfg.epochs[stage]; ++e) {
            ++global_epoch;
            if (global_epoch <= resume_epoch) continue;

            std::vector<size_t> order(shapes.size());
            for (size_t s = 0; s < order.size(); ++s) order[s] = s;
            Rng shuffle_rng = root.child((uint64_t(res) << 32) | uint64_t(global_epoch), 0);
            shuffle_rng.shuffle(order);

            double epoch_loss = 0.0;
            for (size_t s : order) {
                Rng draw_rng = root.child((uint64_t(res) << 32) | uint64_t(global_epoch), s + 1);
                const PointBatch batch = draw_batch(sets[s], points, dims, draw_rng);

                Graph<float> g;
                ParamBinder<float> binder = ParamBinder<float>::from_store(g, store);
                CachedBinder<float> param{binder};
                NodeId z = voxel_encoder_forward(g, param, cfg.encoder,
                                                 g.leaf(grid_to_tensor(shapes[s].levels.back())));
                NodeId pred = decoder_forward(g, param, cfg.decoder, z, g.leaf(batch.points));
                NodeId loss = weighted_loss(g, pred, batch);
                const double lval = g.value(loss).data[0];
                check_finite_loss(lval, "epoch " + std::to_string(global_epoch) + ", shape " +
                                            std::to_string(s));
                store.adam_step(binder.gradients(g, loss));
                epoch_loss += lval;
            }
            epoch_loss /= double(shapes.size());

            if (hooks.log)
                (*hooks.log) << global_epoch << '\t' << res << '\t' << epoch_loss << '\t'
                             << seconds_since(t0) << '\n';
            if (hooks.on_epoch && !hooks.on_epoch(res, global_epoch, epoch_loss, store)) {
                stopped = true;
                break;
            }
        }
        if (!stopped && hooks.on_stage_end) hooks.on_stage_end(res, store);
    }

    AeResult result{std::move(store), {}, global_epoch};
    result.codes.reserve(shapes.size());
    for (const auto& shape : shapes)
        result.codes.push_back(encode_voxels(result.store, cfg.encoder, shape.levels.back()));
    return result;
}

GanResult train_latent_gan(const std::vector<std::vector<float>>& codes, const GanConfig& cfg,
                           const TrainHooks& hooks, const Checkpoint* resume) {
    if (codes.size() < 2) throw ContractError("train_latent_gan: need at least 2 codes");
    const int d = int(codes.front().size());
    for (const auto& c : codes)
        if (int(c.size()) != d) throw ShapeError("train_latent_gan: ragged code widths");
    if (cfg.noise_dim < 1 || cfg.hidden < 1 || cfg.critic_steps < 1 || cfg.batch < 1)
        throw ContractError("train_latent_gan: bad config");
    if (!(cfg.lambda_gp > 0)) throw ContractError("train_latent_gan: lambda_gp must be positive");

    const Rng root(cfg.seed);
    const auto t0 = Clock::now();
    const AdamConfig adam{float(cfg.lr), 0.5f, 0.9f, 1e-8f};
    ParamStore store = resume ? store_from_checkpoint(*resume, adam) : ParamStore(adam);
    if (!resume) init_gan_params(store, cfg.noise_dim, d, cfg.hidden, root.child(0x9a7, 3).next_u64());
    const int resume_epoch = resume ? int(resume->meta.epoch) : 0;

    const int b = std::min<int>(cfg.batch, int(codes.size()));
    auto draw_real = [&](Rng& rng) {
        Tensor<float> real = Tensor<float>::zeros({b, d});
        for (int r = 0; r < b; ++r) {
            const auto& src = codes[rng.uniform_int(codes.size())];
            std::copy(src.begin(), src.end(), real.data.begin() + int64_t(r) * d);
        }
        return real;
    };

    double w_est = 0.0;
    int epochs_run = resume_epoch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (epoch <= resume_epoch) continue;

        for (int step = 0; step < cfg.critic_steps; ++step) {
            Rng rng = root.child(uint64_t(epoch), uint64_t(step) * 4 + 1);
            const Tensor<float> real = draw_real(rng);
            const Tensor<float> noise = normal_tensor(b, cfg.noise_dim, rng);

            Graph<float> g;
            ParamBinder<float> binder = ParamBinder<float>::from_store(g, store);
            CachedBinder<float> critic{binder};
            ConstBinder<float> frozen_gen{g, store};

            NodeId fake = gan_mlp_forward(g, frozen_gen, 'g', g.leaf(noise));
            NodeId xhat = g.leaf(mix_rows(real, g.value(fake), rng), true);
            NodeId pen = penalty_node(g, critic, xhat);
            NodeId d_real = g.mean_all(gan_mlp_forward(g, critic, 'd', g.leaf(real)));
            NodeId d_fake = g.mean_all(gan_mlp_forward(g, critic, 'd', fake));
            NodeId loss =
                g.add(g.sub(d_fake, d_real), g.affine(pen, float(cfg.lambda_gp), 0.0f));
            const double lval = g.value(loss).data[0];
            check_finite_loss(lval, "gan critic, epoch " + std::to_string(epoch));
            w_est = g.value(d_real).data[0] - g.value(d_fake).data[0];
            store.adam_step(binder.gradients(g, loss));
        }

        {
            Rng rng = root.child(uint64_t(epoch), 0xfee1);
            const Tensor<float> noise = normal_tensor(b, cfg.noise_dim, rng);
            Graph<float> g;
            ParamBinder<float> binder = ParamBinder<float>::from_store(g, store);
            CachedBinder<float> gen{binder};
            ConstBinder<float> frozen_critic{g, store};
            NodeId fake = gan_mlp_forward(g, gen, 'g', g.leaf(noise));
            NodeId loss = g.affine(g.mean_all(gan_mlp_forward(g, frozen_critic, 'd', fake)), -1.0f, 0.0f);
            check_finite_loss(g.value(loss).data[0], "gan generator, epoch " + std::to_string(epoch));
            store.adam_step(binder.gradients(g, loss));
        }

        epochs_run = epoch;
        if (hooks.log)
            (*hooks.log) << epoch << '\t' << 0 << '\t' << w_est << '\t' << seconds_since(t0) << '\n';
        if (hooks.on_epoch && !hooks.on_epoch(0, epoch, w_est, store)) break;
    }

    return GanResult{std::move(store), cfg.noise_dim, d, epochs_run};
}

double gradient_penalty(const ParamStore& critic, const Tensor<float>& real,
                        const Tensor<float>& fake, uint64_t seed) {
    Rng rng(seed);
    Graph<double> g;
    ConstBinder<double> param{g, critic};
    NodeId xhat = g.leaf(mix_rows(real, fake, rng).cast<double>(), true);
    return g.value(penalty_node(g, param, xhat)).data[0];
}

std::vector<float> gan_generate(const ParamStore& store, uint64_t seed) {
    const int noise_dim = store.get("gan.g.1.W").value.shape.at(0);
    Rng rng(seed);
    Graph<float> g;
    ConstBinder<float> param{g, store};
    NodeId out = gan_mlp_forward(g, param, 'g', g.leaf(normal_tensor(1, noise_dim, rng)));
    return g.value(out).data;
}

ParamStore train_svr(const std::vector<SvrPair>& pairs, const SvrConfig& cfg,
                     const TrainHooks& hooks, const Checkpoint* resume) {
    if (pairs.empty()) throw ContractError("train_svr: no pairs");
    const int d = int(pairs.front().code.size());
    if (d != cfg.arch.latent_dim)
        throw ShapeError("train_svr: target code width " + std::to_string(d) +
                         " != encoder latent dim " + std::to_string(cfg.arch.latent_dim));
    for (const auto& p : pairs) {
        if (int(p.code.size()) != d) throw ShapeError("train_svr: ragged code widths");
        if (p.image.dims != 2 || p.image.n != cfg.arch.side)
            throw ShapeError("train_svr: silhouette must be 2d with side " +
                             std::to_string(cfg.arch.side));
    }

    const Rng root(cfg.seed);
    const auto t0 = Clock::now();
    ParamStore store = resume ? store_from_checkpoint(*resume, AdamConfig{float(cfg.lr)})
                              : ParamStore(AdamConfig{float(cfg.lr)});
    if (!resume) init_image_encoder(store, cfg.arch, root.child(0x517, 4).next_u64());
    const int resume_epoch = resume ? int(resume->meta.epoch) : 0;

    const Tensor<float> ones = Tensor<float>::full({1, d}, 1.0f);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (epoch <= resume_epoch) continue;

        std::vector<size_t> order(pairs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = root.child(uint64_t(epoch), 0);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (size_t i : order) {
            Graph<float> g;
            ParamBinder<float> binder = ParamBinder<float>::from_store(g, store);
            CachedBinder<float> param{binder};
            NodeId pred = image_encoder_forward(g, param, cfg.arch, g.leaf(grid_to_tensor(pairs[i].image)));
            NodeId target = g.leaf(Tensor<float>({1, d}, pairs[i].code));
            NodeId loss = g.weighted_mse(pred, target, g.leaf(ones));
            const double lval = g.value(loss).data[0];
            check_finite_loss(lval, "svr epoch " + std::to_string(epoch));
            store.adam_step(binder.gradients(g, loss));
            epoch_loss += lval;
        }
        epoch_loss /= double(pairs.size());

        if (hooks.log)
            (*hooks.log) << epoch << '\t' << cfg.arch.side << '\t' << epoch_loss << '\t'
                         << seconds_since(t0) << '\n';
        if (hooks.on_epoch && !hooks.on_epoch(cfg.arch.side, epoch, epoch_loss, store)) break;
    }
    return store;
}

double svr_code_mse(const ParamStore& store, const ImageEncoderArch& arch,
                    const std::vector<SvrPair>& pairs) {
    if (pairs.empty()) throw ContractError("svr_code_mse: no pairs");
    double total = 0.0;
    for (const auto& p : pairs) {
        const std::vector<float> pred = encode_image(store, arch, p.image);
        if (pred.size() != p.code.size()) throw ShapeError("svr_code_mse: code width mismatch");
        double sq = 0.0;
        for (size_t i = 0; i < pred.size(); ++i) {
            const double diff = double(pred[i]) - double(p.code[i]);
            sq += diff * diff;
        }
        total += sq / double(pred.size());
    }
    return total / double(pairs.size());
}

std::vector<float> interpolate(const std::vector<float>& a, const std::vector<float>& b, double t) {
    if (a.size() != b.size())
        throw ShapeError("interpolate: code widths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    if (!(t >= 0.0 && t <= 1.0))
        throw ContractError("interpolate: t = " + std::to_string(t) + " outside [0,1]");
    std::vector<float> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = float((1.0 - t) * a[i] + t * b[i]);
    return out;
}

}  // namespace imfield
