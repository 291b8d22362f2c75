#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "imfield/checkpoint.hpp"
#include "imfield/decoder.hpp"
#include "imfield/encoders.hpp"
#include "imfield/sampling.hpp"
#include "imfield/voxel.hpp"

namespace imfield {

// One shape at every scheduled resolution, coarse to fine. The finest level
// doubles as the encoder input at all stages.
struct ShapePyramid {
    std::vector<VoxelGrid> levels;
};

struct TrainAeConfig {
    std::vector<int> schedule = {16, 32};  // strictly increasing powers of two
    std::vector<int> epochs = {80, 120};   // one entry per stage
    std::map<int, int> points_per_step = {{16, 2048}, {32, 4096}, {64, 4096}};
    std::map<int, int64_t> far_budget = {{16, 1024}, {32, 4096}, {64, 16384}};
    SampleScheme scheme = SampleScheme::SurfaceBiased;
    double lr = 1e-3;
    uint64_t seed = 1;
    DecoderArch decoder;
    VoxelEncoderArch encoder;  // native_n must equal schedule.back()
};

// Epoch callbacks: `epoch` counts globally across stages from 1. Returning
// false from on_epoch stops training early (the result is still final).
struct TrainHooks {
    std::ostream* log = nullptr;  // epoch \t stage_resolution \t loss \t wallclock_s
    std::function<bool(int stage_res, int epoch, double loss, const ParamStore&)> on_epoch;
    std::function<void(int stage_res, const ParamStore&)> on_stage_begin;
    std::function<void(int stage_res, const ParamStore&)> on_stage_end;
};

struct AeResult {
    ParamStore store;
    std::vector<std::vector<float>> codes;  // per shape, from the final encoder
    int epochs_run = 0;
};

// Progressive autoencoder training. Stages run in schedule order on the same
// parameter store, so stage k+1 starts from stage k's weights verbatim.
// `resume` restarts mid-run from a checkpoint produced by this build; all
// per-step randomness is keyed by (seed, stage, epoch, shape), which makes a
// resumed run byte-identical to an uninterrupted one.
AeResult train_ae(const std::vector<ShapePyramid>& shapes, const TrainAeConfig& cfg,
                  const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

std::string gan_param_name(char net, int layer, char which);  // layer 0 = output

struct GanConfig {
    int noise_dim = 16;
    int hidden = 128;
    double lambda_gp = 10.0;
    int critic_steps = 5;
    int epochs = 2000;
    int batch = 16;  // capped by the number of codes
    double lr = 1e-4;
    uint64_t seed = 2;
};

struct GanResult {
    ParamStore store;  // generator and critic parameters
    int noise_dim = 0;
    int code_dim = 0;
    int epochs_run = 0;
};

// Two-hidden-layer MLPs; hidden activations are leaky (slope 0.2), outputs
// linear.
template <class T, class ParamFn>
NodeId gan_mlp_forward(Graph<T>& g, ParamFn&& param, char net, NodeId x) {
    NodeId h = x;
    for (int layer = 1; layer <= 2; ++layer)
        h = g.leaky_relu(
            g.linear(h, param(gan_param_name(net, layer, 'W')), param(gan_param_name(net, layer, 'b'))),
            T(0.2));
    return g.linear(h, param(gan_param_name(net, 0, 'W')), param(gan_param_name(net, 0, 'b')));
}

// Wasserstein critic training with the unit-gradient-norm penalty on random
// interpolates between real and fake batches; critic_steps critic updates per
// generator update. The logged loss is the critic's Wasserstein estimate
// mean D(real) - mean D(fake).
GanResult train_latent_gan(const std::vector<std::vector<float>>& codes, const GanConfig& cfg,
                           const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

// mean over rows of (||d D/d x_hat||_2 - 1)^2 with x_hat = eps*real +
// (1-eps)*fake, eps ~ U(0,1) per row from `seed`. Exact double-backprop
// through the tape, no finite differences.
double gradient_penalty(const ParamStore& critic, const Tensor<float>& real,
                        const Tensor<float>& fake, uint64_t seed);

// One generated code; noise is standard normal from Rng(seed). Dimensions are
// read off the stored parameter shapes.
std::vector<float> gan_generate(const ParamStore& store, uint64_t seed);

struct SvrPair {
    VoxelGrid image;  // side^2 silhouette
    std::vector<float> code;
};

struct SvrConfig {
    int epochs = 300;
    double lr = 1e-3;
    uint64_t seed = 3;
    ImageEncoderArch arch;
};

// Regresses latent codes from silhouettes. Only image-encoder parameters
// live in the returned store; the decoder that produced the target codes is
// never touched.
ParamStore train_svr(const std::vector<SvrPair>& pairs, const SvrConfig& cfg,
                     const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

// Mean squared code error per latent dimension over the pairs.
double svr_code_mse(const ParamStore& store, const ImageEncoderArch& arch,
                    const std::vector<SvrPair>& pairs);

// (1-t)*a + t*b with t in [0,1].
std::vector<float> interpolate(const std::vector<float>& a, const std::vector<float>& b, double t);

}  // namespace imfield
