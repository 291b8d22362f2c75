#include "imfield/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace imfield {

std::string decoder_param_name(size_t layer, char which) {
    if (layer == 0) return std::string("dec.out.") + which;
    return "dec.layer" + std::to_string(layer) + "." + which;
}

std::vector<std::string> decoder_param_names(const DecoderArch& arch) {
    std::vector<std::string> names;
    for (size_t i = 1; i <= arch.widths.size(); ++i) {
        names.push_back(decoder_param_name(i, 'W'));
        names.push_back(decoder_param_name(i, 'b'));
    }
    names.push_back(decoder_param_name(0, 'W'));
    names.push_back(decoder_param_name(0, 'b'));
    return names;
}

namespace {

// Input width of hidden layer i (1-based) under the skip rule.
int layer_in_width(const DecoderArch& arch, size_t i) {
    int base = arch.latent_dim + arch.point_dim;
    if (i == 1) return base;
    int prev = arch.widths[i - 2];
    return arch.skip ? prev + base : prev;
}

}  // namespace

int64_t decoder_param_count(const DecoderArch& arch) {
    int64_t total = 0;
    for (size_t i = 1; i <= arch.widths.size(); ++i) {
        int in = layer_in_width(arch, i), out = arch.widths[i - 1];
        total += int64_t(in) * out + out;
    }
    total += int64_t(arch.widths.back()) * 1 + 1;
    return total;
}

void init_decoder(ParamStore& store, const DecoderArch& arch, uint64_t seed) {
    if (arch.widths.empty()) throw ContractError("decoder needs at least one hidden layer");
    Rng rng(seed);
    for (size_t i = 1; i <= arch.widths.size(); ++i) {
        int in = layer_in_width(arch, i), out = arch.widths[i - 1];
        store.add(decoder_param_name(i, 'W'), glorot_uniform({in, out}, in, out, rng));
        store.add(decoder_param_name(i, 'b'), Tensor<float>::zeros({out}));
    }
    int last = arch.widths.back();
    store.add(decoder_param_name(0, 'W'), glorot_uniform({last, 1}, last, 1, rng));
    store.add(decoder_param_name(0, 'b'), Tensor<float>::zeros({1}));
}

Tensor<float> decode(const ParamStore& store, const DecoderArch& arch, const std::vector<float>& z,
                     const Tensor<float>& pts) {
    Graph<float> g;
    auto binder = ParamBinder<float>::from_store(g, store);
    NodeId zn = g.leaf(Tensor<float>({1, int(z.size())}, std::vector<float>(z)));
    NodeId out = decoder_forward(g, binder, arch, zn, g.leaf(pts));
    return g.value(out);
}

namespace {

// min(Frobenius, sqrt(norm1 * norminf)): both dominate the spectral norm.
double opnorm_bound(const Tensor<float>& W) {
    int rows = W.rows(), cols = W.cols();
    double fro = 0;
    std::vector<double> colsum(size_t(cols), 0.0), rowsum(size_t(rows), 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double v = std::abs(double(W.at(r, c)));
            fro += v * v;
            rowsum[size_t(r)] += v;
            colsum[size_t(c)] += v;
        }
    double n1 = *std::max_element(colsum.begin(), colsum.end());
    double ninf = *std::max_element(rowsum.begin(), rowsum.end());
    return std::min(std::sqrt(fro), std::sqrt(n1 * ninf));
}

}  // namespace

double decoder_lipschitz_bound(const ParamStore& store, const DecoderArch& arch) {
    // S_i bounds the Jacobian norm of hidden layer i w.r.t. the raw input;
    // with a skip the layer sees [h_{i-1}; input], so the bound splits into
    // the two row blocks of W.
    double s = 0;
    int base = arch.latent_dim + arch.point_dim;
    for (size_t i = 1; i <= arch.widths.size(); ++i) {
        const Tensor<float>& W = store.get(decoder_param_name(i, 'W')).value;
        if (i == 1) {
            s = opnorm_bound(W);
            continue;
        }
        if (!arch.skip) {
            s *= opnorm_bound(W);
            continue;
        }
        int prev = W.rows() - base;
        Tensor<float> a = Tensor<float>::zeros({prev, W.cols()});
        Tensor<float> b = Tensor<float>::zeros({base, W.cols()});
        for (int r = 0; r < prev; ++r)
            for (int c = 0; c < W.cols(); ++c) a.at(r, c) = W.at(r, c);
        for (int r = 0; r < base; ++r)
            for (int c = 0; c < W.cols(); ++c) b.at(r, c) = W.at(prev + r, c);
        s = opnorm_bound(a) * s + opnorm_bound(b);
    }
    return 0.25 * opnorm_bound(store.get(decoder_param_name(0, 'W')).value) * s;
}

}  // namespace imfield
