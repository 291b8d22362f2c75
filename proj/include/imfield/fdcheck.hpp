#pragma once

#include <functional>
#include <string>
#include <vector>

#include "imfield/autodiff.hpp"

namespace imfield {

// Central finite differences in f64 shadow mode. `build` reconstructs the
// scalar loss from fresh leaf nodes each evaluation; the analytic path and
// the FD path therefore share nothing but the input tensors.
//
// Error per input tensor: max_i |analytic_i - fd_i| / max(scale, 1e-6) with
// scale = max_i max(|analytic_i|, |fd_i|) over that tensor.
using LossBuilder = std::function<NodeId(Graph<double>&, const std::vector<NodeId>&)>;

struct FdReport {
    double max_rel_err = 0.0;
    int worst_input = -1;
    int64_t worst_elem = -1;
};

inline FdReport fd_check(const std::vector<Tensor<double>>& inputs, const LossBuilder& build,
                         double h = 1e-3) {
    auto eval = [&](const std::vector<Tensor<double>>& xs) {
        Graph<double> g;
        std::vector<NodeId> ids;
        ids.reserve(xs.size());
        for (const auto& x : xs) ids.push_back(g.leaf(x, true));
        NodeId loss = build(g, ids);
        return g.value(loss).data[0];
    };

    Graph<double> g;
    std::vector<NodeId> ids;
    for (const auto& x : inputs) ids.push_back(g.leaf(x, true));
    NodeId loss = build(g, ids);
    std::vector<NodeId> grads = g.backward(loss, ids);

    FdReport rep;
    std::vector<Tensor<double>> work = inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Tensor<double>& analytic = g.value(grads[i]);
        double scale = 0.0;
        std::vector<double> fd(analytic.data.size());
        for (size_t e = 0; e < work[i].data.size(); ++e) {
            double keep = work[i].data[e];
            work[i].data[e] = keep + h;
            double up = eval(work);
            work[i].data[e] = keep - h;
            double dn = eval(work);
            work[i].data[e] = keep;
            fd[e] = (up - dn) / (2.0 * h);
            scale = std::max({scale, std::abs(fd[e]), std::abs(analytic.data[e])});
        }
        for (size_t e = 0; e < fd.size(); ++e) {
            double err = std::abs(analytic.data[e] - fd[e]) / std::max(scale, 1e-6);
            if (err > rep.max_rel_err) {
                rep.max_rel_err = err;
                rep.worst_input = int(i);
                rep.worst_elem = int64_t(e);
            }
        }
    }
    return rep;
}

inline Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
    Tensor<double> t = Tensor<double>::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace imfield
