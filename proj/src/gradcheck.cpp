#include "imfield/gradcheck.hpp"

#include <memory>

#include "imfield/decoder.hpp"
#include "imfield/encoders.hpp"

namespace imfield {
namespace {

constexpr double kTol = 1e-4;

// Worst report over 20 seeds of a one-input-set check.
FdReport sweep(const std::function<FdReport(Rng&)>& one) {
    FdReport worst;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(7000 + seed);
        FdReport rep = one(rng);
        if (rep.max_rel_err > worst.max_rel_err) worst = rep;
    }
    return worst;
}

// Scalarize any output so every op can be checked through the same driver.
NodeId squash(Graph<double>& g, NodeId x) { return g.mean_all(g.mul(x, x)); }

FdReport check_composition(Rng& rng) {
    VoxelEncoderArch enc;
    enc.dims = 3;
    enc.native_n = 8;
    enc.latent_dim = 4;
    enc.base_channels = 4;
    enc.max_channels = 8;
    DecoderArch dec;
    dec.latent_dim = 4;
    dec.point_dim = 3;
    dec.widths = {8, 8};

    ParamStore store;
    init_voxel_encoder(store, enc, rng.next_u64());
    init_decoder(store, dec, rng.next_u64());

    VoxelGrid grid = VoxelGrid::empty(3, 8);
    for (int64_t i = 0; i < grid.cell_count(); ++i) grid.occ[size_t(i)] = rng.uniform() < 0.4;

    const int b = 16;
    PointBatch batch;
    batch.points = Tensor<float>::zeros({b, 3});
    batch.labels = Tensor<float>::zeros({b, 1});
    batch.weights = Tensor<float>::zeros({b, 1});
    for (int i = 0; i < b; ++i) {
        for (int d = 0; d < 3; ++d) batch.points.data[size_t(i) * 3 + d] = float(rng.uniform());
        batch.labels.data[size_t(i)] = rng.uniform() < 0.5 ? 0.0f : 1.0f;
        batch.weights.data[size_t(i)] = float(rng.uniform(0.5, 2.0));
    }

    std::vector<std::string> names;
    std::vector<Tensor<double>> inputs;
    for (const auto& e : store.entries()) {
        names.push_back(e.name);
        inputs.push_back(e.value.cast<double>());
    }

    return fd_check(
        inputs,
        [&](Graph<double>& g, const std::vector<NodeId>& in) {
            auto param = [&](const std::string& name) {
                for (size_t i = 0; i < names.size(); ++i)
                    if (names[i] == name) return in[i];
                throw ContractError("composition check: unknown parameter " + name);
            };
            NodeId z = voxel_encoder_forward(g, param, enc, g.leaf(grid_to_tensor(grid).cast<double>()));
            NodeId pred = decoder_forward(g, param, dec, z, g.leaf(batch.points.cast<double>()));
            return g.weighted_mse(pred, g.leaf(batch.labels.cast<double>()),
                                  g.leaf(batch.weights.cast<double>()));
        },
        1e-5);
}

}  // namespace

std::vector<GradCheckCase> gradcheck_cases() {
    std::vector<GradCheckCase> cases;
    auto add = [&](std::string name, std::function<FdReport(Rng&)> one) {
        cases.push_back({std::move(name), false, [one = std::move(one)] { return sweep(one); }});
    };

    add("matmul", [](Rng& rng) {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
        auto at = random_tensor({4, 3}, rng), bt = random_tensor({2, 4}, rng);
        return fd_check({a, b, at, bt}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId plain = g.matmul(in[0], in[1]);
            NodeId ta = g.matmul(in[2], in[1], true, false);
            NodeId tb = g.matmul(in[0], in[3], false, true);
            NodeId tt = g.matmul(in[2], in[3], true, true);
            return g.add(g.add(squash(g, plain), squash(g, ta)),
                         g.add(squash(g, tb), squash(g, tt)));
        });
    });
    add("add/sub/mul", [](Rng& rng) {
        auto a = random_tensor({3, 5}, rng), b = random_tensor({3, 5}, rng);
        return fd_check({a, b}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.mul(g.add(in[0], in[1]), g.sub(in[0], in[1])));
        });
    });
    add("affine", [](Rng& rng) {
        auto x = random_tensor({2, 6}, rng);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.affine(in[0], 1.7, -0.3));
        });
    });
    add("add_row_vec/linear", [](Rng& rng) {
        auto x = random_tensor({4, 3}, rng), W = random_tensor({3, 5}, rng);
        auto b = random_tensor({5}, rng);
        return fd_check({x, W, b}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.linear(in[0], in[1], in[2]));
        });
    });
    add("leaky_relu", [](Rng& rng) {
        auto x = random_tensor({4, 4}, rng);
        return fd_check(
            {x},
            [](Graph<double>& g, const std::vector<NodeId>& in) {
                return squash(g, g.leaky_relu(in[0], 0.02));
            },
            1e-5);
    });
    add("sigmoid", [](Rng& rng) {
        auto x = random_tensor({4, 4}, rng, -3.0, 3.0);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.sigmoid(in[0]));
        });
    });
    add("concat_cols/slice_cols", [](Rng& rng) {
        auto a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng);
        return fd_check({a, b}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId c = g.concat_cols(in[0], in[1]);
            return squash(g, g.slice_cols(c, 1, 5));
        });
    });
    add("pad_cols", [](Rng& rng) {
        auto x = random_tensor({3, 3}, rng);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.pad_cols(in[0], 6, 2));
        });
    });
    add("broadcast rows/cols/scalar", [](Rng& rng) {
        auto r = random_tensor({1, 4}, rng), c = random_tensor({3, 1}, rng);
        auto s = random_tensor({1, 1}, rng);
        return fd_check({r, c, s}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId bs = g.broadcast_scalar(in[2], {3, 4});
            NodeId m = g.mul(g.broadcast_rows(in[0], 3), g.add(g.broadcast_cols(in[1], 4), bs));
            return squash(g, m);
        });
    });
    add("row_sum/col_sum/sum_all/mean_all", [](Rng& rng) {
        auto x = random_tensor({3, 4}, rng);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId a = squash(g, g.row_sum(in[0]));
            NodeId b = squash(g, g.col_sum(in[0]));
            return g.add(g.add(a, b), g.add(g.sum_all(in[0]), g.mean_all(in[0])));
        });
    });
    add("sqrt/recip", [](Rng& rng) {
        auto x = random_tensor({3, 4}, rng, 0.5, 2.0);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.recip(g.sqrt_op(in[0])));
        });
    });
    add("reshape", [](Rng& rng) {
        auto x = random_tensor({2, 6}, rng);
        return fd_check({x}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.reshape(in[0], {3, 4}));
        });
    });
    add("conv2d + chan bias", [](Rng& rng) {
        auto x = random_tensor({1, 2, 6, 6}, rng, -0.5, 0.5);
        auto k = random_tensor({3, 2, 4, 4}, rng, -0.5, 0.5);
        auto b = random_tensor({3}, rng);
        return fd_check({x, k, b}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.add_chan_bias(g.conv(in[0], in[1], 2, 2, 1), in[2]));
        });
    });
    add("conv3d + chan_sum", [](Rng& rng) {
        auto x = random_tensor({1, 2, 4, 4, 4}, rng, -0.5, 0.5);
        auto k = random_tensor({3, 2, 2, 2, 2}, rng, -0.5, 0.5);
        return fd_check({x, k}, [](Graph<double>& g, const std::vector<NodeId>& in) {
            return squash(g, g.chan_sum(g.conv(in[0], in[1], 3, 2, 1)));
        });
    });
    add("weighted_mse", [](Rng& rng) {
        auto p = random_tensor({6, 1}, rng), l = random_tensor({6, 1}, rng);
        auto w = random_tensor({6, 1}, rng, 0.5, 2.0);
        return fd_check({p, l}, [&w](Graph<double>& g, const std::vector<NodeId>& in) {
            return g.weighted_mse(in[0], in[1], g.leaf(w));
        });
    });
    add("second-order (penalty shape)", [](Rng& rng) {
        auto w = random_tensor({1, 5}, rng, 0.3, 1.2);
        auto x = random_tensor({1, 5}, rng);
        return fd_check({w}, [&x](Graph<double>& g, const std::vector<NodeId>& in) {
            NodeId xi = g.leaf(x, true);
            NodeId d = g.sum_all(g.mul(xi, in[0]));
            NodeId gx = g.backward(d, std::array{xi})[0];
            NodeId norm = g.sqrt_op(g.sum_all(g.mul(gx, gx)));
            NodeId diff = g.affine(norm, 1.0, -1.0);
            return g.mul(diff, diff);
        });
    });

    cases.push_back({"encoder+decoder+loss composition", false, [] {
                         FdReport worst;
                         for (uint64_t seed = 0; seed < 3; ++seed) {
                             Rng rng(9100 + seed);
                             FdReport rep = check_composition(rng);
                             if (rep.max_rel_err > worst.max_rel_err) worst = rep;
                         }
                         return worst;
                     }});

    // The loss silently changes between the analytic pass and the FD probes,
    // so the reported gradient is wrong by construction. The harness must
    // catch it; a pass here means the comparison is broken.
    cases.push_back({"corrupted-gradient fixture", true, [] {
                         Rng rng(31);
                         auto x = random_tensor({3, 3}, rng);
                         auto calls = std::make_shared<int>(0);
                         return fd_check({x}, [calls](Graph<double>& g, const std::vector<NodeId>& in) {
                             const double slope = (*calls)++ == 0 ? 0.0 : 0.05;
                             NodeId base = g.mean_all(g.mul(in[0], in[0]));
                             return g.add(base, g.affine(g.mean_all(in[0]), slope, 0.0));
                         });
                     }});

    return cases;
}

GradcheckOutcome run_gradcheck(std::ostream& out) {
    GradcheckOutcome outcome;
    double worst_genuine = -1.0;
    for (const auto& c : gradcheck_cases()) {
        const FdReport rep = c.run();
        const bool within = rep.max_rel_err < kTol;
        const bool ok = c.expect_failure ? !within : within;
        out << (ok ? "ok   " : "FAIL ") << c.name << "  max rel err " << rep.max_rel_err
            << (c.expect_failure ? "  (must exceed tolerance)" : "") << "\n";
        if (!ok) outcome.pass = false;
        if (!c.expect_failure && rep.max_rel_err > worst_genuine) {
            worst_genuine = rep.max_rel_err;
            outcome.worst_name = c.name;
            outcome.worst_err = rep.max_rel_err;
        }
    }
    out << (outcome.pass ? "gradcheck: all cases passed" : "gradcheck: FAILURE") << "; worst op '"
        << outcome.worst_name << "' at rel err " << outcome.worst_err << "\n";
    return outcome;
}

}  // namespace imfield
