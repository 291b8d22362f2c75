#include "imfield/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "imfield/metrics.hpp"

namespace imfield {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string run_path(const Config& cfg, const std::string& name) {
    return (fs::path(cfg.get("run.dir")) / name).string();
}

Checkpoint load_checkpoint_or(const std::string& path, const std::string& hint) {
    if (!fs::exists(path)) throw ConfigError(path + " not found; " + hint);
    return load_imck_file(path);
}

// All non-optimizer arrays as plain values, for inference over a checkpoint.
ParamStore value_store(const Checkpoint& c) {
    ParamStore s;
    for (const auto& [name, t] : c.arrays)
        if (name.rfind("opt.", 0) != 0) s.add(name, t);
    return s;
}

Tensor<float> arch_vec(std::vector<float> v) {
    const int n = int(v.size());
    return Tensor<float>({n}, std::move(v));
}

void embed_decoder_arch(Checkpoint& c, const DecoderArch& a) {
    std::vector<float> v = {float(a.latent_dim), float(a.point_dim), a.skip ? 1.0f : 0.0f,
                            a.alpha};
    for (int w : a.widths) v.push_back(float(w));
    c.arrays["arch.dec"] = arch_vec(std::move(v));
}

DecoderArch decoder_arch_from(const Checkpoint& c) {
    if (!c.has("arch.dec"))
        throw FormatError("checkpoint has no embedded decoder architecture");
    const auto& v = c.at("arch.dec").data;
    DecoderArch a;
    a.latent_dim = int(v.at(0));
    a.point_dim = int(v.at(1));
    a.skip = v.at(2) != 0.0f;
    a.alpha = v.at(3);
    a.widths.clear();
    for (size_t i = 4; i < v.size(); ++i) a.widths.push_back(int(v[i]));
    return a;
}

void embed_voxel_arch(Checkpoint& c, const VoxelEncoderArch& a) {
    c.arrays["arch.enc"] = arch_vec({float(a.dims), float(a.native_n), float(a.latent_dim),
                                     float(a.base_channels), float(a.max_channels), a.alpha});
}

VoxelEncoderArch voxel_arch_from(const Checkpoint& c) {
    if (!c.has("arch.enc"))
        throw ConfigError("checkpoint has no shape encoder; use an autoencoder checkpoint");
    const auto& v = c.at("arch.enc").data;
    VoxelEncoderArch a;
    a.dims = int(v.at(0));
    a.native_n = int(v.at(1));
    a.latent_dim = int(v.at(2));
    a.base_channels = int(v.at(3));
    a.max_channels = int(v.at(4));
    a.alpha = v.at(5);
    return a;
}

void embed_image_arch(Checkpoint& c, const ImageEncoderArch& a) {
    c.arrays["arch.img"] = arch_vec({float(a.side), float(a.conv_layers), float(a.latent_dim),
                                     float(a.base_channels), float(a.max_channels), a.alpha});
}

ImageEncoderArch image_arch_from(const Checkpoint& c) {
    if (!c.has("arch.img"))
        throw ConfigError("checkpoint has no image encoder; run train-svr first");
    const auto& v = c.at("arch.img").data;
    ImageEncoderArch a;
    a.side = int(v.at(0));
    a.conv_layers = int(v.at(1));
    a.latent_dim = int(v.at(2));
    a.base_channels = int(v.at(3));
    a.max_channels = int(v.at(4));
    a.alpha = v.at(5);
    return a;
}

std::string epoch_name(const std::string& prefix, int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_epoch_%06d.imck", epoch);
    return prefix + buf;
}

Dataset open_dataset(const Config& cfg) { return load_dataset(cfg.get("dataset.dir")); }

void require_resolution(const Dataset& ds, int res) {
    if (!std::count(ds.resolutions.begin(), ds.resolutions.end(), res))
        throw ConfigError("dataset lacks resolution " + std::to_string(res) +
                          "; rerun gen-data with data.resolutions including it");
}

std::vector<float> code_of(const Checkpoint& ae, int id) {
    const Tensor<float>& codes = ae.at("codes");
    const auto& ids = ae.at("code_ids").data;
    for (size_t r = 0; r < ids.size(); ++r) {
        if (int(ids[r]) != id) continue;
        const int d = codes.cols();
        const auto begin = codes.data.begin() + int64_t(r) * d;
        return std::vector<float>(begin, begin + d);
    }
    throw ConfigError("checkpoint has no code for shape id " + std::to_string(id) +
                      "; rerun train-ae on this dataset");
}

std::vector<float> read_code_file(const std::string& path, int d) {
    const std::vector<uint8_t> bytes = read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::vector<float> z;
    double v = 0.0;
    while (in >> v) z.push_back(float(v));
    if (!in.eof()) throw FormatError(path + ": expected whitespace-separated numbers");
    if (int(z.size()) != d)
        throw FormatError(path + ": expected " + std::to_string(d) + " values, got " +
                          std::to_string(z.size()));
    return z;
}

const DatasetEntry& entry_or_usage(const Dataset& ds, int id) {
    for (const auto& e : ds.entries)
        if (e.id == id) return e;
    throw ConfigError("shape id " + std::to_string(id) + " is not in the dataset manifest");
}

DecodeResult write_decoded(const Config& cfg, const ParamStore& store, const DecoderArch& dec,
                           const std::vector<float>& z, int res, const std::string& out) {
    const FieldGrid f = sample_field(store, dec, z, res);
    DecodeResult r;
    r.dims = dec.point_dim;
    r.res = res;
    r.out_path = out;
    if (dec.point_dim == 3) {
        const Mesh mesh = marching_cubes(f);
        write_file(out, export_obj(mesh));
        r.vertices = int64_t(mesh.vertices.size());
        r.triangles = int64_t(mesh.triangles.size());
        r.empty = mesh.vertices.empty();
    } else {
        std::vector<float> gray = f.values;
        if (cfg.get_bool("decode.binarize"))
            for (float& v : gray) v = v > 0.5f ? 1.0f : 0.0f;
        write_file(out, save_pgm(gray, res));
        r.empty = std::none_of(f.values.begin(), f.values.end(),
                               [](float v) { return v > 0.5f; });
    }
    return r;
}

std::string default_checkpoint(const Config& cfg) {
    const std::string& explicit_path = cfg.get("decode.checkpoint");
    return explicit_path.empty() ? run_path(cfg, "ae_final.imck") : explicit_path;
}

// Last eval.select_best_of checkpoints of a training command, oldest first.
std::vector<std::string> candidate_checkpoints(const Config& cfg, const std::string& prefix,
                                               const std::string& train_cmd) {
    std::vector<std::string> stamped;
    const fs::path dir = cfg.get("run.dir");
    if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind(prefix + "_epoch_", 0) == 0 && name.ends_with(".imck"))
                stamped.push_back(e.path().string());
        }
    }
    std::sort(stamped.begin(), stamped.end());
    const std::string final_path = run_path(cfg, prefix + "_final.imck");
    if (fs::exists(final_path)) stamped.push_back(final_path);
    if (stamped.empty())
        throw ConfigError("no " + prefix + " checkpoints in " + dir.string() + "; run " +
                          train_cmd + " first");
    const int keep = std::max(1, cfg.get_int("eval.select_best_of"));
    if (int(stamped.size()) > keep)
        stamped.erase(stamped.begin(), stamped.end() - keep);
    return stamped;
}

std::vector<int> held_out_views(const Config& cfg) {
    const std::vector<int> train_views = cfg.get_int_list("svr.train_views");
    std::vector<int> held;
    for (int v = 0; v < 6; ++v)
        if (!std::count(train_views.begin(), train_views.end(), v)) held.push_back(v);
    return held;
}

std::vector<int> checked_train_views(const Config& cfg) {
    const std::vector<int> views = cfg.get_int_list("svr.train_views");
    std::vector<int> seen;
    for (int v : views) {
        if (v < 0 || v > 5)
            throw ConfigError("svr.train_views entries must be in 0..5, got " +
                              std::to_string(v));
        if (std::count(seen.begin(), seen.end(), v))
            throw ConfigError("svr.train_views repeats view " + std::to_string(v));
        seen.push_back(v);
    }
    return views;
}

}  // namespace

std::string EvalReport::summary_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : summary) os << k << "=" << v << "\n";
    return os.str();
}

const std::string& EvalReport::summary_at(const std::string& key) const {
    for (const auto& [k, v] : summary)
        if (k == key) return v;
    throw ContractError("eval summary has no key '" + key + "'");
}

VoxelGrid axis_silhouette(const VoxelGrid& g, int view, int side) {
    if (g.dims != 3) throw ContractError("axis_silhouette needs a 3D grid");
    if (view < 0 || view > 5)
        throw ContractError("axis_silhouette view must be 0..5, got " + std::to_string(view));
    const VoxelGrid img = render_silhouette(g, view / 2, side);
    if (view % 2 == 0) return img;
    VoxelGrid mirrored = VoxelGrid::empty(2, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) mirrored.set(x, y, 0, img.at(side - 1 - x, y));
    return mirrored;
}

GenDataResult run_gen_data(const Config& cfg) {
    const std::string dir = cfg.get("dataset.dir");
    const std::vector<int> resolutions = cfg.get_int_list("data.resolutions");
    generate_dataset(dir, cfg.get_int("data.dims"), cfg.get_int("data.count"),
                     uint64_t(cfg.get_int("data.seed")), resolutions);
    const Dataset ds = load_dataset(dir);
    GenDataResult r;
    r.dir = dir;
    r.count = int(ds.entries.size());
    r.train_count = int(ds.split_ids(true).size());
    r.resolutions = resolutions;
    return r;
}

std::string run_train_ae(const Config& cfg, std::ostream* log) {
    const Dataset ds = open_dataset(cfg);

    TrainAeConfig t;
    t.schedule = cfg.get_int_list("ae.schedule");
    t.epochs = cfg.get_int_list("ae.epochs");
    if (t.epochs.size() != t.schedule.size())
        throw ConfigError("ae.epochs needs one entry per ae.schedule stage");
    for (int r : t.schedule) require_resolution(ds, r);
    t.points_per_step.clear();
    t.far_budget.clear();
    for (int r : t.schedule) {
        t.points_per_step[r] = cfg.get_int("ae.points" + std::to_string(r));
        t.far_budget[r] = cfg.get_int("sample.far_budget" + std::to_string(r));
    }
    const std::string& scheme = cfg.get("sample.scheme");
    if (scheme == "surface")
        t.scheme = SampleScheme::SurfaceBiased;
    else if (scheme == "naive")
        t.scheme = SampleScheme::Naive;
    else
        throw ConfigError("key 'sample.scheme': expected surface or naive, got '" + scheme + "'");
    t.lr = cfg.get_double("ae.lr");
    t.seed = uint64_t(cfg.get_int("ae.seed"));
    t.decoder.latent_dim = cfg.get_int("ae.latent_dim");
    t.decoder.point_dim = ds.dims;
    t.decoder.widths = cfg.get_int_list("ae.widths");
    t.encoder.dims = ds.dims;
    t.encoder.native_n = t.schedule.back();
    t.encoder.latent_dim = t.decoder.latent_dim;
    t.encoder.base_channels = cfg.get_int("ae.base_channels");
    t.encoder.max_channels = cfg.get_int("ae.max_channels");

    std::vector<ShapePyramid> shapes;
    for (int id : ds.split_ids(true)) {
        ShapePyramid p;
        for (int r : t.schedule) p.levels.push_back(load_dataset_grid(ds, id, r));
        shapes.push_back(std::move(p));
    }

    fs::create_directories(cfg.get("run.dir"));
    const int save_every = cfg.get_int("ae.save_every");
    if (save_every < 1) throw ConfigError("ae.save_every must be >= 1");

    Checkpoint resume_ck;
    const Checkpoint* resume = nullptr;
    if (cfg.get_bool("train.resume")) {
        resume_ck = load_checkpoint_or(run_path(cfg, "ae_latest.imck"),
                                       "run train-ae without --resume first");
        resume = &resume_ck;
    }

    const auto save = [&](const ParamStore& s, int stage, int epoch, const std::string& name) {
        Checkpoint c = checkpoint_from_store(s, {uint32_t(stage), uint32_t(epoch), t.seed});
        embed_decoder_arch(c, t.decoder);
        embed_voxel_arch(c, t.encoder);
        save_imck_file(c, run_path(cfg, name));
    };

    int cur_epoch = 0;
    TrainHooks hooks;
    hooks.log = log;
    hooks.on_epoch = [&](int stage, int epoch, double, const ParamStore& s) {
        cur_epoch = epoch;
        if (epoch % save_every == 0) {
            save(s, stage, epoch, epoch_name("ae", epoch));
            save(s, stage, epoch, "ae_latest.imck");
        }
        return true;
    };
    hooks.on_stage_end = [&](int stage, const ParamStore& s) {
        save(s, stage, cur_epoch, "ae_stage" + std::to_string(stage) + ".imck");
    };

    const AeResult result = train_ae(shapes, t, hooks, resume);

    std::vector<float> flat, ids;
    for (const DatasetEntry& e : ds.entries) {
        const VoxelGrid g = load_dataset_grid(ds, e.id, t.encoder.native_n);
        const std::vector<float> z = encode_voxels(result.store, t.encoder, g);
        flat.insert(flat.end(), z.begin(), z.end());
        ids.push_back(float(e.id));
    }
    Checkpoint final_ck = checkpoint_from_store(
        result.store, {uint32_t(t.schedule.back()), uint32_t(result.epochs_run), t.seed});
    embed_decoder_arch(final_ck, t.decoder);
    embed_voxel_arch(final_ck, t.encoder);
    final_ck.arrays["codes"] =
        Tensor<float>({int(ds.entries.size()), t.decoder.latent_dim}, std::move(flat));
    final_ck.arrays["code_ids"] = arch_vec(std::move(ids));
    const std::string path = run_path(cfg, "ae_final.imck");
    save_imck_file(final_ck, path);
    return path;
}

std::string run_train_gan(const Config& cfg, std::ostream* log) {
    const Dataset ds = open_dataset(cfg);
    const Checkpoint ae =
        load_checkpoint_or(run_path(cfg, "ae_final.imck"), "run train-ae first");

    std::vector<std::vector<float>> codes;
    for (int id : ds.split_ids(true)) codes.push_back(code_of(ae, id));

    GanConfig g;
    g.noise_dim = cfg.get_int("gan.noise_dim");
    g.hidden = cfg.get_int("gan.hidden");
    g.lambda_gp = cfg.get_double("gan.lambda_gp");
    g.critic_steps = cfg.get_int("gan.critic_steps");
    g.epochs = cfg.get_int("gan.epochs");
    g.batch = cfg.get_int("gan.batch");
    g.lr = cfg.get_double("gan.lr");
    g.seed = uint64_t(cfg.get_int("gan.seed"));

    fs::create_directories(cfg.get("run.dir"));
    const int save_every = cfg.get_int("gan.save_every");
    if (save_every < 1) throw ConfigError("gan.save_every must be >= 1");

    Checkpoint resume_ck;
    const Checkpoint* resume = nullptr;
    if (cfg.get_bool("train.resume")) {
        resume_ck = load_checkpoint_or(run_path(cfg, "gan_latest.imck"),
                                       "run train-gan without --resume first");
        resume = &resume_ck;
    }

    const auto save = [&](const ParamStore& s, int epoch, const std::string& name) {
        Checkpoint c = checkpoint_from_store(s, {0, uint32_t(epoch), g.seed});
        for (const auto& [arr_name, t] : ae.arrays)
            if (arr_name.rfind("dec.", 0) == 0) c.arrays[arr_name] = t;
        c.arrays["arch.dec"] = ae.at("arch.dec");
        save_imck_file(c, run_path(cfg, name));
    };

    TrainHooks hooks;
    hooks.log = log;
    hooks.on_epoch = [&](int, int epoch, double, const ParamStore& s) {
        if (epoch % save_every == 0) {
            save(s, epoch, epoch_name("gan", epoch));
            save(s, epoch, "gan_latest.imck");
        }
        return true;
    };

    const GanResult result = train_latent_gan(codes, g, hooks, resume);
    const std::string path = run_path(cfg, "gan_final.imck");
    save(result.store, result.epochs_run, "gan_final.imck");
    return path;
}

std::string run_train_svr(const Config& cfg, std::ostream* log) {
    const Dataset ds = open_dataset(cfg);
    if (ds.dims != 3) throw ConfigError("train-svr requires a 3D dataset");
    const Checkpoint ae =
        load_checkpoint_or(run_path(cfg, "ae_final.imck"), "run train-ae first");
    const DecoderArch dec = decoder_arch_from(ae);

    SvrConfig sc;
    sc.epochs = cfg.get_int("svr.epochs");
    sc.lr = cfg.get_double("svr.lr");
    sc.seed = uint64_t(cfg.get_int("svr.seed"));
    sc.arch.side = cfg.get_int("svr.side");
    sc.arch.latent_dim = dec.latent_dim;

    const std::vector<int> views = checked_train_views(cfg);
    const int finest = ds.resolutions.back();
    std::vector<SvrPair> pairs;
    for (const DatasetEntry& e : ds.entries) {
        const VoxelGrid grid = load_dataset_grid(ds, e.id, finest);
        const std::vector<float> code = code_of(ae, e.id);
        for (int v : views) pairs.push_back({axis_silhouette(grid, v, sc.arch.side), code});
    }

    fs::create_directories(cfg.get("run.dir"));
    const int save_every = cfg.get_int("svr.save_every");
    if (save_every < 1) throw ConfigError("svr.save_every must be >= 1");

    Checkpoint resume_ck;
    const Checkpoint* resume = nullptr;
    if (cfg.get_bool("train.resume")) {
        resume_ck = load_checkpoint_or(run_path(cfg, "svr_latest.imck"),
                                       "run train-svr without --resume first");
        resume = &resume_ck;
    }

    const auto save = [&](const ParamStore& s, int epoch, const std::string& name) {
        Checkpoint c = checkpoint_from_store(s, {uint32_t(sc.arch.side), uint32_t(epoch), sc.seed});
        for (const auto& [arr_name, t] : ae.arrays)
            if (arr_name.rfind("dec.", 0) == 0) c.arrays[arr_name] = t;
        c.arrays["arch.dec"] = ae.at("arch.dec");
        embed_image_arch(c, sc.arch);
        save_imck_file(c, run_path(cfg, name));
    };

    TrainHooks hooks;
    hooks.log = log;
    hooks.on_epoch = [&](int, int epoch, double, const ParamStore& s) {
        if (epoch % save_every == 0) {
            save(s, epoch, epoch_name("svr", epoch));
            save(s, epoch, "svr_latest.imck");
        }
        return true;
    };

    const ParamStore store = train_svr(pairs, sc, hooks, resume);
    const std::string path = run_path(cfg, "svr_final.imck");
    save(store, sc.epochs, "svr_final.imck");
    return path;
}

DecodeResult run_decode(const Config& cfg) {
    const std::string path = default_checkpoint(cfg);
    const Checkpoint ck = load_checkpoint_or(path, "run train-ae first");
    const DecoderArch dec = decoder_arch_from(ck);
    const ParamStore store = value_store(ck);
    const int res = cfg.get_int("decode.res");
    if (res < 2) throw ConfigError("decode.res must be >= 2");

    const int shape_id = cfg.get_int("decode.shape_id");
    const std::string& code_file = cfg.get("decode.code_file");
    const int gan_sample = cfg.get_int("decode.gan_sample");
    const int sources = (shape_id >= 0) + int(!code_file.empty()) + (gan_sample >= 0);
    if (sources != 1)
        throw ConfigError(
            "choose exactly one code source: decode.shape_id, decode.code_file, or "
            "decode.gan_sample");

    std::vector<float> z;
    if (shape_id >= 0) {
        const VoxelEncoderArch enc = voxel_arch_from(ck);
        const Dataset ds = open_dataset(cfg);
        entry_or_usage(ds, shape_id);
        z = encode_voxels(store, enc, load_dataset_grid(ds, shape_id, enc.native_n));
    } else if (!code_file.empty()) {
        z = read_code_file(code_file, dec.latent_dim);
    } else {
        if (!ck.has(gan_param_name('g', 1, 'W')))
            throw ConfigError("checkpoint " + path + " has no generator; run train-gan first");
        z = gan_generate(store, uint64_t(gan_sample));
    }

    std::string out = cfg.get("decode.out");
    if (dec.point_dim == 2 && out == "out.obj") out = "out.pgm";
    return write_decoded(cfg, store, dec, z, res, out);
}

std::vector<DecodeResult> run_interpolate(const Config& cfg) {
    const int k = cfg.get_int("interp.steps");
    if (k < 2) throw ConfigError("interp.steps must be >= 2");
    const int res = cfg.get_int("interp.res");
    if (res < 2) throw ConfigError("interp.res must be >= 2");

    const std::string path = default_checkpoint(cfg);
    const Checkpoint ck = load_checkpoint_or(path, "run train-ae first");
    const DecoderArch dec = decoder_arch_from(ck);
    const VoxelEncoderArch enc = voxel_arch_from(ck);
    const ParamStore store = value_store(ck);
    const Dataset ds = open_dataset(cfg);

    const int id_a = cfg.get_int("interp.id_a");
    const int id_b = cfg.get_int("interp.id_b");
    entry_or_usage(ds, id_a);
    entry_or_usage(ds, id_b);
    const std::vector<float> za =
        encode_voxels(store, enc, load_dataset_grid(ds, id_a, enc.native_n));
    const std::vector<float> zb =
        encode_voxels(store, enc, load_dataset_grid(ds, id_b, enc.native_n));

    const fs::path out_dir = cfg.get("interp.out");
    fs::create_directories(out_dir);

    std::vector<DecodeResult> results;
    for (int i = 0; i < k; ++i) {
        const double t = double(i) / double(k - 1);
        char name[32];
        std::snprintf(name, sizeof name, "step_%02d.%s", i, dec.point_dim == 3 ? "obj" : "pgm");
        results.push_back(
            write_decoded(cfg, store, dec, interpolate(za, zb, t), res, (out_dir / name).string()));
    }
    return results;
}

namespace {

EvalReport eval_ae(const Config& cfg, const Dataset& ds, int res,
                   const std::vector<int>& test_ids) {
    const std::string path = default_checkpoint(cfg);
    const Checkpoint ae = load_checkpoint_or(path, "run train-ae first");
    const ParamStore store = value_store(ae);
    const DecoderArch dec = decoder_arch_from(ae);
    const VoxelEncoderArch enc = voxel_arch_from(ae);
    const uint64_t seed = uint64_t(cfg.get_int("eval.seed"));

    std::ostringstream table;
    table << "id\tmse\tiou\tcd\tlfd\n";

    // Ground truth scored against itself pins the metric plumbing.
    {
        const VoxelGrid g = load_dataset_grid(ds, test_ids.front(), res);
        const Mesh m = marching_cubes(field_from_grid(g));
        const PointCloud pc = sample_vertices(m, 2048, seed);
        const SilhouetteDescriptor d = lfd_lite(g);
        table << "oracle\t" << fmt(voxel_mse(g, g)) << '\t' << fmt(iou(g, g)) << '\t'
              << fmt(chamfer(pc, pc)) << '\t' << fmt(lfd_lite_distance(d, d)) << '\n';
    }

    double sum_mse = 0, sum_iou = 0, sum_cd = 0, sum_lfd = 0;
    for (int id : test_ids) {
        const VoxelGrid gt = load_dataset_grid(ds, id, res);
        const std::vector<float> z =
            encode_voxels(store, enc, load_dataset_grid(ds, id, enc.native_n));
        const FieldGrid f = sample_field(store, dec, z, res);
        const VoxelGrid rec = grid_from_field(f);

        const double mse = voxel_mse(gt, f);
        const double jac = iou(gt, rec);
        double cd = kInf, lfd = kInf;
        const Mesh mesh_rec = marching_cubes(f);
        if (!mesh_rec.vertices.empty()) {
            const Mesh mesh_gt = marching_cubes(field_from_grid(gt));
            cd = chamfer(sample_vertices(mesh_gt, 2048, seed),
                         sample_vertices(mesh_rec, 2048, seed ^ 0x9e3779b9ULL));
        }
        if (rec.occupied_count() > 0) lfd = lfd_lite_distance(lfd_lite(gt), lfd_lite(rec));

        sum_mse += mse;
        sum_iou += jac;
        sum_cd += cd;
        sum_lfd += lfd;
        table << id << '\t' << fmt(mse) << '\t' << fmt(jac) << '\t' << fmt(cd) << '\t'
              << fmt(lfd) << '\n';
    }
    const double n = double(test_ids.size());
    table << "mean\t" << fmt(sum_mse / n) << '\t' << fmt(sum_iou / n) << '\t' << fmt(sum_cd / n)
          << '\t' << fmt(sum_lfd / n) << '\n';

    EvalReport r;
    r.table = table.str();
    r.summary = {{"suite", "ae"},
                 {"checkpoint", path},
                 {"res", std::to_string(res)},
                 {"test_count", std::to_string(test_ids.size())},
                 {"mean_mse", fmt(sum_mse / n)},
                 {"mean_iou", fmt(sum_iou / n)},
                 {"mean_cd", fmt(sum_cd / n)},
                 {"mean_lfd", fmt(sum_lfd / n)}};
    return r;
}

EvalReport eval_gan(const Config& cfg, const Dataset& ds, int res,
                    const std::vector<int>& test_ids) {
    const std::vector<std::string> candidates = candidate_checkpoints(cfg, "gan", "train-gan");

    std::vector<SilhouetteDescriptor> test_descs;
    for (int id : test_ids) test_descs.push_back(lfd_lite(load_dataset_grid(ds, id, res)));

    double occ_lo = 1.0, occ_hi = 0.0;
    for (int id : ds.split_ids(true)) {
        const double frac = load_dataset_grid(ds, id, res).occupied_fraction();
        occ_lo = std::min(occ_lo, frac);
        occ_hi = std::max(occ_hi, frac);
    }

    const int n_samples = cfg.get_int("eval.sample_multiplier") * int(test_ids.size());
    if (n_samples < 1) throw ConfigError("eval.sample_multiplier must be >= 1");
    const Rng base(uint64_t(cfg.get_int("eval.seed")));
    std::vector<uint64_t> sample_seeds;
    for (int i = 0; i < n_samples; ++i)
        sample_seeds.push_back(base.child(0x5a3, uint64_t(i)).next_u64());

    std::ostringstream table;
    table << "checkpoint\tepoch\tsamples\tnonempty\tin_range\tcov\tmmd\n";

    struct Best {
        double cov = -1.0, mmd = kInf, in_range = 0.0;
        int nonempty = 0;
        std::string path;
        uint32_t epoch = 0;
    } best;

    for (const std::string& cand : candidates) {
        const Checkpoint ck = load_imck_file(cand);
        if (!ck.has(gan_param_name('g', 1, 'W')))
            throw ConfigError("checkpoint " + cand + " has no generator; run train-gan first");
        const ParamStore store = value_store(ck);
        const DecoderArch dec = decoder_arch_from(ck);

        std::vector<SilhouetteDescriptor> descs;
        int nonempty = 0, in_range = 0;
        for (uint64_t s : sample_seeds) {
            const std::vector<float> z = gan_generate(store, s);
            const VoxelGrid g = grid_from_field(sample_field(store, dec, z, res));
            const double frac = g.occupied_fraction();
            if (frac >= 0.2 * occ_lo && frac <= 5.0 * occ_hi) ++in_range;
            if (g.occupied_count() > 0) {
                descs.push_back(lfd_lite(g));
                ++nonempty;
            }
        }
        const double cov =
            descs.empty() ? 0.0 : coverage(descs, test_descs, lfd_lite_distance);
        const double md = descs.empty() ? kInf : mmd(test_descs, descs, lfd_lite_distance);
        const double in_range_frac = double(in_range) / double(n_samples);

        table << cand << '\t' << ck.meta.epoch << '\t' << n_samples << '\t' << nonempty << '\t'
              << fmt(in_range_frac) << '\t' << fmt(cov) << '\t' << fmt(md) << '\n';
        if (cov > best.cov || (cov == best.cov && md < best.mmd)) {
            best = {cov, md, in_range_frac, nonempty, cand, ck.meta.epoch};
        }
    }

    EvalReport r;
    r.table = table.str();
    r.summary = {{"suite", "gan"},
                 {"checkpoint", best.path},
                 {"epoch", std::to_string(best.epoch)},
                 {"res", std::to_string(res)},
                 {"samples", std::to_string(n_samples)},
                 {"nonempty", std::to_string(best.nonempty)},
                 {"in_range_frac", fmt(best.in_range)},
                 {"train_occ_lo", fmt(occ_lo)},
                 {"train_occ_hi", fmt(occ_hi)},
                 {"cov", fmt(best.cov)},
                 {"mmd", fmt(best.mmd)}};
    return r;
}

EvalReport eval_svr(const Config& cfg, const Dataset& ds, int res,
                    const std::vector<int>& test_ids) {
    (void)test_ids;
    const Checkpoint ae =
        load_checkpoint_or(run_path(cfg, "ae_final.imck"), "run train-ae first");
    const std::vector<std::string> candidates = candidate_checkpoints(cfg, "svr", "train-svr");
    checked_train_views(cfg);
    const std::vector<int> held = held_out_views(cfg);
    if (held.empty()) throw ConfigError("svr.train_views leaves no held-out view to evaluate");

    const Checkpoint first = load_imck_file(candidates.front());
    const ImageEncoderArch arch = image_arch_from(first);
    const int finest = ds.resolutions.back();

    struct HeldPair {
        int id;
        int view;
        bool train_shape;
    };
    std::vector<HeldPair> held_pairs;
    std::vector<SvrPair> mse_pairs;
    for (const DatasetEntry& e : ds.entries) {
        const VoxelGrid grid = load_dataset_grid(ds, e.id, finest);
        const std::vector<float> code = code_of(ae, e.id);
        for (int v : held) {
            held_pairs.push_back({e.id, v, e.train});
            mse_pairs.push_back({axis_silhouette(grid, v, arch.side), code});
        }
    }

    ParamStore untrained;
    init_image_encoder(untrained, arch,
                       Rng(uint64_t(cfg.get_int("svr.seed"))).child(0x517, 4).next_u64());
    const double baseline = svr_code_mse(untrained, arch, mse_pairs);

    std::string best_path;
    double best_mse = kInf;
    uint32_t best_epoch = 0;
    for (const std::string& cand : candidates) {
        const Checkpoint ck = load_imck_file(cand);
        const double m = svr_code_mse(value_store(ck), image_arch_from(ck), mse_pairs);
        if (m < best_mse) {
            best_mse = m;
            best_path = cand;
            best_epoch = ck.meta.epoch;
        }
    }

    const Checkpoint ck = load_imck_file(best_path);
    const ParamStore store = value_store(ck);
    const DecoderArch dec = decoder_arch_from(ck);
    const uint64_t seed = uint64_t(cfg.get_int("eval.seed"));

    std::ostringstream table;
    table << "id\tview\tsplit\tcode_mse\tiou\tcd\tlfd\n";
    double sum_iou = 0, sum_cd = 0, sum_lfd = 0, sum_iou_test = 0;
    int test_rows = 0;
    for (size_t i = 0; i < held_pairs.size(); ++i) {
        const HeldPair& hp = held_pairs[i];
        const SvrPair& sp = mse_pairs[i];
        const std::vector<float> z = encode_image(store, arch, sp.image);
        double cmse = 0;
        for (size_t j = 0; j < z.size(); ++j) {
            const double d = double(z[j]) - double(sp.code[j]);
            cmse += d * d;
        }
        cmse /= double(z.size());

        const VoxelGrid gt = load_dataset_grid(ds, hp.id, res);
        const FieldGrid f = sample_field(store, dec, z, res);
        const VoxelGrid rec = grid_from_field(f);
        const double jac = iou(gt, rec);
        double cd = kInf, lfd = kInf;
        const Mesh mesh_rec = marching_cubes(f);
        if (!mesh_rec.vertices.empty()) {
            const Mesh mesh_gt = marching_cubes(field_from_grid(gt));
            cd = chamfer(sample_vertices(mesh_gt, 2048, seed),
                         sample_vertices(mesh_rec, 2048, seed ^ 0x9e3779b9ULL));
        }
        if (rec.occupied_count() > 0) lfd = lfd_lite_distance(lfd_lite(gt), lfd_lite(rec));

        sum_iou += jac;
        sum_cd += cd;
        sum_lfd += lfd;
        if (!hp.train_shape) {
            sum_iou_test += jac;
            ++test_rows;
        }
        table << hp.id << '\t' << hp.view << '\t' << (hp.train_shape ? "train" : "test") << '\t'
              << fmt(cmse) << '\t' << fmt(jac) << '\t' << fmt(cd) << '\t' << fmt(lfd) << '\n';
    }
    const double n = double(held_pairs.size());

    EvalReport r;
    r.table = table.str();
    r.summary = {{"suite", "svr"},
                 {"checkpoint", best_path},
                 {"epoch", std::to_string(best_epoch)},
                 {"res", std::to_string(res)},
                 {"heldout_mse", fmt(best_mse)},
                 {"baseline_mse", fmt(baseline)},
                 {"mse_ratio", fmt(best_mse / baseline)},
                 {"mean_iou", fmt(sum_iou / n)},
                 {"mean_iou_test", fmt(test_rows ? sum_iou_test / test_rows : kInf)},
                 {"mean_cd", fmt(sum_cd / n)},
                 {"mean_lfd", fmt(sum_lfd / n)}};
    return r;
}

}  // namespace

EvalReport run_eval(const Config& cfg) {
    const std::string& suite = cfg.get("eval.suite");
    const Dataset ds = open_dataset(cfg);
    if (ds.dims != 3) throw ConfigError("eval requires a 3D dataset");
    const int res = cfg.get_int("eval.res");
    require_resolution(ds, res);
    const std::vector<int> test_ids = ds.split_ids(false);
    if (test_ids.empty()) throw ConfigError("eval: the dataset has an empty test split");

    if (suite == "ae") return eval_ae(cfg, ds, res, test_ids);
    if (suite == "gan") return eval_gan(cfg, ds, res, test_ids);
    if (suite == "svr") return eval_svr(cfg, ds, res, test_ids);
    throw ConfigError("key 'eval.suite': expected ae, gan, or svr, got '" + suite + "'");
}

}  // namespace imfield
