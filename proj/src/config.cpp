#include "imfield/config.hpp"

#include <cstdlib>
#include <sstream>

#include "imfield/voxel.hpp"

namespace imfield {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigEntry>& Config::registry() {
    static const std::vector<ConfigEntry> entries = {
        {"data.dims", "3", "spatial dimensionality of the pipeline (2 or 3)"},
        {"data.count", "20", "number of procedural shapes gen-data emits"},
        {"data.seed", "7", "seed for procedural shape parameters"},
        {"data.resolutions", "16,32,64", "grid resolutions rasterized per shape"},
        {"dataset.dir", "dataset", "directory holding manifest.txt and IMVX grids"},
        {"run.dir", "runs", "directory for checkpoints and training logs"},

        {"sample.scheme", "surface", "point sampling scheme: naive or surface"},
        {"sample.far_budget16", "1024", "off-surface samples kept at 16^d"},
        {"sample.far_budget32", "4096", "off-surface samples kept at 32^d"},
        {"sample.far_budget64", "16384", "off-surface samples kept at 64^d"},

        {"ae.latent_dim", "16", "latent code width d"},
        {"ae.widths", "256,256,128", "decoder hidden layer widths"},
        {"ae.base_channels", "16", "voxel encoder channels after the first conv"},
        {"ae.max_channels", "128", "voxel encoder channel cap"},
        {"ae.schedule", "16,32", "progressive resolution schedule"},
        {"ae.epochs", "80,120", "epochs per schedule stage"},
        {"ae.points16", "2048", "points sampled per shape per step at 16^d"},
        {"ae.points32", "4096", "points sampled per shape per step at 32^d"},
        {"ae.points64", "4096", "points sampled per shape per step at 64^d"},
        {"ae.lr", "1e-3", "autoencoder Adam learning rate"},
        {"ae.seed", "1", "autoencoder training seed"},
        {"ae.save_every", "20", "checkpoint every this many epochs"},

        {"gan.noise_dim", "16", "latent-GAN Gaussian noise width"},
        {"gan.hidden", "128", "hidden width of the two-layer G and D"},
        {"gan.lambda_gp", "10", "gradient-penalty coefficient"},
        {"gan.critic_steps", "5", "critic updates per generator update"},
        {"gan.epochs", "2000", "latent-GAN training epochs"},
        {"gan.lr", "1e-4", "latent-GAN Adam learning rate"},
        {"gan.seed", "2", "latent-GAN training seed"},
        {"gan.batch", "16", "codes per critic batch (capped by corpus size)"},
        {"gan.save_every", "400", "checkpoint every this many epochs"},

        {"svr.epochs", "300", "image-encoder training epochs"},
        {"svr.lr", "1e-3", "image-encoder Adam learning rate"},
        {"svr.seed", "3", "image-encoder training seed"},
        {"svr.side", "64", "silhouette side length fed to the image encoder"},
        {"svr.save_every", "50", "checkpoint every this many epochs"},
        {"svr.train_views", "0,1,2,3", "axis views (0..5: +x,-x,+y,-y,+z,-z) used for training pairs"},

        {"train.resume", "0", "resume from the latest checkpoint in run.dir"},

        {"decode.checkpoint", "", "checkpoint to decode from (default: run.dir/ae_final.imck)"},
        {"decode.res", "64", "sampling resolution m for decode"},
        {"decode.out", "out.obj", "output path (OBJ in 3D, PGM in 2D)"},
        {"decode.shape_id", "-1", "re-encode this manifest shape as the code source"},
        {"decode.code_file", "", "text file with d floats as the code source"},
        {"decode.gan_sample", "-1", "sample the GAN generator with this seed"},
        {"decode.binarize", "0", "threshold 2D output to 0/255 instead of grayscale"},

        {"interp.steps", "8", "number of interpolation steps (endpoints included)"},
        {"interp.res", "32", "sampling resolution for interpolated meshes"},
        {"interp.out", "interp", "output directory for step meshes"},
        {"interp.id_a", "0", "manifest shape id of the first endpoint"},
        {"interp.id_b", "1", "manifest shape id of the second endpoint"},

        {"eval.suite", "ae", "evaluation suite: ae, gan, or svr"},
        {"eval.res", "32", "grid resolution for reconstruction metrics"},
        {"eval.sample_multiplier", "5", "GAN samples per test-split shape"},
        {"eval.select_best_of", "5", "evaluate the last N checkpoints, report the best"},
        {"eval.seed", "4", "seed for evaluation-time sampling"},
    };
    return entries;
}

Config::Config() {
    for (const auto& e : registry()) values_[e.key] = e.def;
}

void Config::set(const std::string& key, const std::string& value, const std::string& where) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second = value;
}

void Config::load_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + s + "'");
        set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)), where);
    }
}

void Config::load_file(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    load_text(std::string(bytes.begin(), bytes.end()), path);
}

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

int Config::get_int(const std::string& key) const {
    const std::string& v = get(key);
    char* end = nullptr;
    long parsed = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    return int(parsed);
}

double Config::get_double(const std::string& key) const {
    const std::string& v = get(key);
    char* end = nullptr;
    double parsed = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0')
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    return parsed;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    const std::string& v = get(key);
    std::vector<int> out;
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        char* end = nullptr;
        long parsed = std::strtol(tok.c_str(), &end, 10);
        if (tok.empty() || *end != '\0')
            throw ConfigError("key '" + key + "': expected comma-separated integers, got '" + v + "'");
        out.push_back(int(parsed));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::string Config::dump() const {
    std::ostringstream os;
    for (const auto& e : registry()) os << e.key << "=" << values_.at(e.key) << "\n";
    return os.str();
}

}  // namespace imfield
