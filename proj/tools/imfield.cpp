#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "imfield/config.hpp"
#include "imfield/gradcheck.hpp"
#include "imfield/pipeline.hpp"

namespace fs = std::filesystem;
using namespace imfield;

namespace {

class TeeBuf : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int c) override {
        if (c == traits_type::eof()) return c;
        if (a_->sputc(char(c)) == traits_type::eof()) return traits_type::eof();
        if (b_->sputc(char(c)) == traits_type::eof()) return traits_type::eof();
        return c;
    }
    int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

void usage(std::ostream& os) {
    os << "usage: imfield <command> [--config path] [--key=value ...]\n"
          "\n"
          "commands:\n"
          "  gen-data     generate the procedural shape dataset\n"
          "               (--dims N --count N --seed N --dataset DIR)\n"
          "  train-ae     train the shape autoencoder (--epochs LIST --seed N --resume)\n"
          "  train-gan    train the latent generator (--epochs N --seed N --resume)\n"
          "  train-svr    train the silhouette-to-code encoder (--epochs N --seed N --resume)\n"
          "  decode       extract a mesh or image from a code\n"
          "               (--shape-id N | --code-file PATH | --gan-sample SEED;\n"
          "                --res N --out PATH --checkpoint PATH --binarize)\n"
          "  interpolate  decode a latent line between two shapes\n"
          "               (idA idB or --a N --b N; --steps K --res N --out DIR)\n"
          "  eval         score a trained model (--suite ae|gan|svr --res N\n"
          "                --select-best-of K --seed N)\n"
          "  gradcheck    finite-difference check of every differentiable op\n"
          "  keys         list every config key with its default and meaning\n"
          "\n"
          "--key=value overrides any config key; --config loads a key=value file first.\n";
}

struct Alias {
    const char* flag;
    const char* key;
    bool bare = false;  // flag takes no value and sets "1"
};

std::vector<Alias> aliases_for(const std::string& cmd) {
    std::vector<Alias> a = {{"dataset", "dataset.dir"}, {"run-dir", "run.dir"}};
    const auto train = [&](const char* prefix) {
        a.push_back({"seed", prefix == std::string("ae") ? "ae.seed"
                             : prefix == std::string("gan") ? "gan.seed"
                                                            : "svr.seed"});
        a.push_back({"epochs", prefix == std::string("ae") ? "ae.epochs"
                               : prefix == std::string("gan") ? "gan.epochs"
                                                              : "svr.epochs"});
        a.push_back({"resume", "train.resume", true});
    };
    if (cmd == "gen-data") {
        a.push_back({"dims", "data.dims"});
        a.push_back({"count", "data.count"});
        a.push_back({"seed", "data.seed"});
        a.push_back({"resolutions", "data.resolutions"});
    } else if (cmd == "train-ae") {
        train("ae");
        a.push_back({"schedule", "ae.schedule"});
    } else if (cmd == "train-gan") {
        train("gan");
    } else if (cmd == "train-svr") {
        train("svr");
    } else if (cmd == "decode") {
        a.push_back({"res", "decode.res"});
        a.push_back({"out", "decode.out"});
        a.push_back({"shape-id", "decode.shape_id"});
        a.push_back({"code-file", "decode.code_file"});
        a.push_back({"gan-sample", "decode.gan_sample"});
        a.push_back({"checkpoint", "decode.checkpoint"});
        a.push_back({"binarize", "decode.binarize", true});
    } else if (cmd == "interpolate") {
        a.push_back({"res", "interp.res"});
        a.push_back({"out", "interp.out"});
        a.push_back({"steps", "interp.steps"});
        a.push_back({"a", "interp.id_a"});
        a.push_back({"b", "interp.id_b"});
        a.push_back({"checkpoint", "decode.checkpoint"});
    } else if (cmd == "eval") {
        a.push_back({"suite", "eval.suite"});
        a.push_back({"res", "eval.res"});
        a.push_back({"select-best-of", "eval.select_best_of"});
        a.push_back({"seed", "eval.seed"});
        a.push_back({"checkpoint", "decode.checkpoint"});
    }
    return a;
}

// Config files load first, then flags, so flags win regardless of order.
Config parse_config(const std::string& cmd, int argc, char** argv,
                    std::vector<std::string>& positional) {
    const std::vector<Alias> aliases = aliases_for(cmd);
    std::vector<std::string> files;
    std::vector<std::array<std::string, 3>> sets;  // key, value, where

    for (int i = 2; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg.rfind("--", 0) != 0) {
            positional.push_back(arg);
            continue;
        }
        std::string body = arg.substr(2), value;
        bool has_value = false;
        if (const size_t eq = body.find('='); eq != std::string::npos) {
            value = body.substr(eq + 1);
            body = body.substr(0, eq);
            has_value = true;
        }
        const auto next_value = [&](const char* what) {
            if (has_value) return;
            if (i + 1 >= argc) throw ConfigError(std::string(what) + " needs a value");
            value = argv[++i];
        };
        if (body == "config") {
            next_value("flag --config");
            files.push_back(value);
            continue;
        }
        const auto hit = std::find_if(aliases.begin(), aliases.end(),
                                      [&](const Alias& a) { return body == a.flag; });
        if (hit != aliases.end()) {
            if (hit->bare) {
                if (has_value && value != "1" && value != "0")
                    throw ConfigError("flag --" + body + " takes no value");
                sets.push_back({hit->key, has_value ? value : "1", "flag --" + body});
            } else {
                next_value(("flag --" + body).c_str());
                sets.push_back({hit->key, value, "flag --" + body});
            }
            continue;
        }
        if (!has_value)
            throw ConfigError("unknown flag --" + body + " for " + cmd +
                              " (config keys need --key=value)");
        sets.push_back({body, value, "flag " + arg});
    }

    Config cfg;
    for (const std::string& f : files) cfg.load_file(f);
    for (const auto& [key, val, where] : sets) cfg.set(key, val, where);
    return cfg;
}

void reject_positionals(const std::string& cmd, const std::vector<std::string>& positional) {
    if (!positional.empty())
        throw ConfigError(cmd + " takes no positional argument '" + positional.front() + "'");
}

int run_command(const std::string& cmd, Config& cfg, const std::vector<std::string>& positional) {
    if (cmd == "gen-data") {
        reject_positionals(cmd, positional);
        const GenDataResult r = run_gen_data(cfg);
        std::cout << "dataset " << r.dir << ": " << r.count << " shapes (" << r.train_count
                  << " train), resolutions";
        for (int res : r.resolutions) std::cout << ' ' << res;
        std::cout << "\n";
        return 0;
    }

    if (cmd == "train-ae" || cmd == "train-gan" || cmd == "train-svr") {
        reject_positionals(cmd, positional);
        fs::create_directories(cfg.get("run.dir"));
        const std::string log_path =
            (fs::path(cfg.get("run.dir")) / (cmd.substr(6) + "_train.log")).string();
        std::ofstream log_file(log_path);
        if (!log_file) throw IoError("cannot open " + log_path);
        TeeBuf tee(std::cout.rdbuf(), log_file.rdbuf());
        std::ostream log(&tee);
        const std::string path = cmd == "train-ae"   ? run_train_ae(cfg, &log)
                                 : cmd == "train-gan" ? run_train_gan(cfg, &log)
                                                      : run_train_svr(cfg, &log);
        std::cout << "checkpoint " << path << "\nlog " << log_path << "\n";
        return 0;
    }

    if (cmd == "decode") {
        reject_positionals(cmd, positional);
        const DecodeResult r = run_decode(cfg);
        if (r.dims == 3)
            std::cout << r.out_path << ": " << r.vertices << " vertices, " << r.triangles
                      << " triangles\n";
        else
            std::cout << r.out_path << ": " << r.res << "x" << r.res << " image\n";
        if (r.empty) std::cerr << "warning: field never crosses 0.5; output is empty\n";
        return 0;
    }

    if (cmd == "interpolate") {
        if (positional.size() > 2)
            throw ConfigError("interpolate takes at most two shape ids, got " +
                              std::to_string(positional.size()));
        if (positional.size() >= 1) cfg.set("interp.id_a", positional[0], "argument idA");
        if (positional.size() == 2) cfg.set("interp.id_b", positional[1], "argument idB");
        const std::vector<DecodeResult> steps = run_interpolate(cfg);
        for (const DecodeResult& r : steps) {
            std::cout << r.out_path;
            if (r.dims == 3)
                std::cout << ": " << r.vertices << " vertices, " << r.triangles << " triangles";
            if (r.empty) std::cout << " (empty)";
            std::cout << "\n";
        }
        return 0;
    }

    if (cmd == "eval") {
        reject_positionals(cmd, positional);
        const EvalReport r = run_eval(cfg);
        fs::create_directories(cfg.get("run.dir"));
        const std::string report_path =
            (fs::path(cfg.get("run.dir")) / ("eval_" + cfg.get("eval.suite") + "_report.txt"))
                .string();
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot open " + report_path);
        out << r.table << "\n" << r.summary_text() << "\n# config\n" << cfg.dump();
        std::cout << r.table << "\n" << r.summary_text() << "\nreport " << report_path << "\n";
        return 0;
    }

    throw ConfigError("unhandled command " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage(std::cerr);
        return 2;
    }
    const std::string cmd = argv[1];
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
        usage(std::cout);
        return 0;
    }
    if (cmd == "keys") {
        for (const ConfigEntry& e : Config::registry())
            std::printf("%-24s %-14s %s\n", e.key.c_str(), e.def.c_str(), e.doc.c_str());
        return 0;
    }
    if (cmd == "gradcheck") {
        const GradcheckOutcome o = run_gradcheck(std::cout);
        return o.pass ? 0 : 1;
    }

    static const std::vector<std::string> commands = {
        "gen-data", "train-ae", "train-gan", "train-svr", "decode", "interpolate", "eval"};
    if (std::find(commands.begin(), commands.end(), cmd) == commands.end()) {
        std::cerr << "error: unknown command '" << cmd << "'\n\n";
        usage(std::cerr);
        return 2;
    }

    try {
        std::vector<std::string> positional;
        Config cfg = parse_config(cmd, argc, argv, positional);
        return run_command(cmd, cfg, positional);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
