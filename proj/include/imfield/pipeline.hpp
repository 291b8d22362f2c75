#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "imfield/config.hpp"
#include "imfield/dataset.hpp"
#include "imfield/extraction.hpp"
#include "imfield/training.hpp"

namespace imfield {

// End-to-end commands behind the CLI. Every function reads its inputs from
// the config (dataset.dir, run.dir, command keys) and is deterministic given
// the config, so a rerun reproduces checkpoints and reports byte-exact.

struct GenDataResult {
    std::string dir;
    int count = 0;
    int train_count = 0;
    std::vector<int> resolutions;
};
GenDataResult run_gen_data(const Config& cfg);

// Training commands write epoch-stamped checkpoints plus <name>_latest.imck
// every save_every epochs and <name>_final.imck at the end, all under
// run.dir, and return the final path. train.resume=1 restarts from the
// latest checkpoint. Progress lines go to `log` when given.
//
// ae_final.imck additionally embeds the architecture and the latent codes of
// every manifest shape ("codes", id order); GAN and SVR checkpoints embed a
// verbatim copy of the decoder so decoding needs only one file.
std::string run_train_ae(const Config& cfg, std::ostream* log = nullptr);
std::string run_train_gan(const Config& cfg, std::ostream* log = nullptr);
std::string run_train_svr(const Config& cfg, std::ostream* log = nullptr);

struct DecodeResult {
    std::string out_path;
    int dims = 3;
    int res = 0;
    int64_t vertices = 0;
    int64_t triangles = 0;
    bool empty = false;  // field entirely below the iso threshold
};

// Decodes one code (from --shape-id, --code-file, or --gan-sample) at
// decode.res: OBJ mesh in 3D, PGM image in 2D.
DecodeResult run_decode(const Config& cfg);

// interp.steps meshes for t = 0 .. 1 between the codes of two manifest
// shapes; endpoint outputs are byte-identical to decode runs of the same
// shapes at the same resolution.
std::vector<DecodeResult> run_interpolate(const Config& cfg);

struct EvalReport {
    std::string table;  // tab-separated rows, first line is the column header
    std::vector<std::pair<std::string, std::string>> summary;
    std::string summary_text() const;  // key=value lines
    const std::string& summary_at(const std::string& key) const;
};

// eval.suite selects the protocol: "ae" reconstructs the test split, "gan"
// scores generated samples with COV/MMD over eval.sample_multiplier times the
// test-split size, "svr" scores held-out-view regressions. gan and svr
// evaluate the last eval.select_best_of saved checkpoints and report the
// best.
EvalReport run_eval(const Config& cfg);

// Orthographic binary silhouette of a 3D grid; views 0..5 look along
// +x,-x,+y,-y,+z,-z, with the first pixel axis mirrored for the negative
// directions. side^2 output.
VoxelGrid axis_silhouette(const VoxelGrid& g, int view, int side);

}  // namespace imfield
