#include "imfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>

namespace imfield {

namespace {

void check_same_res(int da, int na, int db, int nb, const char* op) {
    if (da != db || na != nb)
        throw ShapeError(std::string(op) + ": resolution mismatch (" + std::to_string(da) + "d/" +
                         std::to_string(na) + " vs " + std::to_string(db) + "d/" + std::to_string(nb) +
                         ")");
}

}  // namespace

double voxel_mse(const VoxelGrid& a, const VoxelGrid& b) {
    check_same_res(a.dims, a.n, b.dims, b.n, "voxel_mse");
    int64_t diff = 0;
    for (size_t i = 0; i < a.occ.size(); ++i) diff += a.occ[i] != b.occ[i];
    return double(diff) / double(a.cell_count());
}

double voxel_mse(const VoxelGrid& a, const FieldGrid& b) {
    check_same_res(a.dims, a.n, b.dims, b.m, "voxel_mse");
    double sum = 0.0;
    for (size_t i = 0; i < a.occ.size(); ++i) {
        const double d = (a.occ[i] ? 1.0 : 0.0) - double(b.values[i]);
        sum += d * d;
    }
    return sum / double(a.cell_count());
}

double iou(const VoxelGrid& a, const VoxelGrid& b) {
    check_same_res(a.dims, a.n, b.dims, b.n, "iou");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.occ.size(); ++i) {
        inter += a.occ[i] && b.occ[i];
        uni += a.occ[i] || b.occ[i];
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

namespace {

// Uniform-grid nearest neighbor with ring expansion. Cells at Chebyshev ring
// r from the query's cell hold points at distance >= (r-1)*h, so expansion
// stops as soon as that bound passes the best hit: results are exact.
class NnGrid {
  public:
    explicit NnGrid(const PointCloud& pts) : pts_(pts) {
        std::array<double, 3> hi = {-1e30, -1e30, -1e30};
        lo_ = {1e30, 1e30, 1e30};
        for (const auto& p : pts) {
            for (int i = 0; i < 3; ++i) {
                lo_[i] = std::min(lo_[i], double(p[i]));
                hi[i] = std::max(hi[i], double(p[i]));
            }
        }
        const int target = std::max(1, int(std::cbrt(double(pts.size()))));
        double extent = 1e-9;
        for (int i = 0; i < 3; ++i) extent = std::max(extent, hi[i] - lo_[i]);
        h_ = extent / target * (1.0 + 1e-12) + 1e-12;
        for (int i = 0; i < 3; ++i)
            res_[i] = std::max(1, int((hi[i] - lo_[i]) / h_) + 1);
        cells_.resize(size_t(res_[0]) * res_[1] * res_[2]);
        for (int i = 0; i < int(pts.size()); ++i) cells_[cell_of(pts[size_t(i)])].push_back(i);
    }

    double nearest_sq(const std::array<float, 3>& q) const {
        std::array<int, 3> c;
        for (int i = 0; i < 3; ++i)
            c[i] = std::clamp(int(std::floor((double(q[i]) - lo_[i]) / h_)), 0, res_[i] - 1);
        const int max_ring = std::max({res_[0], res_[1], res_[2]});
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r <= max_ring; ++r) {
            if (r >= 2 && best <= double(r - 1) * h_ * (double(r - 1) * h_)) break;
            for (int dz = -r; dz <= r; ++dz)
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                        const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        if (x < 0 || y < 0 || z < 0 || x >= res_[0] || y >= res_[1] || z >= res_[2])
                            continue;
                        for (int i : cells_[(size_t(z) * res_[1] + y) * res_[0] + x]) {
                            const auto& p = pts_[size_t(i)];
                            const double ddx = double(q[0]) - p[0], ddy = double(q[1]) - p[1],
                                         ddz = double(q[2]) - p[2];
                            best = std::min(best, ddx * ddx + ddy * ddy + ddz * ddz);
                        }
                    }
        }
        return best;
    }

  private:
    size_t cell_of(const std::array<float, 3>& p) const {
        std::array<int, 3> c;
        for (int i = 0; i < 3; ++i)
            c[i] = std::clamp(int(std::floor((double(p[i]) - lo_[i]) / h_)), 0, res_[i] - 1);
        return (size_t(c[2]) * res_[1] + c[1]) * res_[0] + c[0];
    }

    const PointCloud& pts_;
    std::array<double, 3> lo_;
    std::array<int, 3> res_;
    double h_;
    std::vector<std::vector<int>> cells_;
};

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw ContractError("chamfer: point clouds must be non-empty");
    const NnGrid ga(a), gb(b);
    double sa = 0.0, sb = 0.0;
    for (const auto& p : a) sa += gb.nearest_sq(p);
    for (const auto& p : b) sb += ga.nearest_sq(p);
    return sa / double(a.size()) + sb / double(b.size());
}

PointCloud sample_vertices(const Mesh& mesh, int count, uint64_t seed) {
    if (mesh.vertices.empty()) throw ContractError("sample_vertices: mesh has no vertices");
    if (count < 1) throw ContractError("sample_vertices: count must be >= 1");
    Rng rng(seed);
    PointCloud out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i)
        out.push_back(mesh.vertices[size_t(rng.uniform_int(mesh.vertices.size()))]);
    return out;
}

namespace {

constexpr int kSil = 64;     // silhouette side
constexpr int kSub = 8;      // supersampling factor per pixel axis
constexpr int kViews = SilhouetteDescriptor::view_count;

using Vec3 = std::array<double, 3>;

Vec3 cross3(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normed(const Vec3& a) {
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    return {a[0] / n, a[1] / n, a[2] / n};
}

struct LfdView {
    std::array<int, 3> idir;  // un-normalized integer direction
    Vec3 dir, u, v;
    double span;  // view window side length in world units
    bool axis;
};

const std::array<LfdView, kViews>& lfd_views() {
    static const std::array<LfdView, kViews> views = [] {
        const int dirs[kViews][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},  {0, -1, 0}, {0, 0, 1},
                                     {0, 0, -1}, {1, 1, 1},  {-1, 1, 1}, {1, -1, 1}, {1, 1, -1}};
        std::array<LfdView, kViews> vs;
        for (int i = 0; i < kViews; ++i) {
            LfdView& w = vs[i];
            w.idir = {dirs[i][0], dirs[i][1], dirs[i][2]};
            w.dir = normed({double(dirs[i][0]), double(dirs[i][1]), double(dirs[i][2])});
            w.axis = i < 6;
            w.span = w.axis ? 1.0 : std::sqrt(3.0);
            const Vec3 ref = std::abs(w.dir[2]) > 0.9 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
            w.u = normed(cross3(w.dir, ref));
            w.v = cross3(w.dir, w.u);
        }
        return vs;
    }();
    return views;
}

// The 24 proper axis-aligned rotations act on the view set as permutations
// (a rotated direction always lands on +-another view direction, and the
// per-view features are invariant to in-plane rotation and reflection).
const std::vector<std::array<int, kViews>>& lfd_rotations() {
    static const std::vector<std::array<int, kViews>> perms = [] {
        std::vector<std::array<int, kViews>> out;
        int axes[3] = {0, 1, 2};
        std::sort(axes, axes + 3);
        do {
            for (int signs = 0; signs < 8; ++signs) {
                int r[3][3] = {};
                for (int row = 0; row < 3; ++row)
                    r[row][axes[row]] = (signs >> row) & 1 ? -1 : 1;
                const int det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                                r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                                r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
                if (det != 1) continue;
                std::array<int, kViews> perm{};
                for (int i = 0; i < kViews; ++i) {
                    const auto& d = lfd_views()[i].idir;
                    std::array<int, 3> rd;
                    for (int row = 0; row < 3; ++row)
                        rd[row] = r[row][0] * d[0] + r[row][1] * d[1] + r[row][2] * d[2];
                    int match = -1;
                    for (int j = 0; j < kViews; ++j) {
                        const auto& e = lfd_views()[j].idir;
                        if ((rd[0] == e[0] && rd[1] == e[1] && rd[2] == e[2]) ||
                            (rd[0] == -e[0] && rd[1] == -e[1] && rd[2] == -e[2]))
                            match = j;
                    }
                    perm[size_t(i)] = match;
                }
                out.push_back(perm);
            }
        } while (std::next_permutation(axes, axes + 3));
        return out;
    }();
    return perms;
}

using Silhouette = std::vector<double>;  // kSil^2 soft coverage values

// Axis-aligned views resolve each supersample to a voxel column hit, which
// keeps the rendering exact (and thus exactly translation invariant for
// whole-voxel shifts when the resolution divides kSil * kSub).
Silhouette render_voxels_axis(const VoxelGrid& g, const LfdView& w,
                              const std::vector<uint8_t>& anyhit, int b_axis, int c_axis) {
    Silhouette img(kSil * kSil, 0.0);
    const int n = g.n;
    for (int py = 0; py < kSil; ++py)
        for (int px = 0; px < kSil; ++px) {
            int hits = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double pu = ((px + (sx + 0.5) / kSub) / kSil - 0.5) * w.span;
                    const double pv = ((py + (sy + 0.5) / kSub) / kSil - 0.5) * w.span;
                    const double wx = 0.5 + pu * w.u[0] + pv * w.v[0];
                    const double wy = 0.5 + pu * w.u[1] + pv * w.v[1];
                    const double wz = 0.5 + pu * w.u[2] + pv * w.v[2];
                    const double world[3] = {wx, wy, wz};
                    const int ib = int(std::floor(world[b_axis] * n));
                    const int ic = int(std::floor(world[c_axis] * n));
                    if (ib < 0 || ic < 0 || ib >= n || ic >= n) continue;
                    hits += anyhit[size_t(ic) * n + ib];
                }
            img[size_t(py) * kSil + px] = double(hits) / (kSub * kSub);
        }
    return img;
}

// Diagonal views march each supersample ray through the grid (DDA); all
// three direction components are non-zero for these views.
Silhouette render_voxels_ray(const VoxelGrid& g, const LfdView& w) {
    Silhouette img(kSil * kSil, 0.0);
    const int n = g.n;
    const Vec3 d = w.dir;
    for (int py = 0; py < kSil; ++py)
        for (int px = 0; px < kSil; ++px) {
            int hits = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double pu = ((px + (sx + 0.5) / kSub) / kSil - 0.5) * w.span;
                    const double pv = ((py + (sy + 0.5) / kSub) / kSil - 0.5) * w.span;
                    Vec3 o;
                    for (int i = 0; i < 3; ++i) o[i] = 0.5 + pu * w.u[i] + pv * w.v[i] - d[i];
                    double tmin = 0.0, tmax = 1e30;
                    for (int i = 0; i < 3; ++i) {
                        const double t0 = (0.0 - o[i]) / d[i], t1 = (1.0 - o[i]) / d[i];
                        tmin = std::max(tmin, std::min(t0, t1));
                        tmax = std::min(tmax, std::max(t0, t1));
                    }
                    if (tmax <= tmin) continue;
                    const double t = tmin + 1e-9;
                    int cx[3], step[3];
                    double tnext[3], tdelta[3];
                    bool alive = true;
                    for (int i = 0; i < 3; ++i) {
                        cx[i] = int(std::floor((o[i] + t * d[i]) * n));
                        if (cx[i] < 0 || cx[i] >= n) alive = false;
                        step[i] = d[i] > 0 ? 1 : -1;
                        tdelta[i] = 1.0 / (n * std::abs(d[i]));
                        tnext[i] = ((cx[i] + (step[i] > 0 ? 1 : 0)) / double(n) - o[i]) / d[i];
                    }
                    while (alive) {
                        if (g.occ[size_t((int64_t(cx[2]) * n + cx[1]) * n + cx[0])]) {
                            ++hits;
                            break;
                        }
                        const int ax = tnext[0] <= tnext[1] ? (tnext[0] <= tnext[2] ? 0 : 2)
                                                            : (tnext[1] <= tnext[2] ? 1 : 2);
                        if (tnext[ax] > tmax) break;
                        cx[ax] += step[ax];
                        if (cx[ax] < 0 || cx[ax] >= n) break;
                        tnext[ax] += tdelta[ax];
                    }
                }
            img[size_t(py) * kSil + px] = double(hits) / (kSub * kSub);
        }
    return img;
}

Silhouette render_mesh(const Mesh& mesh, const LfdView& w) {
    const int fine = kSil * kSub;
    std::vector<uint8_t> hit(size_t(fine) * fine, 0);
    for (const auto& tri : mesh.triangles) {
        double x[3], y[3];
        for (int i = 0; i < 3; ++i) {
            const auto& p = mesh.vertices[size_t(tri[i])];
            const double rx = p[0] - 0.5, ry = p[1] - 0.5, rz = p[2] - 0.5;
            const double pu = rx * w.u[0] + ry * w.u[1] + rz * w.u[2];
            const double pv = rx * w.v[0] + ry * w.v[1] + rz * w.v[2];
            x[i] = (pu / w.span + 0.5) * fine;
            y[i] = (pv / w.span + 0.5) * fine;
        }
        double area2 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
        if (area2 == 0.0) continue;
        if (area2 < 0.0) {
            std::swap(x[1], x[2]);
            std::swap(y[1], y[2]);
        }
        const int x0 = std::max(0, int(std::floor(std::min({x[0], x[1], x[2]}))));
        const int x1 = std::min(fine - 1, int(std::ceil(std::max({x[0], x[1], x[2]}))));
        const int y0 = std::max(0, int(std::floor(std::min({y[0], y[1], y[2]}))));
        const int y1 = std::min(fine - 1, int(std::ceil(std::max({y[0], y[1], y[2]}))));
        for (int py = y0; py <= y1; ++py)
            for (int px = x0; px <= x1; ++px) {
                const double sx = px + 0.5, sy = py + 0.5;
                const double w0 = (x[2] - x[1]) * (sy - y[1]) - (y[2] - y[1]) * (sx - x[1]);
                const double w1 = (x[0] - x[2]) * (sy - y[2]) - (y[0] - y[2]) * (sx - x[2]);
                const double w2 = (x[1] - x[0]) * (sy - y[0]) - (y[1] - y[0]) * (sx - x[0]);
                if (w0 >= 0 && w1 >= 0 && w2 >= 0) hit[size_t(py) * fine + px] = 1;
            }
    }
    Silhouette img(kSil * kSil, 0.0);
    for (int py = 0; py < kSil; ++py)
        for (int px = 0; px < kSil; ++px) {
            int hits = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx)
                    hits += hit[size_t(py * kSub + sy) * fine + (px * kSub + sx)];
            img[size_t(py) * kSil + px] = double(hits) / (kSub * kSub);
        }
    return img;
}

// Separable binomial blur ([1,4,6,4,1]/16 per axis). Voxel-scale wiggles in
// a projected silhouette alias badly on the 64^2 raster; bandlimiting first
// makes perimeter and contour features stable under sub-pixel shifts.
Silhouette blur5(const Silhouette& img) {
    static constexpr double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    Silhouette tmp(img.size(), 0.0), out(img.size(), 0.0);
    for (int y = 0; y < kSil; ++y)
        for (int x = 0; x < kSil; ++x) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t) {
                const int xx = x + t;
                if (xx >= 0 && xx < kSil) s += k[t + 2] * img[size_t(y) * kSil + xx];
            }
            tmp[size_t(y) * kSil + x] = s;
        }
    for (int y = 0; y < kSil; ++y)
        for (int x = 0; x < kSil; ++x) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t) {
                const int yy = y + t;
                if (yy >= 0 && yy < kSil) s += k[t + 2] * tmp[size_t(yy) * kSil + x];
            }
            out[size_t(y) * kSil + x] = s;
        }
    return out;
}

std::array<float, SilhouetteDescriptor::feature_count> silhouette_features(const Silhouette& raw,
                                                                           bool* empty) {
    std::array<float, SilhouetteDescriptor::feature_count> feat{};
    const Silhouette img = blur5(blur5(raw));
    double total = 0.0;
    for (double v : img) total += v;
    *empty = total <= 0.0;
    if (*empty) return feat;

    feat[0] = float(total / (kSil * kSil));

    double cx = 0.0, cy = 0.0;
    for (int y = 0; y < kSil; ++y)
        for (int x = 0; x < kSil; ++x) {
            const double v = img[size_t(y) * kSil + x];
            cx += v * (x + 0.5);
            cy += v * (y + 0.5);
        }
    cx /= total;
    cy /= total;

    double mu20 = 0, mu02 = 0, mu11 = 0, mu30 = 0, mu03 = 0, mu21 = 0, mu12 = 0;
    for (int y = 0; y < kSil; ++y)
        for (int x = 0; x < kSil; ++x) {
            const double v = img[size_t(y) * kSil + x];
            if (v == 0.0) continue;
            const double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
            mu20 += v * dx * dx;
            mu02 += v * dy * dy;
            mu11 += v * dx * dy;
            mu30 += v * dx * dx * dx;
            mu03 += v * dy * dy * dy;
            mu21 += v * dx * dx * dy;
            mu12 += v * dx * dy * dy;
        }
    const double s2 = total * total, s3 = std::pow(total, 2.5);
    const double n20 = mu20 / s2, n02 = mu02 / s2, n11 = mu11 / s2;
    const double n30 = mu30 / s3, n03 = mu03 / s3, n21 = mu21 / s3, n12 = mu12 / s3;
    const double a = n30 + n12, b = n21 + n03;
    feat[2] = float(n20 + n02);
    feat[3] = float((n20 - n02) * (n20 - n02) + 4 * n11 * n11);
    feat[4] = float((n30 - 3 * n12) * (n30 - 3 * n12) + (3 * n21 - n03) * (3 * n21 - n03));
    feat[5] = float(a * a + b * b);
    feat[6] = float((n30 - 3 * n12) * a * (a * a - 3 * b * b) + (3 * n21 - n03) * b * (3 * a * a - b * b));
    feat[7] = float((n20 - n02) * (a * a - b * b) + 4 * n11 * a * b);
    feat[8] = float(std::abs((3 * n21 - n03) * a * (a * a - 3 * b * b) -
                             (n30 - 3 * n12) * b * (3 * a * a - b * b)));

    FieldGrid f;
    f.dims = 2;
    f.m = kSil;
    f.values.assign(img.begin(), img.end());
    const auto loops = marching_squares(f, 0.5f);
    if (!loops.empty()) {
        double perim = 0.0;
        size_t main_loop = 0;
        double main_area = -1.0;
        for (size_t li = 0; li < loops.size(); ++li) {
            const Loop& lp = loops[li];
            for (size_t i = 0; i < lp.size(); ++i) {
                const auto& p = lp[i];
                const auto& q = lp[(i + 1) % lp.size()];
                perim += std::hypot(double(q[0]) - p[0], double(q[1]) - p[1]);
            }
            const double la = std::abs(loop_signed_area(lp));
            if (la > main_area) {
                main_area = la;
                main_loop = li;
            }
        }
        feat[1] = float(perim * perim);

        // Resample the dominant contour uniformly by arc length, then take
        // centroid-distance Fourier magnitudes, normalized by the DC term.
        const Loop& lp = loops[main_loop];
        std::vector<double> cum(lp.size() + 1, 0.0);
        for (size_t i = 0; i < lp.size(); ++i) {
            const auto& p = lp[i];
            const auto& q = lp[(i + 1) % lp.size()];
            cum[i + 1] = cum[i] + std::hypot(double(q[0]) - p[0], double(q[1]) - p[1]);
        }
        const double tlen = cum.back();
        if (tlen > 0.0) {
            constexpr int M = 64;
            std::array<double, M> rx, ry;
            size_t seg = 0;
            for (int j = 0; j < M; ++j) {
                const double s = tlen * j / M;
                while (seg + 1 < lp.size() && cum[seg + 1] < s) ++seg;
                const double t = (s - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
                const auto& p = lp[seg];
                const auto& q = lp[(seg + 1) % lp.size()];
                rx[size_t(j)] = p[0] + t * (q[0] - p[0]);
                ry[size_t(j)] = p[1] + t * (q[1] - p[1]);
            }
            double mx = 0, my = 0;
            for (int j = 0; j < M; ++j) {
                mx += rx[size_t(j)];
                my += ry[size_t(j)];
            }
            mx /= M;
            my /= M;
            std::array<double, M> rad;
            for (int j = 0; j < M; ++j) rad[size_t(j)] = std::hypot(rx[size_t(j)] - mx, ry[size_t(j)] - my);
            double f0 = 0.0;
            for (double r : rad) f0 += r;
            for (int kf = 1; kf <= 8; ++kf) {
                std::complex<double> fk(0.0, 0.0);
                for (int j = 0; j < M; ++j)
                    fk += rad[size_t(j)] * std::polar(1.0, -2.0 * M_PI * kf * j / M);
                feat[size_t(8 + kf)] = float(std::abs(fk) / (f0 + 1e-12));
            }
        }
    }
    return feat;
}

SilhouetteDescriptor descriptor_from_renders(const std::array<Silhouette, kViews>& sils) {
    SilhouetteDescriptor d;
    bool any = false;
    for (int i = 0; i < kViews; ++i) {
        bool empty = true;
        d.views[size_t(i)] = silhouette_features(sils[size_t(i)], &empty);
        any = any || !empty;
    }
    if (!any) throw ContractError("lfd_lite: empty shape (no view produced a silhouette)");
    return d;
}

}  // namespace

SilhouetteDescriptor lfd_lite(const VoxelGrid& g) {
    if (g.dims != 3) throw ShapeError("lfd_lite: 3-d shapes only");
    const int n = g.n;
    // Per-axis any-hit projections shared by the +/- axis views.
    std::array<std::vector<uint8_t>, 3> anyhit;
    for (int axis = 0; axis < 3; ++axis) {
        const int b_axis = axis == 0 ? 1 : 0;
        const int c_axis = axis == 2 ? 1 : 2;
        auto& proj = anyhit[size_t(axis)];
        proj.assign(size_t(n) * n, 0);
        int xyz[3];
        for (xyz[2] = 0; xyz[2] < n; ++xyz[2])
            for (xyz[1] = 0; xyz[1] < n; ++xyz[1])
                for (xyz[0] = 0; xyz[0] < n; ++xyz[0])
                    if (g.at(xyz[0], xyz[1], xyz[2]))
                        proj[size_t(xyz[c_axis]) * n + xyz[b_axis]] = 1;
    }
    std::array<Silhouette, kViews> sils;
    for (int i = 0; i < kViews; ++i) {
        const LfdView& w = lfd_views()[size_t(i)];
        if (w.axis) {
            const int axis = i / 2;
            const int b_axis = axis == 0 ? 1 : 0;
            const int c_axis = axis == 2 ? 1 : 2;
            sils[size_t(i)] = render_voxels_axis(g, w, anyhit[size_t(axis)], b_axis, c_axis);
        } else {
            sils[size_t(i)] = render_voxels_ray(g, w);
        }
    }
    return descriptor_from_renders(sils);
}

SilhouetteDescriptor lfd_lite(const Mesh& mesh) {
    if (mesh.triangles.empty()) throw ContractError("lfd_lite: empty shape (mesh has no triangles)");
    std::array<Silhouette, kViews> sils;
    for (int i = 0; i < kViews; ++i) sils[size_t(i)] = render_mesh(mesh, lfd_views()[size_t(i)]);
    return descriptor_from_renders(sils);
}

double lfd_lite_distance(const SilhouetteDescriptor& a, const SilhouetteDescriptor& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& perm : lfd_rotations()) {
        double d = 0.0;
        for (int i = 0; i < kViews; ++i)
            for (int f = 0; f < SilhouetteDescriptor::feature_count; ++f)
                d += std::abs(double(a.views[size_t(perm[size_t(i)])][size_t(f)]) -
                              double(b.views[size_t(i)][size_t(f)]));
        best = std::min(best, d);
    }
    return best;
}

}  // namespace imfield
