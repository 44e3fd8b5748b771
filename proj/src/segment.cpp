#include "boxfit/segment.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "boxfit/errors.hpp"
#include "boxfit/rng.hpp"

namespace boxfit {

namespace {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    }
};

}  // namespace

InstanceMask segment_instances(const DepthImage& depth,
                               const CameraIntrinsics& K,
                               const SegmentConfig& cfg) {
    if (depth.empty()) throw InvalidArgument("segment_instances: empty depth");

    const int w = depth.width;
    const int h = depth.height;
    InstanceMask out(w, h);

    // Back-project valid pixels once.
    std::vector<Vec3> points(size_t(w) * h, Vec3::Zero());
    std::vector<int> valid_idx;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double z = depth.at(x, y);
            if (z <= 0.0) continue;
            const size_t i = size_t(y) * w + x;
            points[i] = Vec3((x + 0.5 - K.cx) * z / K.fx,
                            (y + 0.5 - K.cy) * z / K.fy, z);
            valid_idx.push_back(int(i));
        }
    }
    if (valid_idx.empty()) return out;

    // Local surface normals from central differences; pixels that graze the
    // plane but belong to a perpendicular surface (box sides touching the
    // floor) must not be removed with it.
    std::vector<Vec3> normals(size_t(w) * h, Vec3::Zero());
    {
        const int step = 3;
        for (int y = step; y < h - step; ++y) {
            for (int x = step; x < w - step; ++x) {
                if (depth.at(x, y) <= 0.0 || depth.at(x - step, y) <= 0.0 ||
                    depth.at(x + step, y) <= 0.0 ||
                    depth.at(x, y - step) <= 0.0 ||
                    depth.at(x, y + step) <= 0.0)
                    continue;
                const size_t i = size_t(y) * w + x;
                const double zc = depth.at(x, y);
                // a depth jump inside the stencil means the difference spans
                // two surfaces; leave the normal unknown
                if (std::abs(depth.at(x - step, y) - zc) > 0.05 ||
                    std::abs(depth.at(x + step, y) - zc) > 0.05 ||
                    std::abs(depth.at(x, y - step) - zc) > 0.05 ||
                    std::abs(depth.at(x, y + step) - zc) > 0.05)
                    continue;
                const Vec3 du = points[size_t(y) * w + x + step] -
                                points[size_t(y) * w + x - step];
                const Vec3 dv = points[size_t(y + step) * w + x] -
                                points[size_t(y - step) * w + x];
                const Vec3 n = du.cross(dv);
                const double len = n.norm();
                if (len > 1e-12) normals[i] = n / len;
            }
        }
    }

    // Dominant-plane removal (floor / shelf).
    std::vector<char> removed(size_t(w) * h, 0);
    {
        constexpr double kNormalGate = 0.57;  // ~55 degrees
        Rng rng = Rng(cfg.seed).substream(7);
        Vec3 best_n = Vec3::Zero();
        double best_d = 0.0;
        size_t best_count = 0;
        const size_t n = valid_idx.size();
        auto plane_inlier = [&](int idx, const Vec3& nrm, double d) {
            if (std::abs(nrm.dot(points[idx]) - d) >
                cfg.plane_inlier_threshold)
                return false;
            const Vec3& pn = normals[idx];
            if (pn.squaredNorm() == 0.0) return true;  // unknown normal
            return std::abs(pn.dot(nrm)) >= kNormalGate;
        };
        for (int it = 0; it < cfg.ransac_iters; ++it) {
            const Vec3& a = points[valid_idx[size_t(rng.uniform_int(0, n - 1))]];
            const Vec3& b = points[valid_idx[size_t(rng.uniform_int(0, n - 1))]];
            const Vec3& c = points[valid_idx[size_t(rng.uniform_int(0, n - 1))]];
            Vec3 nrm = (b - a).cross(c - a);
            const double len = nrm.norm();
            if (len < 1e-9) continue;
            nrm /= len;
            const double d = nrm.dot(a);
            size_t count = 0;
            for (int idx : valid_idx) {
                if (plane_inlier(idx, nrm, d)) ++count;
            }
            if (count > best_count) {
                best_count = count;
                best_n = nrm;
                best_d = d;
            }
        }
        if (best_count >=
            size_t(cfg.min_plane_fraction * double(valid_idx.size()))) {
            for (int idx : valid_idx) {
                if (plane_inlier(idx, best_n, best_d)) removed[idx] = 1;
            }
        }
    }

    // Euclidean clustering over the pixel grid (8-neighborhood).
    UnionFind uf(size_t(w) * h);
    const double maxd2 = cfg.cluster_distance * cfg.cluster_distance;
    auto usable = [&](int x, int y) {
        const size_t i = size_t(y) * w + x;
        return depth.at(x, y) > 0.0 && !removed[i];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!usable(x, y)) continue;
            const size_t i = size_t(y) * w + x;
            static constexpr int kNb[4][2] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
            for (const auto& nb : kNb) {
                const int nx = x + nb[0];
                const int ny = y + nb[1];
                if (nx < 0 || nx >= w || ny >= h) continue;
                if (!usable(nx, ny)) continue;
                const size_t j = size_t(ny) * w + nx;
                if ((points[i] - points[j]).squaredNorm() <= maxd2) {
                    uf.unite(int(i), int(j));
                }
            }
        }
    }

    // Component sizes.
    std::vector<int> size_of(size_t(w) * h, 0);
    for (int idx : valid_idx) {
        if (!removed[idx]) ++size_of[uf.find(idx)];
    }
    std::vector<int> roots;
    for (size_t i = 0; i < size_of.size(); ++i) {
        if (size_of[i] >= cfg.min_component_px) roots.push_back(int(i));
    }
    // Larger components get smaller labels; ties broken by scan order.
    std::stable_sort(roots.begin(), roots.end(),
                     [&](int a, int b) { return size_of[a] > size_of[b]; });
    if (roots.size() > 255) roots.resize(255);

    std::vector<std::uint8_t> label_of(size_t(w) * h, 0);
    for (size_t k = 0; k < roots.size(); ++k) {
        label_of[roots[k]] = std::uint8_t(k + 1);
    }
    for (int idx : valid_idx) {
        if (removed[idx]) continue;
        out.data[idx] = label_of[uf.find(idx)];
    }
    return out;
}

}  // namespace boxfit
