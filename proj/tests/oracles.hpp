// Independent reference implementations used to check the library.
// Each one is deliberately naive: brute force over all candidates.

#pragma once

#include "quatro/core.hpp"
#include "quatro/pruning.hpp"
#include "quatro/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

namespace oracle {

using quatro::Point3;
using quatro::Rotation;

inline Rotation random_rotation(quatro::SplitMix64 &rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return q.normalized().toRotationMatrix();
}

inline quatro::PointCloud random_cloud(quatro::SplitMix64 &rng, std::size_t n, double extent) {
    quatro::PointCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.push_back(Point3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)));
    return c;
}

/// Full SO(3) least squares (Kabsch/Umeyama without scale).
inline quatro::RigidMotion kabsch(const std::vector<Point3> &a, const std::vector<Point3> &b) {
    Point3 ca = Point3::Zero(), cb = Point3::Zero();
    for (std::size_t i = 0; i < a.size(); ++i) ca += a[i], cb += b[i];
    ca /= double(a.size()), cb /= double(b.size());
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < a.size(); ++i) h += (a[i] - ca) * (b[i] - cb).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    const Rotation r = svd.matrixV() * d * svd.matrixU().transpose();
    return {r, cb - r * ca};
}

/// Yaw minimising sum_k w_k |beta_k - R_z alpha_k|^2 by scanning the circle,
/// then refining with golden-section search in the best cell.
inline double grid_search_yaw(const std::vector<Eigen::Vector3d> &alpha, const std::vector<Eigen::Vector3d> &beta,
                              const std::vector<double> &w, double step = 1e-4) {
    auto cost = [&](double th) {
        const Rotation r = quatro::rot_z(th);
        double c = 0;
        for (std::size_t k = 0; k < alpha.size(); ++k) c += w[k] * (beta[k] - r * alpha[k]).squaredNorm();
        return c;
    };
    double best = 0, best_c = std::numeric_limits<double>::infinity();
    for (double th = -quatro::kPi; th < quatro::kPi; th += step) {
        const double c = cost(th);
        if (c < best_c) best_c = c, best = th;
    }
    double lo = best - step, hi = best + step;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int i = 0; i < 100; ++i) {
        const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        if (cost(x1) < cost(x2)) hi = x2;
        else lo = x1;
    }
    return 0.5 * (lo + hi);
}

/// Maximum clique size by enumerating every vertex subset (n <= 20).
inline std::size_t exhaustive_max_clique(const quatro::CompatGraph &g) {
    const std::size_t n = g.num_vertices();
    std::size_t best = 0;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
        if (size <= best) continue;
        bool ok = true;
        for (std::size_t a = 0; a < n && ok; ++a) {
            if (!(mask >> a & 1u)) continue;
            for (std::size_t b = a + 1; b < n && ok; ++b)
                if ((mask >> b & 1u) && !g.has_edge(a, b)) ok = false;
        }
        if (ok) best = size;
    }
    return best;
}

struct CoteBrute {
    double estimate = 0;
    double cost = std::numeric_limits<double>::infinity();
};

/// Every gap between consecutive interval endpoints is probed at its
/// midpoint; the consensus mean with the lowest truncated cost wins.
inline CoteBrute cote_brute(const std::vector<double> &v, double sigma, double c) {
    std::vector<double> e;
    for (double x : v) e.push_back(x - sigma * c), e.push_back(x + sigma * c);
    std::sort(e.begin(), e.end());
    auto cost = [&](double t) {
        double s = 0;
        for (double x : v) s += std::min((t - x) * (t - x) / (sigma * sigma), c * c);
        return s;
    };
    CoteBrute best;
    for (std::size_t g = 0; g + 1 < e.size(); ++g) {
        if (!(e[g] < e[g + 1])) continue;
        const double phi = 0.5 * (e[g] + e[g + 1]);
        double sum = 0;
        int count = 0;
        for (double x : v)
            if ((phi - x) * (phi - x) / (sigma * sigma) <= c * c) sum += x, ++count;
        if (count == 0) continue;
        const double t = sum / count;
        const double ct = cost(t);
        if (ct < best.cost) best = {t, ct};
    }
    return best;
}

/// floor(coord / voxel) bucketing with per-bucket centroids.
inline std::map<std::tuple<long, long, long>, Point3> voxel_centroids(const quatro::PointCloud &c, double voxel) {
    std::map<std::tuple<long, long, long>, std::pair<Point3, int>> acc;
    for (const auto &p : c.points) {
        auto key = std::make_tuple(long(std::floor(p.x() / voxel)), long(std::floor(p.y() / voxel)),
                                   long(std::floor(p.z() / voxel)));
        auto &[s, n] = acc[key];
        if (n == 0) s = Point3::Zero();
        s += p;
        ++n;
    }
    std::map<std::tuple<long, long, long>, Point3> out;
    for (const auto &[k, v] : acc) out[k] = v.first / v.second;
    return out;
}

/// Nearest neighbour by linear scan; ties go to the smaller index.
template <typename Vec>
inline std::size_t brute_nn(const std::vector<Vec> &set, const Vec &q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double d = (set[i] - q).squaredNorm();
        if (d < best_d) best_d = d, best = i;
    }
    return best;
}

}  // namespace oracle
