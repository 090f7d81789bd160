// Decoupled rotation / translation estimation.
//
// Rotation is solved first from translation-invariant measurements (TIMs),
// restricted to yaw and made robust by graduated non-convexity over a
// truncated least-squares loss. Translation is then estimated per axis by
// consensus-interval search.

#ifndef QUATRO_SOLVER_HPP
#define QUATRO_SOLVER_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace quatro {

/// Paired difference vectors beta_k ~ R alpha_k with weights in [0, 1].
struct TimSet {
    std::vector<Eigen::Vector3d> alpha;  // source side
    std::vector<Eigen::Vector3d> beta;   // target side
    std::vector<double> weights;

    std::size_t size() const { return alpha.size(); }
    bool empty() const { return alpha.empty(); }
};

/// Chain TIMs over the ordered correspondences: element n pairs with n + 1,
/// the last with the first. Fewer than two correspondences give an empty set.
inline TimSet build_tims(const PointCloud &src, const PointCloud &tgt, const CorrespondenceSet &corr) {
    TimSet tims;
    const std::size_t k = corr.size();
    if (k < 2) return tims;
    corr.check_bounds(src.size(), tgt.size());
    tims.alpha.reserve(k);
    tims.beta.reserve(k);
    for (std::size_t n = 0; n < k; ++n) {
        const auto &a = corr[n];
        const auto &b = corr[(n + 1) % k];
        tims.alpha.push_back(src[b.src_idx] - src[a.src_idx]);
        tims.beta.push_back(tgt[b.tgt_idx] - tgt[a.tgt_idx]);
    }
    tims.weights.assign(k, 1.0);
    return tims;
}

struct YawSolution {
    Rotation rotation = Rotation::Identity();
    double yaw_rad = 0.0;
    bool degenerate = false;
};

/// Weighted 2-D Wahba problem in closed form:
/// argmin_theta sum_k w_k |beta_k - R_z(theta) alpha_k|^2.
/// Only the xy components enter, so z errors never change the result.
inline YawSolution solve_yaw_fixed_weights(const TimSet &tims, const std::vector<double> &weights) {
    double s_cross = 0.0, s_dot = 0.0, mass = 0.0;
    for (std::size_t k = 0; k < tims.size(); ++k) {
        const double w = weights[k];
        if (w == 0.0) continue;
        const auto &a = tims.alpha[k];
        const auto &b = tims.beta[k];
        s_cross += w * (a.x() * b.y() - a.y() * b.x());
        s_dot += w * (a.x() * b.x() + a.y() * b.y());
        mass += w * std::hypot(a.x(), a.y()) * std::hypot(b.x(), b.y());
    }
    YawSolution sol;
    if (!(mass > 0.0) || (s_cross == 0.0 && s_dot == 0.0)) {
        sol.degenerate = true;
        return sol;
    }
    sol.yaw_rad = std::atan2(s_cross, s_dot);
    sol.rotation = rot_z(sol.yaw_rad);
    return sol;
}

inline YawSolution solve_yaw_fixed_weights(const TimSet &tims) { return solve_yaw_fixed_weights(tims, tims.weights); }

/// Closed-form truncated-least-squares weight for one squared residual.
/// The zero branch is tested first, so its boundary belongs to it.
inline double tls_weight(double residual_sq, double mu, double noise_bound) {
    const double c2 = noise_bound * noise_bound;
    if (residual_sq >= (mu + 1.0) / mu * c2) return 0.0;
    if (residual_sq >= mu / (mu + 1.0) * c2) return noise_bound * std::sqrt(mu * (mu + 1.0) / residual_sq) - mu;
    return 1.0;
}

inline double tim_residual_sq(const TimSet &tims, std::size_t k, const Rotation &r) {
    return (tims.beta[k] - r * tims.alpha[k]).squaredNorm();
}

inline std::vector<double> update_weights(const TimSet &tims, const Rotation &r, double mu, double noise_bound) {
    if (!(mu > 0.0)) throw InvalidArgument("update_weights: mu must be > 0");
    std::vector<double> w(tims.size());
    for (std::size_t k = 0; k < tims.size(); ++k) w[k] = tls_weight(tim_residual_sq(tims, k, r), mu, noise_bound);
    return w;
}

struct GncResult {
    Rotation rotation = Rotation::Identity();
    std::vector<double> weights;
    bool converged = false;
    bool degenerate = false;
    int iterations = 0;
    double mu_initial = 0.0;
    /// mu used by each weight update, in order.
    std::vector<double> mu_history;
    double cost = 0.0;
};

/// Alternates the yaw solve with the weight update while mu grows by
/// gnc_factor each iteration. Stops on a cost change below cost_tolerance or
/// after max_iters.
inline GncResult gnc_rotation(const TimSet &tims, const QuatroConfig &config) {
    GncResult res;
    if (tims.empty()) {
        res.degenerate = true;
        return res;
    }
    const double c2 = config.noise_bound * config.noise_bound;
    std::vector<double> w(tims.size(), 1.0);

    double max_r = 0.0;
    for (std::size_t k = 0; k < tims.size(); ++k) max_r = std::max(max_r, (tims.beta[k] - tims.alpha[k]).squaredNorm());

    if (max_r <= c2) {
        // Every TIM is already within the noise bound under identity.
        const auto sol = solve_yaw_fixed_weights(tims, w);
        res.rotation = sol.rotation;
        res.weights = std::move(w);
        res.degenerate = sol.degenerate;
        res.converged = !sol.degenerate;
        return res;
    }

    double mu = c2 / (max_r - c2);
    res.mu_initial = mu;
    double prev_cost = std::numeric_limits<double>::infinity();
    Rotation rotation = Rotation::Identity();
    bool have_rotation = false;
    for (int it = 0; it < config.max_iters; ++it) {
        const auto sol = solve_yaw_fixed_weights(tims, w);
        if (sol.degenerate) {
            res.degenerate = !have_rotation;
            break;
        }
        rotation = sol.rotation;
        have_rotation = true;

        double cost = 0.0;
        for (std::size_t k = 0; k < tims.size(); ++k) {
            const double r = tim_residual_sq(tims, k, rotation);
            cost += w[k] * r;
            w[k] = tls_weight(r, mu, config.noise_bound);
        }
        res.mu_history.push_back(mu);
        res.iterations = it + 1;
        res.cost = cost;
        mu *= config.gnc_factor;
        if (std::abs(cost - prev_cost) < config.cost_tolerance) {
            res.converged = true;
            break;
        }
        prev_cost = cost;
    }
    res.rotation = rotation;
    res.weights = std::move(w);
    return res;
}

/// v_ij = q_j - R p_i for every correspondence, in order.
inline std::vector<Eigen::Vector3d> translation_discrepancies(const PointCloud &src, const PointCloud &tgt,
                                                              const CorrespondenceSet &corr, const Rotation &r) {
    corr.check_bounds(src.size(), tgt.size());
    std::vector<Eigen::Vector3d> v;
    v.reserve(corr.size());
    for (const auto &c : corr) v.push_back(tgt[c.tgt_idx] - r * src[c.src_idx]);
    return v;
}

/// Truncated cost sum_i min((t - v_i)^2 / sigma^2, c^2).
inline double truncated_cost(double t, const std::vector<double> &values, double sigma, double noise_bound) {
    const double c2 = noise_bound * noise_bound;
    double cost = 0.0;
    for (double v : values) cost += std::min((t - v) * (t - v) / (sigma * sigma), c2);
    return cost;
}

struct CoteCandidate {
    double estimate = 0.0;
    double cost = std::numeric_limits<double>::infinity();
    std::size_t consensus_size = 0;
    std::size_t gap_index = 0;
};

/// Consensus-interval search on one axis. Intervals [v - sigma c, v + sigma c]
/// split the line into gaps; each gap's midpoint defines a consensus set
/// whose mean is a candidate, and the candidate of lowest truncated cost over
/// all values wins (ties: larger consensus, then earlier gap).
inline CoteCandidate cote_component_detail(const std::vector<double> &values, double sigma, double noise_bound) {
    if (values.empty()) throw InvalidArgument("cote_component: empty input");
    const double c2 = noise_bound * noise_bound;
    const double half = sigma * noise_bound;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> prefix(sorted.size() + 1, 0.0);
    for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];

    std::vector<double> bounds;
    bounds.reserve(2 * values.size());
    for (double v : values) {
        bounds.push_back(v - half);
        bounds.push_back(v + half);
    }
    std::sort(bounds.begin(), bounds.end());

    CoteCandidate best;
    for (std::size_t g = 0; g + 1 < bounds.size(); ++g) {
        if (!(bounds[g] < bounds[g + 1])) continue;
        const double phi = 0.5 * (bounds[g] + bounds[g + 1]);
        // Members satisfy (phi - v)^2 / sigma^2 <= c^2, a contiguous range of sorted values.
        auto inside = [&](double v) { return (phi - v) * (phi - v) / (sigma * sigma) <= c2; };
        auto lo = std::lower_bound(sorted.begin(), sorted.end(), phi - half);
        while (lo != sorted.begin() && inside(*(lo - 1))) --lo;
        while (lo != sorted.end() && !inside(*lo) && *lo < phi) ++lo;
        auto hi = std::upper_bound(lo, sorted.end(), phi + half);
        while (hi != sorted.end() && inside(*hi)) ++hi;
        while (hi != lo && !inside(*(hi - 1))) --hi;
        const auto count = static_cast<std::size_t>(hi - lo);
        if (count == 0) continue;
        const std::size_t i0 = static_cast<std::size_t>(lo - sorted.begin());
        const double estimate = (prefix[i0 + count] - prefix[i0]) / static_cast<double>(count);
        const double cost = truncated_cost(estimate, values, sigma, noise_bound);
        if (cost < best.cost || (cost == best.cost && count > best.consensus_size)) best = {estimate, cost, count, g};
    }
    if (best.consensus_size == 0) best = {values.front(), truncated_cost(values.front(), values, sigma, noise_bound), 1, 0};
    return best;
}

inline double cote_component(const std::vector<double> &values, double sigma, double noise_bound) {
    return cote_component_detail(values, sigma, noise_bound).estimate;
}

/// Component-wise translation from the discrepancies under rotation r.
inline Point3 cote(const PointCloud &src, const PointCloud &tgt, const CorrespondenceSet &corr, const Rotation &r,
                   const QuatroConfig &config) {
    if (corr.empty()) throw InvalidArgument("cote: empty correspondence set");
    const auto v = translation_discrepancies(src, tgt, corr, r);
    Point3 t;
    std::vector<double> comp(v.size());
    for (int l = 0; l < 3; ++l) {
        for (std::size_t i = 0; i < v.size(); ++i) comp[i] = v[i][l];
        t[l] = cote_component(comp, config.sigma_ij, config.noise_bound);
    }
    return t;
}

/// R_y(pitch) R_x(roll), angles in degrees.
inline Rotation ins_rotation(double roll_deg, double pitch_deg) {
    return rot_y(deg2rad(pitch_deg)) * rot_x(deg2rad(roll_deg));
}

/// Rotates the source into the roll/pitch-compensated frame.
inline PointCloud ins_compensate(const PointCloud &src, double roll_deg, double pitch_deg) {
    if (!std::isfinite(roll_deg) || !std::isfinite(pitch_deg))
        throw InvalidArgument("ins_compensate: angles must be finite");
    return transform_cloud(src, RigidMotion(ins_rotation(roll_deg, pitch_deg), Point3::Zero()));
}

struct SolverResult {
    RigidMotion motion;
    GncResult gnc;
    std::size_t num_inliers = 0;  // TIMs with final weight > 0.5
    bool degenerate = false;
};

/// Rotation then translation on an already-pruned correspondence set.
/// `pre_rotation` (e.g. from INS) is assumed already applied to `src`; it is
/// folded into the reported rotation.
inline SolverResult solve(const PointCloud &src, const PointCloud &tgt, const CorrespondenceSet &corr,
                          const QuatroConfig &config, const Rotation &pre_rotation = Rotation::Identity()) {
    SolverResult out;
    const TimSet tims = build_tims(src, tgt, corr);
    Rotation yaw = Rotation::Identity();
    if (tims.empty()) {
        out.degenerate = true;
    } else {
        out.gnc = gnc_rotation(tims, config);
        yaw = out.gnc.rotation;
        for (double w : out.gnc.weights) out.num_inliers += w > 0.5 ? 1 : 0;
        out.degenerate = out.gnc.degenerate || out.num_inliers < 3;
    }
    const Point3 t = corr.empty() ? Point3::Zero() : cote(src, tgt, corr, yaw, config);
    out.motion = RigidMotion(yaw * pre_rotation, t);
    return out;
}

}  // namespace quatro

#endif  // QUATRO_SOLVER_HPP
