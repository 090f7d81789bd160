// Evaluation protocol: pair sampling, error metrics, and CSV / JSON reports.

#ifndef QUATRO_BENCH_HPP
#define QUATRO_BENCH_HPP

#include "quatro/config.hpp"
#include "quatro/core.hpp"
#include "quatro/io.hpp"
#include "quatro/pipeline.hpp"
#include "quatro/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace quatro::bench {

enum class PairKind { loop, odom, augmented };

inline const char *to_string(PairKind k) {
    switch (k) {
        case PairKind::loop: return "loop";
        case PairKind::odom: return "odom";
        case PairKind::augmented: return "aug";
    }
    return "?";
}

struct PairSpec {
    std::size_t src_idx = 0;
    std::size_t tgt_idx = 0;
    RigidMotion gt;  // source frame -> target frame
    PairKind kind = PairKind::loop;
    double aug_yaw_deg = 0.0;

    bool operator==(const PairSpec &o) const {
        return src_idx == o.src_idx && tgt_idx == o.tgt_idx && kind == o.kind && aug_yaw_deg == o.aug_yaw_deg &&
               gt.matrix() == o.gt.matrix();
    }
};

struct EvalRow {
    PairSpec pair;
    RigidMotion estimate;
    double t_err = 0.0;  // m
    double r_err = 0.0;  // deg
    bool success = false;
    double runtime_ms = 0.0;
    std::size_t num_raw = 0;
    std::size_t num_pruned = 0;
    std::size_t num_inliers = 0;
    bool degenerate = false;
};

struct Metrics {
    std::size_t count = 0;
    double t_avg_sq = 0.0;  // m^2
    double t_rmse = 0.0;    // m
    double r_avg = 0.0;     // deg
    double success_rate = 0.0;
};

inline constexpr double kSuccessTranslation = 2.0;
inline constexpr double kSuccessRotationDeg = 10.0;
inline constexpr std::size_t kDefaultSamples = 1000;

inline bool is_success(double t_err, double r_err_deg) {
    return t_err < kSuccessTranslation && r_err_deg < kSuccessRotationDeg;
}

/// Motion that maps points of frame `s` into frame `t`.
inline RigidMotion relative_motion(const Trajectory &traj, std::size_t s, std::size_t t) {
    return compose(traj.at(t).pose.inverse(), traj.at(s).pose);
}

/// Loop pairs: every ordered (s, t) whose positions are between r_min and
/// r_max metres apart and whose indices differ by at least `min_gap`, then a
/// seeded uniform sample of at most n_sample of them.
inline std::vector<PairSpec> sample_loop_pairs(const Trajectory &traj, double r_min, double r_max,
                                               std::size_t min_gap, std::size_t n_sample, std::uint64_t seed,
                                               std::ostream *warn = &std::cerr) {
    if (!(r_min < r_max)) throw InvalidArgument("sample_loop_pairs: r_min must be < r_max");
    if (min_gap < 1) throw InvalidArgument("sample_loop_pairs: m must be >= 1");

    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t s = 0; s < traj.size(); ++s) {
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const std::size_t gap = s > t ? s - t : t - s;
            if (gap < min_gap) continue;
            const double d = (traj[s].pose.translation() - traj[t].pose.translation()).norm();
            if (d >= r_min && d <= r_max) all.emplace_back(s, t);
        }
    }
    if (all.empty()) {
        if (warn) *warn << "warning: no loop pairs in [" << r_min << ", " << r_max << "] m with gap >= " << min_gap << '\n';
        return {};
    }

    // Partial Fisher-Yates, then restore trajectory order.
    SplitMix64 rng(seed);
    const std::size_t k = std::min(n_sample, all.size());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(all.size() - i));
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());

    std::vector<PairSpec> out;
    out.reserve(k);
    for (const auto &[s, t] : all) out.push_back({s, t, relative_motion(traj, s, t), PairKind::loop, 0.0});
    return out;
}

/// Odometry pairs (Δn+1, Δ(n+1)+1) for 0 <= n < (N-1)/Δ - 1, written 1-based;
/// returned 0-based.
inline std::vector<PairSpec> sample_odom_pairs(const Trajectory &traj, std::size_t delta) {
    if (delta < 1) throw InvalidArgument("sample_odom_pairs: delta must be >= 1");
    std::vector<PairSpec> out;
    const auto n_traj = static_cast<double>(traj.size());
    const double bound = (n_traj - 1.0) / static_cast<double>(delta) - 1.0;
    for (std::size_t n = 0; static_cast<double>(n) < bound; ++n) {
        const std::size_t s = delta * n, t = delta * (n + 1);
        if (t >= traj.size()) break;
        out.push_back({s, t, relative_motion(traj, s, t), PairKind::odom, 0.0});
    }
    return out;
}

/// Odometry pairs crossed with a list of yaw augmentations. The target cloud
/// is rotated by R_z(yaw) at load time, so the ground truth becomes
/// R_z(yaw) composed with the odometry motion.
inline std::vector<PairSpec> sample_augmented_pairs(const Trajectory &traj, std::size_t delta,
                                                    const std::vector<double> &yaws_deg) {
    for (double y : yaws_deg)
        if (!std::isfinite(y)) throw InvalidArgument("sample_augmented_pairs: yaw values must be finite");
    const auto base = sample_odom_pairs(traj, delta);
    std::vector<PairSpec> out;
    out.reserve(base.size() * yaws_deg.size());
    for (double yaw : yaws_deg) {
        const RigidMotion aug(rot_z(deg2rad(yaw)), Point3::Zero());
        for (const auto &p : base) out.push_back({p.src_idx, p.tgt_idx, compose(aug, p.gt), PairKind::augmented, yaw});
    }
    return out;
}

inline RigidMotion augmentation(const PairSpec &p) {
    return RigidMotion(rot_z(deg2rad(p.aug_yaw_deg)), Point3::Zero());
}

inline EvalRow evaluate(const PairSpec &pair, const RegistrationReport &report, double runtime_ms) {
    EvalRow row;
    row.pair = pair;
    row.estimate = report.motion;
    row.t_err = (report.motion.translation() - pair.gt.translation()).norm();
    row.r_err = rotation_error_deg(report.motion.rotation(), pair.gt.rotation());
    row.success = is_success(row.t_err, row.r_err);
    row.runtime_ms = runtime_ms;
    row.num_raw = report.num_raw_pairs;
    row.num_pruned = report.num_pruned_pairs;
    row.num_inliers = report.num_final_inliers;
    row.degenerate = report.degenerate;
    return row;
}

inline Metrics compute_metrics(const std::vector<EvalRow> &rows) {
    if (rows.empty()) throw InvalidArgument("compute_metrics: no rows");
    Metrics m;
    m.count = rows.size();
    std::size_t ok = 0;
    for (const auto &r : rows) {
        m.t_avg_sq += r.t_err * r.t_err;
        m.r_avg += r.r_err;
        ok += r.success ? 1 : 0;
    }
    const auto n = static_cast<double>(rows.size());
    m.t_avg_sq /= n;
    m.t_rmse = std::sqrt(m.t_avg_sq);
    m.r_avg /= n;
    m.success_rate = static_cast<double>(ok) / n;
    return m;
}

/// Worker count: hardware concurrency, capped by QUATRO_THREADS when set.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("QUATRO_THREADS")) {
        char *end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

using CloudLoader = std::function<PointCloud(std::size_t index)>;

/// Registers every pair on a bounded worker pool. Rows come back in pair
/// order regardless of scheduling. The loader must be safe to call
/// concurrently.
inline std::vector<EvalRow> run_pairs(const std::vector<PairSpec> &pairs, const CloudLoader &load,
                                      const QuatroConfig &config, const PipelineMode &mode,
                                      unsigned threads = worker_count()) {
    std::vector<EvalRow> rows(pairs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr error;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pairs.size()) return;
            try {
                const PairSpec &p = pairs[i];
                const PointCloud src = load(p.src_idx);
                PointCloud tgt = load(p.tgt_idx);
                if (p.kind == PairKind::augmented) tgt = transform_cloud(tgt, augmentation(p));
                const auto start = std::chrono::steady_clock::now();
                const RegistrationReport rep = mode.fine_align ? register_clouds_c2f(src, tgt, config, mode)
                                                               : register_clouds(src, tgt, config, mode);
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                rows[i] = evaluate(p, rep, ms);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!error) error = std::current_exception();
                next = pairs.size();
            }
        }
    };

    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, pairs.size()))));
    if (n == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    return rows;
}

inline constexpr const char *kCsvHeader =
    "kind,src,tgt,aug_yaw_deg,t_err_m,r_err_deg,success,runtime_ms,num_raw,num_pruned,num_inliers,degenerate";

inline void write_csv(std::ostream &out, const std::vector<EvalRow> &rows) {
    out << kCsvHeader << '\n';
    out.precision(9);
    for (const auto &r : rows) {
        out << to_string(r.pair.kind) << ',' << r.pair.src_idx << ',' << r.pair.tgt_idx << ',' << r.pair.aug_yaw_deg
            << ',' << r.t_err << ',' << r.r_err << ',' << (r.success ? 1 : 0) << ',' << r.runtime_ms << ','
            << r.num_raw << ',' << r.num_pruned << ',' << r.num_inliers << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
}

inline constexpr const char *kSummaryCsvHeader = "group,count,t_avg_sq,t_rmse,r_avg_deg,success_rate";

struct Group {
    std::string label;  // e.g. "10:12" for a band, "yaw=90" for an augmentation
    std::vector<EvalRow> rows;
};

inline void write_summary_csv(std::ostream &out, const std::vector<Group> &groups) {
    out << kSummaryCsvHeader << '\n';
    out.precision(9);
    for (const auto &g : groups) {
        if (g.rows.empty()) {
            out << g.label << ",0,,,,\n";
            continue;
        }
        const Metrics m = compute_metrics(g.rows);
        out << g.label << ',' << m.count << ',' << m.t_avg_sq << ',' << m.t_rmse << ',' << m.r_avg << ','
            << m.success_rate << '\n';
    }
}

inline nlohmann::json metrics_json(const Metrics &m) {
    return {{"count", m.count},   {"t_avg_sq", m.t_avg_sq},         {"t_rmse", m.t_rmse},
            {"r_avg_deg", m.r_avg}, {"success_rate", m.success_rate}};
}

inline nlohmann::json config_json(const QuatroConfig &config) {
    nlohmann::json j = nlohmann::json::object();
    std::istringstream in(serialize_config(config));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

/// JSON summary: schema version, seed, config echo, and one aggregate per group.
inline nlohmann::json summary_json(const QuatroConfig &config, const PipelineMode &mode, std::uint64_t seed,
                                   const std::string &sampling, const std::vector<Group> &groups) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["mode"] = sampling;
    j["ground_seg"] = mode.ground_seg;
    j["c2f"] = mode.fine_align;
    if (mode.ins) j["ins"] = {{"roll_deg", mode.ins->roll_deg}, {"pitch_deg", mode.ins->pitch_deg}};
    if (mode.sensor) j["sensor"] = to_string(*mode.sensor);
    j["config"] = config_json(config);
    j["groups"] = nlohmann::json::array();
    for (const auto &g : groups) {
        nlohmann::json e{{"label", g.label}};
        if (g.rows.empty()) e["count"] = 0;
        else e.update(metrics_json(compute_metrics(g.rows)));
        j["groups"].push_back(std::move(e));
    }
    return j;
}

}  // namespace quatro::bench

#endif  // QUATRO_BENCH_HPP
