// quatro: single-pair registration, batch benchmark and synthetic scene generation.

#include "quatro/quatro.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace quatro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

// Options shared by register and bench. Every one of them may also appear in
// the --config file under the same name (without the dashes).
struct CommonOptions {
    std::string config_path;
    std::string sensor;
    bool no_ground_seg = false;
    bool c2f = false;
    std::string ins;
    double clique_budget_ms = 0.0;
    bool deterministic = false;
    std::string json_path;
};

struct BenchOptions {
    std::string cloud_dir;
    std::string pose_file;
    std::string mode = "loop";
    std::vector<std::string> bands;
    std::size_t n = bench::kDefaultSamples;
    std::uint64_t seed = 0;
    std::size_t min_gap = 50;
    std::size_t delta = 5;
    std::string yaws = "0,45,90,135,180";
    std::string csv_path;
};

std::pair<double, double> parse_pair(const std::string &text, char sep, const std::string &what) {
    const auto pos = text.find(sep);
    if (pos == std::string::npos) throw InvalidArgument(what + ": expected a" + sep + "b, got '" + text + "'");
    return {detail::parse_double(text.substr(0, pos), what), detail::parse_double(text.substr(pos + 1), what)};
}

std::vector<double> parse_doubles(const std::string &text, const std::string &what) {
    return detail::parse_list<double>(text, what, detail::parse_double);
}

// Splits a config file into pipeline parameters and CLI option values.
// Returns the option values keyed by name; pipeline keys go straight into `config`.
std::map<std::string, std::string> load_config_file(const std::string &path, QuatroConfig &config,
                                                    const CLI::App &cmd) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> options;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config: expected 'key = value' in '" + t + "'");
        std::string key = detail::trim(t.substr(0, eq)), value = detail::trim(t.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (cmd.get_option_no_throw("--" + key) != nullptr) {
            options[key] = value;
        } else {
            std::replace(key.begin(), key.end(), '-', '_');
            set_config_value(config, key, value);
        }
    }
    return options;
}

// Applies config-file option values for every flag the user did not pass explicitly.
void apply_file_options(CLI::App &cmd, const std::map<std::string, std::string> &options) {
    for (const auto &[key, value] : options) {
        CLI::Option *opt = cmd.get_option("--" + key);
        if (opt->count() > 0) continue;
        if (opt->get_type_size() == 0) {
            opt->add_result(detail::parse_bool(value, key) ? "true" : "false");
        } else {
            opt->add_result(value);
        }
        opt->run_callback();
    }
}

void add_common_options(CLI::App &cmd, CommonOptions &o) {
    cmd.add_option("--config", o.config_path, "key = value file; command-line flags override it");
    cmd.add_option("--sensor", o.sensor, "Parameter preset: vlp16, hdl64e or os1_64");
    cmd.add_flag("--no-ground-seg", o.no_ground_seg, "Skip ground segmentation");
    cmd.add_flag("--c2f", o.c2f, "Refine the coarse estimate with point-to-point ICP");
    cmd.add_option("--ins", o.ins, "Roll and pitch in degrees, 'roll,pitch'");
    cmd.add_option("--clique-budget-ms", o.clique_budget_ms, "Max-clique time budget; <= 0 is unlimited");
    cmd.add_flag("--deterministic", o.deterministic, "Bound the clique search by expansions instead of time");
    cmd.add_option("--json", o.json_path, "Write a JSON report");
}

std::pair<QuatroConfig, PipelineMode> resolve(CLI::App &cmd, CommonOptions &o) {
    QuatroConfig config;
    if (!o.config_path.empty()) apply_file_options(cmd, load_config_file(o.config_path, config, cmd));
    PipelineMode mode;
    if (!o.sensor.empty()) mode.sensor = parse_sensor_preset(o.sensor);
    mode.ground_seg = !o.no_ground_seg;
    mode.fine_align = o.c2f;
    if (!o.ins.empty()) {
        const auto [roll, pitch] = parse_pair(o.ins, ',', "--ins");
        mode.ins = InsAngles{roll, pitch};
    }
    if (cmd.get_option("--clique-budget-ms")->count() > 0) config.clique_time_budget = o.clique_budget_ms;
    if (o.deterministic) config.deterministic = true;
    return {config, mode};
}

void write_json_file(const nlohmann::json &j, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << '\n';
}

nlohmann::json report_json(const RegistrationReport &r, const PipelineMode &mode) {
    nlohmann::json j;
    j["schema_version"] = 1;
    std::vector<double> m;
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 4; ++col) m.push_back(r.motion.matrix()(row, col));
    j["motion"] = m;
    j["converged"] = r.converged;
    j["degenerate"] = r.degenerate;
    j["num_raw_pairs"] = r.num_raw_pairs;
    j["num_pruned_pairs"] = r.num_pruned_pairs;
    j["num_final_inliers"] = r.num_final_inliers;
    j["mse_fitness"] = r.mse_fitness ? nlohmann::json(*r.mse_fitness) : nlohmann::json(nullptr);
    j["stage_timings_ms"] = r.stage_timings;
    j["ground_seg"] = mode.ground_seg;
    j["c2f"] = mode.fine_align;
    return j;
}

int cmd_register(CLI::App &cmd, CommonOptions &o, const std::string &src_path, const std::string &tgt_path) {
    const auto [config, mode] = resolve(cmd, o);
    PointCloud src, tgt;
    try {
        src = read_cloud(src_path);
        tgt = read_cloud(tgt_path);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    const RegistrationReport r =
        mode.fine_align ? register_clouds_c2f(src, tgt, config, mode) : register_clouds(src, tgt, config, mode);

    std::cout << std::setprecision(9);
    const Eigen::Matrix4d m = r.motion.matrix();
    for (int row = 0; row < 4; ++row)
        std::cout << m(row, 0) << ' ' << m(row, 1) << ' ' << m(row, 2) << ' ' << m(row, 3) << '\n';
    std::cout << "converged: " << (r.converged ? "yes" : "no") << "\ndegenerate: " << (r.degenerate ? "yes" : "no")
              << "\ncorrespondences: raw " << r.num_raw_pairs << ", pruned " << r.num_pruned_pairs << ", inliers "
              << r.num_final_inliers << '\n';
    if (r.mse_fitness) std::cout << "mse_fitness: " << *r.mse_fitness << '\n';
    std::cout << "timings_ms:";
    for (const auto &[k, v] : r.stage_timings) std::cout << ' ' << k << '=' << v;
    std::cout << '\n';

    if (!o.json_path.empty()) write_json_file(report_json(r, mode), o.json_path);
    return r.converged ? kExitOk : kExitNotConverged;
}

std::vector<fs::path> list_clouds(const std::string &dir) {
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".bin" || ext == ".ply")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_bench(CLI::App &cmd, CommonOptions &o, BenchOptions &b) {
    const auto [config, mode] = resolve(cmd, o);
    if (b.cloud_dir.empty() || b.pose_file.empty()) throw InvalidArgument("bench: --clouds and --poses are required");
    std::vector<fs::path> files;
    Trajectory traj;
    try {
        files = list_clouds(b.cloud_dir);
        traj = read_kitti_poses(b.pose_file);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    if (files.size() != traj.size()) {
        std::cerr << "error: " << files.size() << " clouds but " << traj.size() << " poses\n";
        return kExitError;
    }

    std::vector<bench::PairSpec> pairs;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;  // label, row indices
    std::string sampling;
    if (b.mode == "loop") {
        if (b.bands.empty()) b.bands = {"2:6", "6:10", "10:12"};
        for (const auto &band : b.bands) {
            const auto [lo, hi] = parse_pair(band, ':', "--band");
            const auto sampled = bench::sample_loop_pairs(traj, lo, hi, b.min_gap, b.n, b.seed);
            std::vector<std::size_t> idx;
            for (const auto &p : sampled) {
                idx.push_back(pairs.size());
                pairs.push_back(p);
            }
            groups.emplace_back(band, std::move(idx));
        }
        sampling = "loop";
    } else if (b.mode == "odom") {
        pairs = bench::sample_odom_pairs(traj, b.delta);
        std::vector<std::size_t> idx(pairs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        groups.emplace_back("delta=" + std::to_string(b.delta), std::move(idx));
        sampling = "odom";
    } else if (b.mode == "aug") {
        const auto yaws = parse_doubles(b.yaws, "--yaws");
        pairs = bench::sample_augmented_pairs(traj, b.delta, yaws);
        for (double y : yaws) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < pairs.size(); ++i)
                if (pairs[i].aug_yaw_deg == y) idx.push_back(i);
            groups.emplace_back("yaw=" + detail::format_double(y), std::move(idx));
        }
        sampling = "aug";
    } else {
        throw InvalidArgument("--mode must be loop, odom or aug");
    }

    auto load = [&files](std::size_t i) { return read_cloud(files.at(i).string()); };
    std::vector<bench::EvalRow> rows;
    try {
        rows = bench::run_pairs(pairs, load, config, mode);
    } catch (const std::runtime_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }

    std::vector<bench::Group> summary;
    for (const auto &[label, idx] : groups) {
        bench::Group g{label, {}};
        for (std::size_t i : idx) g.rows.push_back(rows[i]);
        summary.push_back(std::move(g));
    }
    bench::write_summary_csv(std::cout, summary);
    if (!b.csv_path.empty()) {
        std::ofstream out(b.csv_path);
        if (!out) throw std::runtime_error("cannot write file: " + b.csv_path);
        bench::write_csv(out, rows);
    }
    if (!o.json_path.empty()) write_json_file(bench::summary_json(config, mode, b.seed, sampling, summary), o.json_path);
    return kExitOk;
}

int cmd_synth(const std::string &spec_path, const std::string &out_dir, std::size_t max_frames) {
    synth::SceneSpec spec;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) {
            std::cerr << "error: cannot open scene spec: " << spec_path << '\n';
            return kExitError;
        }
        try {
            spec = synth::parse_scene_spec(in);
        } catch (const InvalidArgument &e) {
            std::cerr << "error: invalid scene spec: " << e.what() << '\n';
            return kExitError;
        }
    }
    const synth::Scene scene = synth::generate_scene(spec);
    Trajectory traj = synth::loop_trajectory(spec);
    if (max_frames > 0 && traj.size() > max_frames) traj.resize(max_frames);

    const fs::path root(out_dir);
    fs::create_directories(root / "clouds");
    fs::create_directories(root / "labels");
    std::size_t ground = 0, total = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const synth::Scan s = synth::scan(scene, traj[i].pose, spec.seed * 1'000'003ULL + i);
        std::ostringstream name;
        name << std::setw(6) << std::setfill('0') << i;
        write_kitti_bin(s.cloud, (root / "clouds" / (name.str() + ".bin")).string());
        std::ofstream labels(root / "labels" / (name.str() + ".txt"));
        for (bool g : s.ground) labels << (g ? 1 : 0) << '\n';
        ground += static_cast<std::size_t>(std::count(s.ground.begin(), s.ground.end(), true));
        total += s.ground.size();
    }
    write_kitti_poses(traj, (root / "poses.txt").string());
    std::cout << "frames: " << traj.size() << "\nground_fraction: "
              << (total ? double(ground) / double(total) : 0.0) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quatro++ robust global registration"};
    app.require_subcommand(1);

    CommonOptions reg_opts;
    std::string src_path, tgt_path;
    auto *reg = app.add_subcommand("register", "Register a source cloud onto a target cloud");
    reg->add_option("source", src_path, "Source cloud (.bin or .ply)")->required();
    reg->add_option("target", tgt_path, "Target cloud (.bin or .ply)")->required();
    add_common_options(*reg, reg_opts);

    CommonOptions bench_opts;
    BenchOptions b;
    auto *bch = app.add_subcommand("bench", "Evaluate sampled pairs of a sequence");
    bch->add_option("--clouds", b.cloud_dir, "Directory of .bin/.ply frames, sorted by name");
    bch->add_option("--poses", b.pose_file, "KITTI pose file, one line per frame");
    bch->add_option("--mode", b.mode, "Sampling: loop, odom or aug");
    bch->add_option("--band", b.bands, "Loop distance band lo:hi in metres; repeatable");
    bch->add_option("--n", b.n, "Loop pairs sampled per band");
    bch->add_option("--seed", b.seed, "Sampling seed");
    bch->add_option("--min-gap", b.min_gap, "Minimum frame index gap for loop pairs");
    bch->add_option("--delta", b.delta, "Frame interval for odom and aug pairs");
    bch->add_option("--yaws", b.yaws, "Comma-separated yaw augmentations in degrees");
    bch->add_option("--csv", b.csv_path, "Write per-pair rows");
    add_common_options(*bch, bench_opts);

    std::string spec_path, out_dir;
    std::size_t max_frames = 0;
    auto *syn = app.add_subcommand("synth", "Generate a synthetic urban sequence");
    syn->add_option("--spec", spec_path, "Scene spec file (key = value); defaults when omitted");
    syn->add_option("--out", out_dir, "Output directory")->required();
    syn->add_option("--max-frames", max_frames, "Keep only the first N frames; 0 keeps all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (reg->parsed()) return cmd_register(*reg, reg_opts, src_path, tgt_path);
        if (bch->parsed()) return cmd_bench(*bch, bench_opts, b);
        return cmd_synth(spec_path, out_dir, max_frames);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}
