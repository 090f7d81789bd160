// Pipeline parameters and their flat `key = value` text form.

#ifndef QUATRO_CONFIG_HPP
#define QUATRO_CONFIG_HPP

#include "quatro/core.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace quatro {

/// Concentric zone model: zones of rings x sectors between min_range and max_range.
struct CzmLayout {
    double min_range = 2.7;
    double max_range = 80.0;
    /// Inner radius of each zone; the first equals min_range.
    std::vector<double> zone_min_ranges{2.7, 12.3625, 22.025, 41.35};
    std::vector<int> num_rings{2, 4, 4, 4};
    std::vector<int> num_sectors{16, 32, 54, 32};

    std::size_t num_zones() const { return zone_min_ranges.size(); }

    double zone_max_range(std::size_t zone) const {
        return zone + 1 < zone_min_ranges.size() ? zone_min_ranges[zone + 1] : max_range;
    }

    void validate() const {
        const std::size_t z = zone_min_ranges.size();
        if (z == 0 || num_rings.size() != z || num_sectors.size() != z)
            throw InvalidArgument("CzmLayout: zone, ring and sector lists must have equal non-zero length");
        if (!(min_range >= 0.0) || std::abs(zone_min_ranges.front() - min_range) > 1e-12)
            throw InvalidArgument("CzmLayout: first zone must start at min_range");
        for (std::size_t i = 0; i < z; ++i) {
            if (num_rings[i] < 1 || num_sectors[i] < 1)
                throw InvalidArgument("CzmLayout: rings and sectors must be >= 1");
            if (!(zone_max_range(i) > zone_min_ranges[i]))
                throw InvalidArgument("CzmLayout: zone ranges must be strictly increasing");
        }
    }
};

/// Ground fitting and likelihood thresholds.
struct GroundParams {
    double seed_ratio = 0.2;
    int num_iters = 3;
    double dist_threshold = 0.125;       // m
    double uprightness_deg = 30.0;
    double elevation_base = -1.2;        // m, zone 0 threshold in the sensor frame
    double elevation_step = 0.2;         // m added per zone
    double elevation_offset = 0.0;       // m, shifts every zone threshold (hand-held rigs)
    double flatness_threshold = 0.08;    // m^2

    double elevation_threshold(std::size_t zone) const {
        return elevation_base + elevation_step * static_cast<double>(zone) + elevation_offset;
    }
};

enum class SensorPreset { vlp16, hdl64e, os1_64 };

inline SensorPreset parse_sensor_preset(std::string_view name) {
    if (name == "vlp16") return SensorPreset::vlp16;
    if (name == "hdl64e") return SensorPreset::hdl64e;
    if (name == "os1-64") return SensorPreset::os1_64;
    throw InvalidArgument("unknown sensor preset: " + std::string(name));
}

inline const char *to_string(SensorPreset s) {
    switch (s) {
        case SensorPreset::vlp16: return "vlp16";
        case SensorPreset::hdl64e: return "hdl64e";
        case SensorPreset::os1_64: return "os1-64";
    }
    return "?";
}

struct QuatroConfig {
    double noise_bound = 0.3;          // c-bar, m
    int max_iters = 50;                // GNC iterations
    double gnc_factor = 1.4;           // kappa
    double voxel_size = 0.3;           // m
    double normal_radius = 0.5;        // m
    double fpfh_radius = 0.65;         // m
    double sigma_ij = 1.0;
    double clique_time_budget = 200.0; // ms
    double cost_tolerance = 1e-10;

    /// Replaces the wall-clock clique budget with an expansion count.
    bool deterministic = false;
    std::uint64_t clique_node_budget = 2'000'000;
    /// Pruned sets smaller than this are reported as not converged.
    int min_clique_size = 5;

    CzmLayout czm;
    GroundParams ground;

    int icp_max_iters = 50;
    double icp_max_corr_dist = 1.0;    // m
    double icp_epsilon = 1e-6;

    void apply_preset(SensorPreset preset) {
        switch (preset) {
            case SensorPreset::vlp16: voxel_size = 0.1; normal_radius = 0.3; fpfh_radius = 0.45; break;
            case SensorPreset::hdl64e: voxel_size = 0.3; normal_radius = 0.5; fpfh_radius = 0.65; break;
            case SensorPreset::os1_64: voxel_size = 0.6; normal_radius = 1.5; fpfh_radius = 2.25; break;
        }
    }

    static QuatroConfig for_sensor(SensorPreset preset) {
        QuatroConfig c;
        c.apply_preset(preset);
        return c;
    }

    void validate() const {
        if (!(noise_bound > 0.0)) throw InvalidArgument("noise_bound must be > 0");
        if (!(gnc_factor > 1.0)) throw InvalidArgument("gnc_factor must be > 1");
        if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
        if (!(voxel_size > 0.0 && voxel_size < normal_radius && normal_radius < fpfh_radius))
            throw InvalidArgument("radii must satisfy 0 < voxel_size < normal_radius < fpfh_radius");
        if (!(sigma_ij > 0.0)) throw InvalidArgument("sigma_ij must be > 0");
        if (!(cost_tolerance >= 0.0)) throw InvalidArgument("cost_tolerance must be >= 0");
        if (icp_max_iters < 1 || !(icp_max_corr_dist > 0.0)) throw InvalidArgument("invalid ICP parameters");
        czm.validate();
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string &s, const std::string &key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        throw InvalidArgument("config: bad number for '" + key + "': " + s);
    }
    if (used != s.size()) throw InvalidArgument("config: bad number for '" + key + "': " + s);
    return v;
}

inline long long parse_int(const std::string &s, const std::string &key) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception &) {
        throw InvalidArgument("config: bad integer for '" + key + "': " + s);
    }
    if (used != s.size()) throw InvalidArgument("config: bad integer for '" + key + "': " + s);
    return v;
}

inline bool parse_bool(const std::string &s, const std::string &key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw InvalidArgument("config: bad boolean for '" + key + "': " + s);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string &s, const std::string &key, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(parse(trim(item), key)));
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <typename T>
std::string format_list(const std::vector<T> &v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>) out += format_double(v[i]);
        else out += std::to_string(v[i]);
    }
    return out;
}

struct ConfigField {
    const char *name;
    std::function<std::string(const QuatroConfig &)> get;
    std::function<void(QuatroConfig &, const std::string &)> set;
};

#define QUATRO_DOUBLE_FIELD(path, key)                                                              \
    ConfigField{key, [](const QuatroConfig &c) { return format_double(c.path); },                   \
                [](QuatroConfig &c, const std::string &v) { c.path = parse_double(v, key); }}
#define QUATRO_INT_FIELD(path, key)                                                                 \
    ConfigField{key, [](const QuatroConfig &c) { return std::to_string(c.path); },                  \
                [](QuatroConfig &c, const std::string &v) {                                          \
                    c.path = static_cast<decltype(c.path)>(parse_int(v, key));                        \
                }}

inline const std::vector<ConfigField> &config_fields() {
    static const std::vector<ConfigField> fields{
        QUATRO_DOUBLE_FIELD(noise_bound, "noise_bound"),
        QUATRO_INT_FIELD(max_iters, "max_iters"),
        QUATRO_DOUBLE_FIELD(gnc_factor, "gnc_factor"),
        QUATRO_DOUBLE_FIELD(voxel_size, "voxel_size"),
        QUATRO_DOUBLE_FIELD(normal_radius, "normal_radius"),
        QUATRO_DOUBLE_FIELD(fpfh_radius, "fpfh_radius"),
        QUATRO_DOUBLE_FIELD(sigma_ij, "sigma_ij"),
        QUATRO_DOUBLE_FIELD(clique_time_budget, "clique_time_budget"),
        QUATRO_DOUBLE_FIELD(cost_tolerance, "cost_tolerance"),
        ConfigField{"deterministic",
                    [](const QuatroConfig &c) { return std::string(c.deterministic ? "true" : "false"); },
                    [](QuatroConfig &c, const std::string &v) { c.deterministic = parse_bool(v, "deterministic"); }},
        QUATRO_INT_FIELD(clique_node_budget, "clique_node_budget"),
        QUATRO_INT_FIELD(min_clique_size, "min_clique_size"),
        QUATRO_DOUBLE_FIELD(czm.min_range, "czm_min_range"),
        QUATRO_DOUBLE_FIELD(czm.max_range, "czm_max_range"),
        ConfigField{"czm_zone_min_ranges", [](const QuatroConfig &c) { return format_list(c.czm.zone_min_ranges); },
                    [](QuatroConfig &c, const std::string &v) {
                        c.czm.zone_min_ranges = parse_list<double>(v, "czm_zone_min_ranges", parse_double);
                    }},
        ConfigField{"czm_num_rings", [](const QuatroConfig &c) { return format_list(c.czm.num_rings); },
                    [](QuatroConfig &c, const std::string &v) {
                        c.czm.num_rings = parse_list<int>(v, "czm_num_rings", parse_int);
                    }},
        ConfigField{"czm_num_sectors", [](const QuatroConfig &c) { return format_list(c.czm.num_sectors); },
                    [](QuatroConfig &c, const std::string &v) {
                        c.czm.num_sectors = parse_list<int>(v, "czm_num_sectors", parse_int);
                    }},
        QUATRO_DOUBLE_FIELD(ground.seed_ratio, "ground_seed_ratio"),
        QUATRO_INT_FIELD(ground.num_iters, "ground_num_iters"),
        QUATRO_DOUBLE_FIELD(ground.dist_threshold, "ground_dist_threshold"),
        QUATRO_DOUBLE_FIELD(ground.uprightness_deg, "ground_uprightness_deg"),
        QUATRO_DOUBLE_FIELD(ground.elevation_base, "ground_elevation_base"),
        QUATRO_DOUBLE_FIELD(ground.elevation_step, "ground_elevation_step"),
        QUATRO_DOUBLE_FIELD(ground.elevation_offset, "ground_elevation_offset"),
        QUATRO_DOUBLE_FIELD(ground.flatness_threshold, "ground_flatness_threshold"),
        QUATRO_INT_FIELD(icp_max_iters, "icp_max_iters"),
        QUATRO_DOUBLE_FIELD(icp_max_corr_dist, "icp_max_corr_dist"),
        QUATRO_DOUBLE_FIELD(icp_epsilon, "icp_epsilon"),
    };
    return fields;
}

#undef QUATRO_DOUBLE_FIELD
#undef QUATRO_INT_FIELD

}  // namespace detail

/// Sets one field by its key name. Unknown keys throw.
inline void set_config_value(QuatroConfig &config, const std::string &key, const std::string &value) {
    for (const auto &f : detail::config_fields()) {
        if (key == f.name) {
            f.set(config, value);
            return;
        }
    }
    throw InvalidArgument("config: unknown key '" + key + "'");
}

/// Parses `key = value` lines on top of `base`. Blank lines and `#` comments are skipped.
inline QuatroConfig parse_config(std::istream &in, QuatroConfig base = {}) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string value = detail::trim(t.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        set_config_value(base, detail::trim(t.substr(0, eq)), value);
    }
    return base;
}

inline QuatroConfig parse_config(const std::string &text, QuatroConfig base = {}) {
    std::istringstream is(text);
    return parse_config(is, std::move(base));
}

inline QuatroConfig load_config(const std::string &path, QuatroConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(in, std::move(base));
}

inline std::string serialize_config(const QuatroConfig &config) {
    std::string out;
    for (const auto &f : detail::config_fields()) {
        out += f.name;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

}  // namespace quatro

#endif  // QUATRO_CONFIG_HPP
