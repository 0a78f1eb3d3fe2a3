#pragma once

#include "sweepsgm/evalkit.hpp"
#include "sweepsgm/geometry.hpp"
#include "sweepsgm/image.hpp"
#include "sweepsgm/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweepsgm {

// ---------------------------------------------------------------------------
// PFM float maps. Header: magic ("Pf" one channel, "PF" three), dimensions,
// scale whose sign encodes endianness (-1.0 written, little-endian), rows
// stored bottom-to-top as 32-bit floats. Invalid pixels are -inf.
// ---------------------------------------------------------------------------

namespace detail {

inline float swap_float(float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) |
           ((bits & 0x00ff0000u) >> 8) | ((bits & 0xff000000u) >> 24);
    return std::bit_cast<float>(bits);
}

inline std::string next_pfm_token(std::istream& in) {
    std::string token;
    if (!(in >> token)) throw std::runtime_error("pfm: malformed header");
    return token;
}

inline std::vector<float> read_pfm_payload(std::istream& in, const std::string& path,
                                           int width, int height, int channels) {
    in.get();  // single whitespace byte after the scale line
    const std::size_t count =
        static_cast<std::size_t>(width) * height * channels;
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got != count * sizeof(float))
        throw std::runtime_error("pfm: truncated payload in " + path + ": expected " +
                                 std::to_string(count * sizeof(float)) +
                                 " bytes, got " + std::to_string(got));
    return data;
}

struct PfmHeader {
    int width = 0;
    int height = 0;
    int channels = 1;
    bool byteswap = false;
};

inline PfmHeader read_pfm_header(std::istream& in, const std::string& path) {
    PfmHeader h;
    const std::string magic = next_pfm_token(in);
    if (magic == "Pf")
        h.channels = 1;
    else if (magic == "PF")
        h.channels = 3;
    else
        throw std::runtime_error("pfm: bad magic '" + magic + "' in " + path);
    h.width = std::stoi(next_pfm_token(in));
    h.height = std::stoi(next_pfm_token(in));
    if (h.width < 1 || h.height < 1)
        throw std::runtime_error("pfm: bad dimensions in " + path);
    const double scale = std::stod(next_pfm_token(in));
    if (scale == 0.0) throw std::runtime_error("pfm: zero scale in " + path);
    const bool file_little = scale < 0.0;
    const bool host_little = std::endian::native == std::endian::little;
    h.byteswap = file_little != host_little;
    return h;
}

}  // namespace detail

inline void write_pfm(const std::string& path, const Image<float>& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pfm: cannot open " + path + " for writing");
    out << "Pf\n" << map.width() << " " << map.height() << "\n-1.0\n";
    for (int y = map.height() - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(map.row(y)),
                  static_cast<std::streamsize>(map.width() * sizeof(float)));
    if (!out) throw std::runtime_error("pfm: write failed for " + path);
}

inline Image<float> read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pfm: cannot open " + path);
    const auto header = detail::read_pfm_header(in, path);
    if (header.channels != 1)
        throw std::runtime_error("pfm: expected one channel in " + path);
    auto data = detail::read_pfm_payload(in, path, header.width, header.height, 1);
    Image<float> map(header.width, header.height);
    for (int y = 0; y < header.height; ++y)
        for (int x = 0; x < header.width; ++x) {
            float v = data[static_cast<std::size_t>(header.height - 1 - y) *
                               header.width +
                           x];
            if (header.byteswap) v = detail::swap_float(v);
            map.at(x, y) = v;
        }
    return map;
}

inline void write_pfm(const std::string& path, const NormalMap& normals) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pfm: cannot open " + path + " for writing");
    out << "PF\n" << normals.width() << " " << normals.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(normals.width()) * 3);
    for (int y = normals.height() - 1; y >= 0; --y) {
        for (int x = 0; x < normals.width(); ++x) {
            const Eigen::Vector3f& n = normals.at(x, y);
            if (is_valid(n)) {
                row[3 * x] = n.x();
                row[3 * x + 1] = n.y();
                row[3 * x + 2] = n.z();
            } else {
                row[3 * x] = row[3 * x + 1] = row[3 * x + 2] = kInvalidValue;
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("pfm: write failed for " + path);
}

inline NormalMap read_pfm_normals(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pfm: cannot open " + path);
    const auto header = detail::read_pfm_header(in, path);
    if (header.channels != 3)
        throw std::runtime_error("pfm: expected three channels in " + path);
    auto data = detail::read_pfm_payload(in, path, header.width, header.height, 3);
    NormalMap map(header.width, header.height, Eigen::Vector3f::Zero());
    for (int y = 0; y < header.height; ++y)
        for (int x = 0; x < header.width; ++x) {
            const std::size_t base =
                (static_cast<std::size_t>(header.height - 1 - y) * header.width + x) * 3;
            float c[3];
            for (int i = 0; i < 3; ++i) {
                c[i] = data[base + i];
                if (header.byteswap) c[i] = detail::swap_float(c[i]);
            }
            if (is_valid(c[0]) && is_valid(c[1]) && is_valid(c[2]))
                map.at(x, y) = Eigen::Vector3f(c[0], c[1], c[2]);
        }
    return map;
}

// ---------------------------------------------------------------------------
// Binary 8-bit PGM (P5).
// ---------------------------------------------------------------------------

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot open " + path + " for writing");
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<std::uint8_t> row(img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            row[x] = static_cast<std::uint8_t>(
                std::clamp(std::lround(img.at(x, y)), 0l, 255l));
        out.write(reinterpret_cast<const char*>(row.data()), img.width());
    }
    if (!out) throw std::runtime_error("pgm: write failed for " + path);
}

inline void write_pgm(const std::string& path, const MaskImage& mask) {
    GrayImage img(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            img.at(x, y) = mask.at(x, y) ? 255.0f : 0.0f;
    write_pgm(path, img);
}

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("pgm: unsupported header in " + path);
    in.get();
    GrayImage img(w, h);
    std::vector<std::uint8_t> row(w);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), w);
        if (in.gcount() != w)
            throw std::runtime_error("pgm: truncated payload in " + path);
        for (int x = 0; x < w; ++x) img.at(x, y) = row[x];
    }
    return img;
}

// ---------------------------------------------------------------------------
// Pose file: one camera per line,
// id fx fy cx cy skew r11..r33(row-major) cx cy cz width height
// ---------------------------------------------------------------------------

inline void write_pose_file(const std::string& path,
                            const std::vector<CameraView>& views) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("poses: cannot open " + path + " for writing");
    out << std::setprecision(17);
    for (std::size_t i = 0; i < views.size(); ++i) {
        const CameraView& v = views[i];
        out << i << " " << v.K(0, 0) << " " << v.K(1, 1) << " " << v.K(0, 2) << " "
            << v.K(1, 2) << " " << v.K(0, 1);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out << " " << v.R(r, c);
        out << " " << v.C.x() << " " << v.C.y() << " " << v.C.z() << " " << v.width
            << " " << v.height << "\n";
    }
}

inline std::vector<CameraView> read_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("poses: cannot open " + path);
    std::vector<CameraView> views;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        long id;
        double fx, fy, cx, cy, skew;
        Eigen::Matrix3d R;
        Eigen::Vector3d C;
        int w, h;
        ss >> id >> fx >> fy >> cx >> cy >> skew;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) ss >> R(r, c);
        ss >> C.x() >> C.y() >> C.z() >> w >> h;
        if (!ss)
            throw std::runtime_error("poses: malformed line " +
                                     std::to_string(line_no) + " in " + path);
        Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
        K(0, 0) = fx;
        K(1, 1) = fy;
        K(0, 2) = cx;
        K(1, 2) = cy;
        K(0, 1) = skew;
        views.emplace_back(K, R, C, w, h);
    }
    return views;
}

// ---------------------------------------------------------------------------
// key = value configuration files ('#' starts a comment).
// ---------------------------------------------------------------------------

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace detail

inline std::vector<KeyValue> parse_key_values(std::istream& in) {
    std::vector<KeyValue> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' on line " +
                                     std::to_string(line_no));
        KeyValue kv;
        kv.key = detail::trim(line.substr(0, eq));
        kv.value = detail::trim(line.substr(eq + 1));
        kv.line = line_no;
        if (kv.key.empty())
            throw std::runtime_error("config: empty key on line " +
                                     std::to_string(line_no));
        entries.push_back(std::move(kv));
    }
    return entries;
}

inline std::vector<KeyValue> parse_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse_key_values(in);
}

namespace detail {

inline double parse_double(const KeyValue& kv) {
    std::size_t used = 0;
    const double v = std::stod(kv.value, &used);
    if (used != kv.value.size())
        throw std::runtime_error("config: bad number for key '" + kv.key + "'");
    return v;
}

inline int parse_int(const KeyValue& kv) {
    const double v = parse_double(kv);
    const int i = static_cast<int>(v);
    if (i != v)
        throw std::runtime_error("config: expected integer for key '" + kv.key + "'");
    return i;
}

}  // namespace detail

inline CostKind parse_cost_kind(const std::string& s) {
    if (s == "census") return CostKind::census;
    if (s == "ncc") return CostKind::ncc;
    throw std::runtime_error("config: unknown cost '" + s + "' (census|ncc)");
}

inline SgmVariant parse_variant(const std::string& s) {
    if (s == "fp") return SgmVariant::fp;
    if (s == "sn") return SgmVariant::sn;
    if (s == "pg") return SgmVariant::pg;
    throw std::runtime_error("config: unknown variant '" + s + "' (fp|sn|pg)");
}

inline P2Mode parse_p2_mode(const std::string& s) {
    if (s == "gradient") return P2Mode::gradient;
    if (s == "line") return P2Mode::line;
    throw std::runtime_error("config: unknown p2_mode '" + s + "' (gradient|line)");
}

inline const char* to_string(CostKind k) {
    return k == CostKind::census ? "census" : "ncc";
}
inline const char* to_string(SgmVariant v) {
    switch (v) {
        case SgmVariant::fp: return "fp";
        case SgmVariant::sn: return "sn";
        default: return "pg";
    }
}
inline const char* to_string(P2Mode m) {
    return m == P2Mode::gradient ? "gradient" : "line";
}

inline void apply_config_entry(PipelineConfig& cfg, const KeyValue& kv) {
    if (kv.key == "levels")
        cfg.levels = detail::parse_int(kv);
    else if (kv.key == "delta_d")
        cfg.delta_d = detail::parse_int(kv);
    else if (kv.key == "cost")
        cfg.cost = parse_cost_kind(kv.value);
    else if (kv.key == "variant")
        cfg.variant = parse_variant(kv.value);
    else if (kv.key == "p2_mode")
        cfg.p2_mode = parse_p2_mode(kv.value);
    else if (kv.key == "p1")
        cfg.p1 = detail::parse_double(kv);
    else if (kv.key == "p2")
        cfg.p2 = detail::parse_double(kv);
    else if (kv.key == "alpha")
        cfg.alpha = detail::parse_double(kv);
    else if (kv.key == "beta")
        cfg.beta = detail::parse_double(kv);
    else if (kv.key == "phi")
        cfg.phi = detail::parse_double(kv);
    else if (kv.key == "tau")
        cfg.tau = detail::parse_double(kv);
    else if (kv.key == "d_min")
        cfg.d_min = detail::parse_double(kv);
    else if (kv.key == "d_max")
        cfg.d_max = detail::parse_double(kv);
    else if (kv.key == "dog_sigma1")
        cfg.dog_sigma1 = detail::parse_double(kv);
    else if (kv.key == "dog_sigma2")
        cfg.dog_sigma2 = detail::parse_double(kv);
    else if (kv.key == "dog_threshold")
        cfg.dog_threshold = detail::parse_double(kv);
    else if (kv.key == "gestalt_radius")
        cfg.gestalt_radius = detail::parse_int(kv);
    else if (kv.key == "threads")
        cfg.threads = detail::parse_int(kv);
    else
        throw std::runtime_error("config: unknown key '" + kv.key + "'");
}

inline void apply_config_file(PipelineConfig& cfg, const std::string& path) {
    for (const auto& kv : parse_key_value_file(path)) apply_config_entry(cfg, kv);
}

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream ss;
    ss << std::setprecision(15) << v;
    return ss.str();
}

}  // namespace detail

/// Effective configuration as config-file text; feeding it back through
/// apply_config_file reproduces the run.
inline std::string serialize_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "levels = " << cfg.levels << "\n";
    out << "delta_d = " << cfg.delta_d << "\n";
    out << "cost = " << to_string(cfg.cost) << "\n";
    out << "variant = " << to_string(cfg.variant) << "\n";
    out << "p2_mode = " << to_string(cfg.p2_mode) << "\n";
    out << "p1 = " << detail::format_number(cfg.resolved_p1()) << "\n";
    out << "p2 = " << detail::format_number(cfg.resolved_p2()) << "\n";
    out << "alpha = " << detail::format_number(cfg.alpha) << "\n";
    out << "beta = " << detail::format_number(cfg.beta) << "\n";
    out << "phi = " << detail::format_number(cfg.resolved_phi()) << "\n";
    out << "tau = " << detail::format_number(cfg.resolved_tau()) << "\n";
    out << "d_min = " << detail::format_number(cfg.d_min) << "\n";
    out << "d_max = " << detail::format_number(cfg.d_max) << "\n";
    out << "dog_sigma1 = " << detail::format_number(cfg.dog_sigma1) << "\n";
    out << "dog_sigma2 = " << detail::format_number(cfg.dog_sigma2) << "\n";
    out << "dog_threshold = " << detail::format_number(cfg.dog_threshold) << "\n";
    out << "gestalt_radius = " << cfg.gestalt_radius << "\n";
    out << "threads = " << cfg.threads << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Scene description files (same key = value format).
// ---------------------------------------------------------------------------

inline SceneSpec load_scene_spec(const std::string& path) {
    SceneSpec spec;
    std::map<int, PatchSpec> patches;
    for (const auto& kv : parse_key_value_file(path)) {
        if (kv.key == "width")
            spec.width = detail::parse_int(kv);
        else if (kv.key == "height")
            spec.height = detail::parse_int(kv);
        else if (kv.key == "focal")
            spec.focal = detail::parse_double(kv);
        else if (kv.key == "baseline")
            spec.baseline = detail::parse_double(kv);
        else if (kv.key == "d_min")
            spec.d_min = detail::parse_double(kv);
        else if (kv.key == "d_max")
            spec.d_max = detail::parse_double(kv);
        else if (kv.key == "noise_sigma")
            spec.noise_sigma = detail::parse_double(kv);
        else if (kv.key == "seed")
            spec.seed = static_cast<std::uint64_t>(detail::parse_double(kv));
        else if (kv.key.rfind("patch.", 0) == 0) {
            const int index = std::stoi(kv.key.substr(6));
            std::istringstream ss(kv.value);
            PatchSpec patch;
            double seed = 0.0;
            ss >> patch.origin.x() >> patch.origin.y() >> patch.origin.z() >>
                patch.e1.x() >> patch.e1.y() >> patch.e1.z() >> patch.e2.x() >>
                patch.e2.y() >> patch.e2.z() >> patch.texture_scale >> seed;
            if (!ss)
                throw std::runtime_error(
                    "scene: patch value needs 11 numbers (origin, e1, e2, "
                    "texture_scale, texture_seed) for key '" +
                    kv.key + "'");
            patch.texture_seed = static_cast<std::uint64_t>(seed);
            if (!patches.emplace(index, patch).second)
                throw std::runtime_error("scene: duplicate key '" + kv.key + "'");
        } else {
            throw std::runtime_error("scene: unknown key '" + kv.key + "'");
        }
    }
    for (auto& [index, patch] : patches) spec.patches.push_back(patch);
    if (spec.patches.empty())
        throw std::runtime_error("scene: no patches defined");
    return spec;
}

// ---------------------------------------------------------------------------
// ROC CSV.
// ---------------------------------------------------------------------------

inline void write_roc_csv(const std::string& path,
                          const std::vector<RocPoint>& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot open " + path + " for writing");
    out << "threshold,density,mL1_abs,mL1_rel,mL1_rel_normalized\n";
    out << std::setprecision(10);
    for (const auto& p : curve)
        out << p.threshold << "," << p.density << "," << p.ml1_abs << ","
            << p.ml1_rel << "," << p.ml1_rel_normalized << "\n";
}

}  // namespace sweepsgm
