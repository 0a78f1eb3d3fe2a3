#include "sweepsgm/confidence.hpp"
#include "sweepsgm/evalkit.hpp"
#include "sweepsgm/io.hpp"
#include "sweepsgm/pipeline.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sweepsgm;

namespace {

struct EstimateArgs {
    std::vector<std::string> images;
    std::string poses;
    std::string config;
    std::string out_dir;
    std::string variant;
    std::string cost;
    std::string p2_mode;
    int levels = -1;
    int delta_d = -1;
    int threads = -1;
};

int env_threads() {
    const char* env = std::getenv("SWEEPSGM_THREADS");
    if (!env) return -1;
    try {
        return std::max(0, std::stoi(env));
    } catch (...) {
        return -1;
    }
}

PipelineConfig assemble_config(const EstimateArgs& args) {
    PipelineConfig cfg;
    if (!args.config.empty()) apply_config_file(cfg, args.config);
    if (!args.variant.empty()) cfg.variant = parse_variant(args.variant);
    if (!args.cost.empty()) cfg.cost = parse_cost_kind(args.cost);
    if (!args.p2_mode.empty()) cfg.p2_mode = parse_p2_mode(args.p2_mode);
    if (args.levels >= 0) cfg.levels = args.levels;
    if (args.delta_d >= 0) cfg.delta_d = args.delta_d;
    if (args.threads >= 0)
        cfg.threads = args.threads;
    else if (env_threads() >= 0)
        cfg.threads = env_threads();
    cfg.validate();
    return cfg;
}

void write_run_log(const std::string& path, const PipelineConfig& cfg,
                   const EstimateArgs& args, const PipelineResult& result,
                   double total_seconds) {
    std::ofstream log(path);
    if (!log) throw std::runtime_error("cannot open " + path + " for writing");
    log << "# sweepsgm estimate run log; feed this file back via --config to\n";
    log << "# reproduce the run bit for bit.\n";
    for (std::size_t i = 0; i < args.images.size(); ++i)
        log << "# image " << i << ": " << args.images[i] << "\n";
    log << "# poses: " << args.poses << "\n";
    log << serialize_config(cfg);
    log << "# census_window = 9x7\n";
    log << "# ncc_window = 5x5\n";
    log << "# median_window = 5x5\n";
    log << "# gestalt_window = " << (2 * cfg.gestalt_radius + 1) << "x"
        << (2 * cfg.gestalt_radius + 1) << "\n";
    for (const auto& warning : result.warnings) log << "# warning: " << warning << "\n";
    log << std::setprecision(4) << std::fixed;
    for (const auto& stats : result.level_stats)
        log << "# level " << stats.level << ": " << stats.width << "x" << stats.height
            << ", " << stats.planes << " planes, " << stats.seconds << " s\n";
    log << "# total: " << total_seconds << " s\n";
}

int run_estimate(const EstimateArgs& args) {
    std::array<GrayImage, kBundleSize> images;
    std::array<CameraView, kBundleSize> views;
    PipelineConfig cfg;
    try {
        if (args.images.size() != kBundleSize) {
            std::cerr << "error: expected 5 images, got " << args.images.size()
                      << "\n";
            return 1;
        }
        cfg = assemble_config(args);
        const std::vector<CameraView> poses = read_pose_file(args.poses);
        if (poses.size() != kBundleSize)
            throw std::runtime_error("pose file must list exactly 5 cameras, has " +
                                     std::to_string(poses.size()));
        for (int i = 0; i < kBundleSize; ++i) {
            images[i] = read_pgm(args.images[i]);
            views[i] = poses[i];
            if (images[i].width() != views[i].width ||
                images[i].height() != views[i].height)
                throw std::runtime_error("image " + std::to_string(i) +
                                         " does not match its pose dimensions");
        }
        fs::create_directories(args.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        const PipelineResult result = run_pipeline(images, views, cfg);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const fs::path out(args.out_dir);
        write_pfm((out / "depth.pfm").string(), result.depth);
        write_pfm((out / "normals.pfm").string(), result.normals);
        write_pfm((out / "confidence.pfm").string(), result.confidence);
        write_pgm((out / "mask.pgm").string(), result.texture_mask);
        write_run_log((out / "run.log").string(), cfg, args, result, seconds);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: pipeline failed: " << e.what() << "\n";
        return 2;
    }
}

int run_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& conf_path, const std::string& csv_path) {
    try {
        const DepthMap pred = read_pfm(pred_path);
        const DepthMap gt = read_pfm(gt_path);
        const MetricReport report = metric_report(pred, gt);
        std::cout << std::setprecision(6);
        std::cout << "mL1-abs = " << report.l1_abs.mean << " +/- "
                  << report.l1_abs.stddev << "\n";
        std::cout << "mL1-rel = " << report.l1_rel.mean << " +/- "
                  << report.l1_rel.stddev << "\n";
        std::cout << "density = " << report.density << "\n";
        std::cout << "pixels  = " << report.pixel_count << "\n";
        if (conf_path.empty()) return 0;
        if (!fs::exists(conf_path)) {
            std::cerr << "warning: confidence file " << conf_path
                      << " not found; skipping the ROC curve\n";
            return 0;
        }
        const ConfidenceMap conf = read_pfm(conf_path);
        const auto curve = roc_curve(pred, conf, gt);
        if (!csv_path.empty()) {
            write_roc_csv(csv_path, curve);
            std::cout << "roc csv = " << csv_path << " (" << curve.size()
                      << " points)\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_synth(const std::string& scene_path, const std::string& out_dir) {
    try {
        const SceneSpec spec = load_scene_spec(scene_path);
        const SyntheticScene scene = render_synthetic(spec);
        fs::create_directories(out_dir);
        const fs::path out(out_dir);
        for (int i = 0; i < kBundleSize; ++i)
            write_pgm((out / ("view_" + std::to_string(i) + ".pgm")).string(),
                      scene.images[i]);
        write_pose_file((out / "poses.txt").string(),
                        {scene.views.begin(), scene.views.end()});
        write_pfm((out / "gt_depth.pfm").string(), scene.gt_depth);
        write_pfm((out / "gt_normals.pfm").string(), scene.gt_normals);
        std::ofstream cfg((out / "scene_config.txt").string());
        cfg << "# depth range of the rendered scene\n";
        cfg << "d_min = " << spec.d_min << "\n";
        cfg << "d_max = " << spec.d_max << "\n";
        std::cout << "wrote bundle to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_bench(int max_threads, const std::string& cost,
              const std::string& variant) {
    try {
        SceneSpec spec;
        spec.width = 640;
        spec.height = 480;
        spec.focal = 500.0;
        spec.baseline = 0.12;
        spec.d_min = 2.0;
        spec.d_max = 8.0;
        spec.noise_sigma = 1.5;
        spec.seed = 42;
        spec.patches.push_back({{-6.0, -4.5, 5.0}, {12.0, 0, 0}, {0, 9.0, 0}, 48.0, 1});
        spec.patches.push_back({{-1.5, -1.2, 3.2}, {3.0, 0, 1.2}, {0, 2.4, 0}, 16.0, 2});
        const SyntheticScene scene = render_synthetic(spec);

        PipelineConfig cfg;
        cfg.cost = cost.empty() ? CostKind::ncc : parse_cost_kind(cost);
        cfg.variant = variant.empty() ? SgmVariant::fp : parse_variant(variant);
        cfg.d_min = spec.d_min;
        cfg.d_max = spec.d_max;

        const int n = effective_threads(max_threads > 0 ? max_threads : 0);
        std::cout << "bench: 640x480 five-image bundle, cost=" << to_string(cfg.cost)
                  << ", variant=" << to_string(cfg.variant) << "\n";
        double t1 = 0.0;
        for (const int threads : {1, n}) {
            cfg.threads = threads;
            const auto t0 = std::chrono::steady_clock::now();
            const PipelineResult result =
                run_pipeline(scene.images, scene.views, cfg);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            if (threads == 1) t1 = secs;
            std::cout << std::setprecision(3) << std::fixed;
            std::cout << "threads=" << threads << ": " << secs << " s/bundle ("
                      << result.level_stats.back().planes << " planes at the finest level)";
            if (threads != 1 && t1 > 0.0)
                std::cout << "  scaling efficiency " << std::setprecision(1)
                          << 100.0 * t1 / (secs * threads) << "%";
            std::cout << "\n";
            if (n == 1) break;
        }
        std::cout << "CPU-only figures; they depend on hardware, thread count and\n"
                     "configuration, and are not comparable across implementations.\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sweepsgm: hierarchical multi-view plane-sweep depth, normal "
                 "and confidence estimation"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* estimate = app.add_subcommand(
        "estimate", "Estimate depth/normal/confidence maps for a 5-image bundle");
    estimate->add_option("images", est.images, "5 input images (PGM), reference is the center")
        ->expected(-1);
    estimate->add_option("--poses", est.poses, "pose file (one camera per line)")
        ->required();
    estimate->add_option("--config", est.config, "key = value configuration file");
    estimate->add_option("--out", est.out_dir, "output directory")->required();
    estimate->add_option("--variant", est.variant, "fp|sn|pg");
    estimate->add_option("--cost", est.cost, "census|ncc");
    estimate->add_option("--p2", est.p2_mode, "gradient|line");
    estimate->add_option("--levels", est.levels, "pyramid levels");
    estimate->add_option("--delta-d", est.delta_d, "plane-index half-range at refined levels");
    estimate->add_option("--threads", est.threads,
                         "worker threads (0 = auto; falls back to SWEEPSGM_THREADS)");

    std::string pred_path, gt_path, conf_path, csv_path;
    auto* eval = app.add_subcommand("eval", "Compare a depth map against ground truth");
    eval->add_option("--pred", pred_path, "predicted depth (PFM)")->required();
    eval->add_option("--gt", gt_path, "ground-truth depth (PFM)")->required();
    eval->add_option("--conf", conf_path, "confidence map (PFM) for the ROC curve");
    eval->add_option("--csv", csv_path, "ROC CSV output path");

    std::string scene_path, synth_out;
    auto* synth = app.add_subcommand("synth", "Render a synthetic bundle with ground truth");
    synth->add_option("scene", scene_path, "scene description file")->required();
    synth->add_option("--out", synth_out, "output directory")->required();

    int bench_threads = 0;
    std::string bench_cost, bench_variant;
    auto* bench = app.add_subcommand("bench", "Report seconds per 640x480 bundle");
    bench->add_option("--threads", bench_threads, "max worker threads (0 = auto)");
    bench->add_option("--cost", bench_cost, "census|ncc");
    bench->add_option("--variant", bench_variant, "fp|sn|pg");

    CLI11_PARSE(app, argc, argv);

    if (estimate->parsed()) return run_estimate(est);
    if (eval->parsed()) return run_eval(pred_path, gt_path, conf_path, csv_path);
    if (synth->parsed()) return run_synth(scene_path, synth_out);
    if (bench->parsed()) return run_bench(bench_threads, bench_cost, bench_variant);
    return 1;
}
