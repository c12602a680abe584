#include "rlms/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "rlms/checkpoint.hpp"
#include "rlms/config.hpp"
#include "rlms/error.hpp"
#include "rlms/gradcheck.hpp"
#include "rlms/image_io.hpp"
#include "rlms/log.hpp"
#include "rlms/metrics.hpp"
#include "rlms/trainer.hpp"

namespace rlms {

namespace fs = std::filesystem;

namespace {

// Thrown for usage problems detected after parsing.
struct UsageError : Error {
    using Error::Error;
};

std::vector<Tensor<float>> load_training_set(const fs::path& dir, std::size_t size) {
    std::vector<Tensor<float>> out;
    for (const auto& path : list_images(dir)) out.push_back(resize_cover(read_image(path), size, size));
    if (out.empty()) throw DataError("no images found in " + dir.string());
    return out;
}

std::ofstream open_out(const fs::path& path, bool append) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    return f;
}

struct TrainArgs {
    std::string config_path, content_dir, style_dir, out_dir, resume;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    // defaults < config file < flags
    TrainConfig config;
    if (!a.config_path.empty()) config = load_config(a.config_path);
    for (const auto& kv : a.overrides) apply_config_line(config, kv, "--set");
    if (!a.content_dir.empty()) config.content_dir = a.content_dir;
    if (!a.style_dir.empty()) config.style_dir = a.style_dir;
    if (a.seed) config.seed = *a.seed;
    if (config.content_dir.empty()) throw UsageError("no content directory (--content-dir or content_dir)");
    if (config.style_dir.empty()) throw UsageError("no style directory (--style-dir or style_dir)");
    config.validate();

    Dataset data{load_training_set(config.content_dir, config.image_size),
                 load_training_set(config.style_dir, config.image_size)};
    FeatureBackbone<float> backbone =
        config.backbone_path.empty() ? load_backbone(config.backbone_seed) : load_backbone(config.backbone_path);

    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    {
        std::ofstream snap = open_out(dir / "config.txt", false);
        snap << render_config(config);
    }

    Trainer trainer(config, std::move(data), std::move(backbone));
    if (!a.resume.empty()) {
        trainer.restore(load_container(a.resume));
        log_info("resumed at env step " + std::to_string(trainer.steps_done()));
    }
    const bool append = !a.resume.empty() && fs::exists(dir / "train_log.csv");
    std::ofstream train_log = open_out(dir / "train_log.csv", append);
    std::ofstream episodes = open_out(dir / "episodes.csv", append);
    if (!append) {
        train_log << train_log_header() << '\n';
        episodes << episode_log_header() << '\n';
    }

    TrainHooks hooks;
    hooks.checkpoint_dir = dir;
    hooks.on_record = [&](const TrainRecord& r) {
        train_log << train_log_row(r) << '\n';
        log_debug(train_log_row(r));
    };
    hooks.on_episode = [&](const EpisodeRecord& e) {
        episodes << episode_log_row(e) << '\n';
        episodes.flush();
        train_log.flush();
        log_info("episode " + std::to_string(e.episode) + " return " + std::to_string(e.total_reward));
    };
    trainer.run(hooks);
    trainer.save_checkpoint(dir / "final.ckpt");
    out << "trained " << trainer.steps_done() << " env steps; wrote " << (dir / "final.ckpt").string() << '\n';
    return kExitOk;
}

std::string sequence_name(std::size_t t, std::size_t steps) {
    const int width = std::max<int>(3, static_cast<int>(std::to_string(steps).size()));
    std::ostringstream os;
    os << "seq_" << std::setw(width) << std::setfill('0') << t << ".png";
    return os.str();
}

struct StylizeArgs {
    std::string ckpt, content, style, out_dir;
    long long steps = 10;
};

int cmd_stylize(const StylizeArgs& a, std::ostream& out) {
    if (a.steps < 1) throw UsageError("steps must be ≥ 1");
    const LoadedModel model = load_model(a.ckpt);
    const Tensor<float> content = crop_to_multiple_of_4(read_image(a.content), a.content);
    const Tensor<float> style = resize_cover(read_image(a.style), content.size(2), content.size(3));
    const auto steps = static_cast<std::size_t>(a.steps);
    const std::vector<Tensor<float>> seq = generate_sequence(model.agent, content, style, steps);
    fs::create_directories(a.out_dir);
    for (std::size_t t = 0; t < seq.size(); ++t) write_png(fs::path(a.out_dir) / sequence_name(t + 1, steps), seq[t]);
    out << "wrote " << seq.size() << " images to " << a.out_dir << '\n';
    return kExitOk;
}

std::vector<NamedImage> load_eval_set(const fs::path& dir, std::size_t size) {
    const auto paths = list_images(dir);
    if (paths.empty()) throw DataError("no images found in " + dir.string());
    std::vector<NamedImage> out;
    for (const auto& path : paths) {
        try {
            out.push_back({path.filename().string(), resize_cover(read_image(path), size, size)});
        } catch (const DataError& e) {
            log_warn(std::string("skipping ") + e.what());
        }
    }
    if (out.empty()) throw DataError("no readable images in " + dir.string());
    return out;
}

struct EvalArgs {
    std::string ckpt, content_dir, style_dir, report;
    long long steps = 10;
    std::size_t size = 64;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.steps < 1) throw UsageError("steps must be ≥ 1");
    if (a.size < 8 || a.size % 4 != 0) throw UsageError("--size must be a multiple of 4 and >= 8");
    const LoadedModel model = load_model(a.ckpt);
    const auto content = load_eval_set(a.content_dir, a.size);
    const auto style = load_eval_set(a.style_dir, a.size);
    const auto steps = static_cast<std::size_t>(a.steps);
    const auto start = std::chrono::steady_clock::now();
    const auto clock = [start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    const EvalReport report = evaluate(model.agent, model.backbone, content, style, steps, default_indices(steps), clock);
    if (a.report.empty()) {
        write_report(out, report);
    } else {
        std::ofstream f = open_out(a.report, false);
        write_report(f, report);
        out << "wrote " << report.rows.size() << " rows to " << a.report << '\n';
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t seeds, std::ostream& out, std::ostream& err) {
    const auto rows = run_gradcheck_suite(seed, seeds);
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %12s %9s %6s %8s %8s  %s\n", "op", "rel_error", "tol", "seeds", "coords",
                  "skipped", "status");
    out << line;
    std::vector<std::string> failed;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-20s %12.3e %9.0e %6zu %8zu %8zu  %s\n", r.op.c_str(),
                      r.worst_relative_error, r.tolerance, r.seeds, r.coords, r.skipped, r.passed ? "ok" : "FAIL");
        out << line;
        if (!r.passed) failed.push_back(r.op);
    }
    if (failed.empty()) return kExitOk;
    err << "error: gradient check failed for";
    for (const auto& op : failed) err << ' ' << op;
    err << '\n';
    return kExitGradient;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sequential arbitrary style transfer trained by reinforcement learning", "rlms"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train an agent on a content and a style directory");
    train->add_option("--config", ta.config_path, "key=value run configuration");
    train->add_option("--content-dir", ta.content_dir, "content images (overrides content_dir)");
    train->add_option("--style-dir", ta.style_dir, "style images (overrides style_dir)");
    train->add_option("--out", ta.out_dir, "output directory")->required();
    train->add_option("--seed", ta.seed, "run seed (overrides seed)");
    train->add_option("--set", ta.overrides, "extra key=value override, repeatable");
    train->add_option("--resume", ta.resume, "continue from a checkpoint.ckpt written by an earlier run");

    StylizeArgs sa;
    auto* stylize = app.add_subcommand("stylize", "write the stylization sequence for one pair");
    stylize->add_option("--ckpt", sa.ckpt, "checkpoint")->required();
    stylize->add_option("--content", sa.content, "content image")->required();
    stylize->add_option("--style", sa.style, "style image")->required();
    stylize->add_option("--steps", sa.steps, "sequence length")->capture_default_str();
    stylize->add_option("--out", sa.out_dir, "output directory")->required();

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "metrics over every content x style pair");
    eval->add_option("--ckpt", ea.ckpt, "checkpoint")->required();
    eval->add_option("--content-dir", ea.content_dir, "content images")->required();
    eval->add_option("--style-dir", ea.style_dir, "style images")->required();
    eval->add_option("--steps", ea.steps, "sequence length")->capture_default_str();
    eval->add_option("--size", ea.size, "images are resized and cropped to size x size")->capture_default_str();
    eval->add_option("--report", ea.report, "report path (stdout when omitted)");

    std::uint64_t gc_seed = 0;
    std::size_t gc_seeds = 20;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
    gradcheck->add_option("--seed", gc_seed, "base seed")->capture_default_str();
    gradcheck->add_option("--seeds", gc_seeds, "random seeds per op")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train) return cmd_train(ta, out);
        if (*stylize) return cmd_stylize(sa, out);
        if (*eval) return cmd_eval(ea, out);
        if (*gradcheck) return cmd_gradcheck(gc_seed, gc_seeds, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        err << "error: checkpoint: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace rlms
