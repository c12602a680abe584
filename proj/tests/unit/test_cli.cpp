#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "rlms/cli.hpp"
#include "rlms/fault_injection.hpp"
#include "rlms/image_io.hpp"
#include "support/fixtures.hpp"

using namespace rlms;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
    return n;
}

// Fixture corpus on disk, plus one tiny trained checkpoint shared by the tests.
struct Workspace {
    fs::path root = fs::temp_directory_path() / "rlms_cli";
    fs::path content = root / "content";
    fs::path style = root / "style";
    fs::path held = root / "held";
    fs::path run = root / "run";

    Workspace() {
        fs::remove_all(root);
        for (const auto& d : {content, style, held}) fs::create_directories(d);
        const auto corpus = fixtures::make_corpus(16);
        for (std::size_t i = 0; i < 3; ++i) write_png(content / ("c" + std::to_string(i) + ".png"), corpus.train.content[i]);
        for (std::size_t i = 0; i < 2; ++i) write_png(style / ("s" + std::to_string(i) + ".png"), corpus.train.style[i]);
        write_png(held / "h0.png", corpus.held_content[0]);
        const Run r = cli({"train", "--content-dir", content.string(), "--style-dir", style.string(), "--out",
                           run.string(), "--seed", "3", "--set", "image_size=16", "--set", "total_env_steps=8",
                           "--set", "warmup=4", "--set", "replay_batch=2", "--set", "horizon=4", "--set",
                           "checkpoint_interval=0"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    ~Workspace() { fs::remove_all(root); }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("train writes the run directory") {
    const Workspace& w = ws();
    CHECK(fs::exists(w.run / "final.ckpt"));
    CHECK(fs::exists(w.run / "config.txt"));
    CHECK(slurp(w.run / "config.txt").find("seed = 3\n") != std::string::npos);
    // header plus one row per warm env step (steps 4..8)
    CHECK(count_lines(w.run / "train_log.csv") == 1 + 5);
    CHECK(count_lines(w.run / "episodes.csv") == 1 + 2);
}

TEST_CASE("train argument and data errors") {
    const Workspace& w = ws();
    const fs::path out = w.root / "bad";
    SUBCASE("missing style directory is a data error naming the path") {
        const Run r = cli({"train", "--content-dir", w.content.string(), "--style-dir", (w.root / "nostyle").string(),
                           "--out", out.string(), "--set", "image_size=16"});
        CHECK(r.code == kExitData);
        CHECK(r.err.find("nostyle") != std::string::npos);
    }
    SUBCASE("unknown config key") {
        const Run r = cli({"train", "--content-dir", w.content.string(), "--style-dir", w.style.string(), "--out",
                           out.string(), "--set", "colour=blue"});
        CHECK(r.code == kExitConfig);
        CHECK(r.err.find("colour") != std::string::npos);
    }
    SUBCASE("one style image cannot supply contrastive negatives") {
        const Run r = cli({"train", "--content-dir", w.content.string(), "--style-dir", w.held.string(), "--out",
                           out.string(), "--set", "image_size=16"});
        CHECK(r.code == kExitData);
    }
    SUBCASE("invalid value") {
        const Run r = cli({"train", "--content-dir", w.content.string(), "--style-dir", w.style.string(), "--out",
                           out.string(), "--set", "replay_batch=1"});
        CHECK(r.code == kExitConfig);
    }
    SUBCASE("no subcommand") { CHECK(cli({}).code == kExitConfig); }
    SUBCASE("help") { CHECK(cli({"--help"}).code == kExitOk); }
}

TEST_CASE("stylize") {
    const Workspace& w = ws();
    const fs::path a = w.root / "sty_a", b = w.root / "sty_b";
    const std::vector<std::string> base{"stylize", "--ckpt", (w.run / "final.ckpt").string(), "--content",
                                        (w.held / "h0.png").string(), "--style", (w.style / "s1.png").string()};
    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    REQUIRE(with({"--steps", "10", "--out", a.string()}).code == kExitOk);
    REQUIRE(with({"--steps", "10", "--out", b.string()}).code == kExitOk);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    REQUIRE(names.size() == 10);
    CHECK(names.front() == "seq_001.png");
    CHECK(names.back() == "seq_010.png");
    for (const auto& n : names) CHECK(slurp(a / n) == slurp(b / n));

    CHECK(with({"--steps", "0", "--out", a.string()}).code == kExitConfig);

    // A checkpoint whose arrays do not fit the architecture.
    const fs::path bad = w.root / "bad.ckpt";
    std::ofstream(bad, std::ios::binary) << "RLMS junk";
    std::vector<std::string> args = base;
    args[2] = bad.string();
    args.insert(args.end(), {"--out", a.string()});
    const Run r = cli(args);
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("checkpoint") != std::string::npos);

    args[2] = (w.root / "absent.ckpt").string();
    CHECK(cli(args).code == kExitData);
}

TEST_CASE("eval") {
    const Workspace& w = ws();
    const fs::path report = w.root / "report.csv";
    const Run r = cli({"eval", "--ckpt", (w.run / "final.ckpt").string(), "--content-dir", w.content.string(),
                       "--style-dir", w.style.string(), "--steps", "5", "--size", "16", "--report", report.string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const std::string text = slurp(report);
    CHECK(text.find("not comparable to published tables") != std::string::npos);
    std::istringstream in(text);
    std::size_t rows = 0;
    bool header = false;
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("content,style,index", 0) == 0) header = true;
        else if (header && !line.empty() && line[0] != '#') ++rows;
    }
    // 3 content x 2 style x indices {1, 5}
    CHECK(rows == 12);

    const fs::path empty = w.root / "empty";
    fs::create_directories(empty);
    const Run e = cli({"eval", "--ckpt", (w.run / "final.ckpt").string(), "--content-dir", empty.string(),
                       "--style-dir", w.style.string()});
    CHECK(e.code == kExitData);
}

TEST_CASE("gradcheck exit codes") {
    const Run a = cli({"gradcheck", "--seed", "2", "--seeds", "1"});
    const Run b = cli({"gradcheck", "--seed", "2", "--seeds", "1"});
    CHECK(a.code == kExitOk);
    CHECK(a.out == b.out);
    CHECK(a.out.find("conv2d") != std::string::npos);

    fault_injection::corrupt_conv2d_backward(true);
    const Run bad = cli({"gradcheck", "--seed", "2", "--seeds", "1"});
    fault_injection::corrupt_conv2d_backward(false);
    CHECK(bad.code == kExitGradient);
    CHECK(bad.err.find("conv2d") != std::string::npos);
}
