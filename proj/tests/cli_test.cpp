#include <gtest/gtest.h>

#include <filesystem>
#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "o2sr/cli.hpp"
#include "o2sr/image.hpp"

namespace fs = std::filesystem;
using namespace o2sr;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("o2sr_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Four 48x48 phantoms degraded with the mini preset at x4.
fs::path tiny_dataset(const fs::path& root)
{
    EXPECT_EQ(cli({"synth", "--out", (root / "src").string(), "--count", "4", "--height", "48", "--width", "48"}).code,
              0);
    EXPECT_EQ(cli({"make-dataset", "--hr", (root / "src").string(), "--out", (root / "data").string(), "--preset",
                   "mini", "--scale", "4"})
                  .code,
              0);
    return root / "data";
}

} // namespace

TEST(Cli, HelpAndParseErrors)
{
    const CliResult help = cli({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("make-dataset"), std::string::npos);
    EXPECT_EQ(cli({}).code, kExitConfig);
    EXPECT_EQ(cli({"eval", "--bogus"}).code, kExitConfig);
    EXPECT_EQ(cli({"train", "--data", "x", "--out", "y", "--scale", "3"}).code, kExitConfig);
}

TEST(Cli, UnknownSetKeyIsConfigError)
{
    const fs::path dir = fresh_dir("badkey");
    const CliResult r = cli({"train", "--data", dir.string(), "--out", (dir / "run").string(), "--set", "model.chnnels=8"});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("model.chnnels"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "run"));
}

TEST(MakeDataset, IdentityDegradationCopiesPixels)
{
    const fs::path dir = fresh_dir("identity");
    ASSERT_EQ(cli({"synth", "--out", (dir / "src").string(), "--count", "2", "--height", "20", "--width", "24"}).code,
              0);
    const CliResult r = cli({"make-dataset", "--hr", (dir / "src").string(), "--out", (dir / "data").string(), "--set",
                       "degrade.scale=1", "degrade.noise_sigma=0", "degrade.gaussian_sigma=0",
                       "degrade.motion_length=0"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* id : {"phantom_000", "phantom_001"}) {
        const std::string name = std::string(id) + ".png";
        EXPECT_EQ(bytes(dir / "data" / "hr" / name), bytes(dir / "data" / "lr_x1" / name));
        const Image a = load_image(dir / "src" / name), b = load_image(dir / "data" / "lr_x1" / name);
        EXPECT_TRUE(std::ranges::equal(a.data(), b.data()));
    }
}

TEST(MakeDataset, IndivisibleImageIsListedAndRunFails)
{
    const fs::path dir = fresh_dir("indivisible");
    fs::create_directories(dir / "src");
    save_image(synthesize_radiograph(24, 24, 1), dir / "src" / "ok.png");
    save_image(synthesize_radiograph(25, 25, 2), dir / "src" / "odd.png");
    const CliResult r = cli({"make-dataset", "--hr", (dir / "src").string(), "--out", (dir / "data").string(), "--preset",
                       "mini", "--scale", "4"});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("odd.png"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "data" / "lr_x4" / "ok.png"));
    EXPECT_FALSE(fs::exists(dir / "data" / "lr_x4" / "odd.png"));
    EXPECT_NE(bytes(dir / "data" / "manifest.txt").find("failure = odd.png"), std::string::npos);
}

TEST(MakeDataset, RerunIsByteIdentical)
{
    const fs::path dir = fresh_dir("rerun");
    ASSERT_EQ(cli({"synth", "--out", (dir / "src").string(), "--count", "3", "--height", "32", "--width", "32"}).code,
              0);
    for (const char* out : {"a", "b"})
        ASSERT_EQ(cli({"make-dataset", "--hr", (dir / "src").string(), "--out", (dir / out).string(), "--preset",
                       "plus", "--scale", "2", "--seed", "13"})
                      .code,
                  0);
    for (const auto& e : fs::directory_iterator(dir / "a" / "lr_x2"))
        EXPECT_EQ(bytes(e.path()), bytes(dir / "b" / "lr_x2" / e.path().filename()));
    EXPECT_EQ(bytes(dir / "a" / "manifest.txt").substr(0, 200), bytes(dir / "b" / "manifest.txt").substr(0, 200));
}

TEST(TrainInferEval, EndToEnd)
{
    const fs::path dir = fresh_dir("e2e");
    const fs::path data = tiny_dataset(dir);
    const fs::path run = dir / "run";

    const CliResult t = cli({"train", "--data", data.string(), "--out", run.string(), "--preset", "tiny", "--max-steps",
                       "0"});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_TRUE(fs::exists(run / "checkpoint.o2ck"));
    EXPECT_EQ(bytes(run / "loss.log"), "");

    fs::create_directories(dir / "lr");
    save_image(synthesize_radiograph(24, 24, 3), dir / "lr" / "single.png");
    const CliResult one = cli({"infer", "--checkpoint", (run / "checkpoint.o2ck").string(), "--input",
                         (dir / "lr" / "single.png").string(), "--out", (dir / "sr1").string()});
    ASSERT_EQ(one.code, 0) << one.err;
    const Image sr = load_image(dir / "sr1" / "single.png");
    EXPECT_EQ(sr.height(), 96);
    EXPECT_EQ(sr.width(), 96);

    const CliResult many = cli({"infer", "--checkpoint", (run / "checkpoint.o2ck").string(), "--input",
                          (data / "lr_x4").string(), "--out", (dir / "sr").string()});
    ASSERT_EQ(many.code, 0) << many.err;
    EXPECT_EQ(std::distance(fs::directory_iterator(dir / "sr"), fs::directory_iterator{}), 4);

    const CliResult ev = cli({"eval", "--sr", (dir / "sr").string(), "--hr", (data / "hr").string(), "--out",
                        (dir / "metrics.csv").string(), "--scale", "4"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("images=4"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
}

TEST(Infer, RgbInputIsNamedAndOthersStillRun)
{
    const fs::path dir = fresh_dir("rgb");
    const fs::path data = tiny_dataset(dir);
    ASSERT_EQ(cli({"train", "--data", data.string(), "--out", (dir / "run").string(), "--preset", "tiny",
                   "--max-steps", "0"})
                  .code,
              0);
    fs::create_directories(dir / "lr");
    save_image(synthesize_radiograph(12, 12, 1), dir / "lr" / "gray.png");
    Image rgb(12, 12, 3, 0.5);
    save_image(rgb, dir / "lr" / "color.png");
    const CliResult r = cli({"infer", "--checkpoint", (dir / "run" / "checkpoint.o2ck").string(), "--input",
                       (dir / "lr").string(), "--out", (dir / "sr").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("color.png"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "sr" / "gray.png"));
    EXPECT_FALSE(fs::exists(dir / "sr" / "color.png"));
}

TEST(Infer, MissingAndMismatchedCheckpoint)
{
    const fs::path dir = fresh_dir("ckpt");
    EXPECT_EQ(cli({"infer", "--checkpoint", (dir / "none.o2ck").string(), "--input", dir.string(), "--out",
                   (dir / "sr").string()})
                  .code,
              kExitIo);
    const fs::path data = tiny_dataset(dir);
    ASSERT_EQ(cli({"train", "--data", data.string(), "--out", (dir / "run").string(), "--preset", "tiny",
                   "--max-steps", "0"})
                  .code,
              0);
    const CliResult r = cli({"infer", "--checkpoint", (dir / "run" / "checkpoint.o2ck").string(), "--input",
                       (data / "lr_x4").string(), "--out", (dir / "sr").string(), "--scale", "2"});
    EXPECT_EQ(r.code, kExitIncompatible);
    EXPECT_NE(r.err.find("model.scale"), std::string::npos);
}

TEST(Eval, IdenticalDirectoriesAndEmptyInput)
{
    const fs::path dir = fresh_dir("eval");
    ASSERT_EQ(cli({"synth", "--out", (dir / "hr").string(), "--count", "2", "--height", "32", "--width", "32"}).code,
              0);
    const CliResult r = cli({"eval", "--sr", (dir / "hr").string(), "--hr", (dir / "hr").string(), "--out",
                       (dir / "m.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("psnr_db=inf"), std::string::npos);
    EXPECT_NE(r.out.find("ssim=1.000000"), std::string::npos);

    fs::create_directories(dir / "empty_sr");
    fs::create_directories(dir / "empty_hr");
    EXPECT_EQ(cli({"eval", "--sr", (dir / "empty_sr").string(), "--hr", (dir / "empty_hr").string(), "--out",
                   (dir / "e.csv").string()})
                  .code,
              kExitIo);
}

TEST(VizGrad, OneHeatmapAndOrientationMapPerInput)
{
    const fs::path dir = fresh_dir("viz");
    ASSERT_EQ(cli({"synth", "--out", (dir / "in").string(), "--count", "2", "--height", "40", "--width", "36"}).code,
              0);
    const CliResult r = cli({"viz-grad", (dir / "in" / "phantom_000.png").string(),
                       (dir / "in" / "phantom_001.png").string(), "--out", (dir / "viz").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* id : {"phantom_000", "phantom_001"}) {
        const Image heat = load_image(dir / "viz" / (std::string(id) + "_gradmag.png"));
        EXPECT_EQ(heat.height(), 40);
        EXPECT_EQ(heat.width(), 36);
        EXPECT_TRUE(fs::exists(dir / "viz" / (std::string(id) + "_orient.png")));
    }
}

TEST(VizGrad, SharedStemsKeepBothOutputs)
{
    const fs::path dir = fresh_dir("viz_same");
    fs::create_directories(dir / "hr");
    fs::create_directories(dir / "sr");
    save_image(synthesize_radiograph(16, 16, 1), dir / "hr" / "x.png");
    save_image(synthesize_radiograph(16, 16, 2), dir / "sr" / "x.png");
    const CliResult r = cli({"viz-grad", (dir / "hr" / "x.png").string(), (dir / "sr" / "x.png").string(), "--out",
                             (dir / "viz").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "viz" / "hr_x_gradmag.png"));
    EXPECT_TRUE(fs::exists(dir / "viz" / "sr_x_gradmag.png"));
}
