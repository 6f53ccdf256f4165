#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "clickmask/io.hpp"
#include "clickmask/sequence.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace clickmask;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
};

CliRun run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "clickmask_cli_output.txt";
    const std::string cmd = std::string(CLICKMASK_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::ostringstream s;
    s << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("clickmask_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& rel) const { return (dir / rel).string(); }

    void make_dataset(const fs::path& root, int count, int size) {
        fs::create_directories(root / "images");
        fs::create_directories(root / "masks");
        for (int i = 0; i < count; ++i) {
            const auto inst = fixtures::two_tone_blob(100 + i, size);
            char name[32];
            std::snprintf(name, sizeof name, "img%03d", i);
            save_png(inst.image, root / "images" / (std::string(name) + ".png"));
            write_mask(inst.gt, MaskMode::Grayscale, root / "masks" / (std::string(name) + ".png"));
        }
    }

    fs::path dir;
};

}  // namespace

TEST_F(CliTest, HelpAndUsage) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_NE(run("segment --help").out.find("x,y,+"), std::string::npos);
}

TEST_F(CliTest, EvalOracle) {
    make_dataset(dir / "ds", 3, 48);
    const CliRun r = run("eval --dataset " + p("ds") + " --engine oracle --out " + p("r/report.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("mean NoC@85: 1.0000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("mean NoC@90: 1.0000"), std::string::npos) << r.out;
    const std::string csv = slurp(dir / "r" / "report.csv");
    EXPECT_EQ(csv.rfind("instance,noc85,noc90,iou1", 0), 0u);
    EXPECT_NE(csv.find("\nmean,1.0000,1.0000"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "r" / "report_miou.csv"));
}

TEST_F(CliTest, EvalGraphCutTwoToneSuite) {
    make_dataset(dir / "ds", 8, 64);
    const CliRun r = run("eval --dataset " + p("ds") + " --engine graphcut --workers 4 --out " + p("report.csv") +
                      " --curve " + p("curve.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto pos = r.out.find("mean NoC@90: ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LE(std::stod(r.out.substr(pos + 13)), 3.0) << r.out;
    EXPECT_EQ(slurp(dir / "curve.csv").rfind("click,miou\n", 0), 0u);
}

TEST_F(CliTest, EvalInputErrors) {
    fs::create_directories(dir / "ds" / "images");
    save_png(fixtures::two_tone(8, 8, 4), dir / "ds" / "images" / "a.png");
    EXPECT_EQ(run("eval --dataset " + p("ds") + " --out " + p("r.csv")).code, 1);
    EXPECT_EQ(run("eval --dataset " + p("nowhere") + " --out " + p("r.csv")).code, 1);
    make_dataset(dir / "ok", 2, 48);
    EXPECT_EQ(run("eval --dataset " + p("ok") + " --engine warp --out " + p("r.csv")).code, 1);
    EXPECT_EQ(run("eval --dataset " + p("ok") + " --thresholds 0.9,x --out " + p("r.csv")).code, 1);
    // A mask without an image is reported and makes the run fail after writing the report.
    write_mask(LabelMask(48, 48, 1), MaskMode::Grayscale, dir / "ok" / "masks" / "orphan.png");
    const CliRun r = run("eval --dataset " + p("ok") + " --engine oracle --out " + p("r.csv"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("orphan"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "r.csv"));
}

TEST_F(CliTest, Segment) {
    save_png(fixtures::two_tone(32, 24, 16, 30, 220), dir / "tt.png");
    const CliRun r = run("segment --image " + p("tt.png") + " --clicks \"5,12,+;26,12,-\" --seed-radius 2 --out " + p("m.png"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(read_mask(dir / "m.png"), fixtures::left_block(32, 24, 16));
    EXPECT_EQ(run("segment --image " + p("tt.png") + " --clicks \"5,5,-\" --out " + p("m.png")).code, 1);
    EXPECT_EQ(run("segment --image " + p("tt.png") + " --clicks \"\" --out " + p("m.png")).code, 1);
    EXPECT_EQ(run("segment --image " + p("tt.png") + " --clicks \"5,5\" --out " + p("m.png")).code, 1);
    EXPECT_EQ(run("segment --image " + p("tt.png") + " --clicks \"99,5,+\" --out " + p("m.png")).code, 1);
    EXPECT_EQ(run("segment --image " + p("none.png") + " --clicks \"1,1,+\" --out " + p("m.png")).code, 1);
    EXPECT_EQ(run("segment --image " + p("tt.png") + " --clicks \"1,1,+\" --lambda -1 --out " + p("m.png")).code, 1);
}

TEST_F(CliTest, Propagate) {
    fs::create_directories(dir / "same");
    fs::create_directories(dir / "moving");
    for (int t = 0; t < 4; ++t) {
        save_png(fixtures::square_frame(48, 40, 10, 10, 14), dir / "same" / ("f" + std::to_string(t) + ".png"));
        save_png(fixtures::square_frame(64, 64, 10 + 3 * t, 16 + 2 * t, 18), dir / "moving" / ("f" + std::to_string(t) + ".png"));
    }
    const LabelMask ref = fixtures::rect_mask(48, 40, 10, 10, 14, 14);
    write_mask(ref, MaskMode::Grayscale, dir / "ref.png");
    CliRun r = run("propagate --frames " + p("same") + " --refs 0:" + p("ref.png") + " --out " + p("out"));
    ASSERT_EQ(r.code, 0) << r.out;
    for (int t = 0; t < 4; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.png", t);
        EXPECT_EQ(read_mask(dir / "out" / name), ref);
    }
    EXPECT_EQ(run("propagate --frames " + p("same") + " --refs \"\" --out " + p("out")).code, 1);
    EXPECT_EQ(run("propagate --frames " + p("same") + " --refs 9:" + p("ref.png") + " --out " + p("out")).code, 1);

    write_mask(fixtures::rect_mask(64, 64, 10, 16, 18, 18), MaskMode::Grayscale, dir / "mref.png");
    r = run("propagate --frames " + p("moving") + " --refs 0:" + p("mref.png") + " --out " + p("mout"));
    ASSERT_EQ(r.code, 0) << r.out;
    for (int t = 0; t < 4; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.png", t);
        EXPECT_GE(iou(read_mask(dir / "mout" / name), fixtures::rect_mask(64, 64, 10 + 3 * t, 16 + 2 * t, 18, 18)), 0.9);
    }
}

TEST_F(CliTest, ConvertRoundTrips) {
    fixtures::Rng rng(5);
    Volume v;
    v.dims = {7, 5, 4};
    v.spacing = {0.5, 0.5, 2.0};
    for (std::size_t i = 0; i < v.voxel_count(); ++i) v.data.push_back(static_cast<std::uint16_t>(rng.next()));
    save_volume(v, dir / "ct.vol");
    for (int axis = 0; axis < 3; ++axis) {
        const std::string frames = p("frames" + std::to_string(axis));
        ASSERT_EQ(run("convert volume2frames --volume " + p("ct.vol") + " --axis " + std::to_string(axis) + " --out " + frames).code, 0);
        const std::string back = p("back" + std::to_string(axis) + ".vol");
        const CliRun r = run("convert frames2volume --frames " + frames + " --axis " + std::to_string(axis) +
                          " --spacing 0.5 0.5 2 --out " + back);
        ASSERT_EQ(r.code, 0) << r.out;
        EXPECT_EQ(load_volume(back), v) << "axis " << axis;
        EXPECT_EQ(slurp(back.substr(0, back.size() - 4) + ".raw"), slurp(dir / "ct.raw"));
    }
    EXPECT_EQ(run("convert volume2frames --volume " + p("ct.vol") + " --axis 3 --out " + p("x")).code, 1);

    fs::create_directories(dir / "masks");
    std::vector<LabelMask> masks;
    for (int i = 0; i < 3; ++i) {
        LabelMask m = fixtures::random_mask(rng, 30, 20, 0.3);
        for (int y = 5; y < 15; ++y)
            for (int x = 8; x < 20; ++x) m.set(x, y, static_cast<std::uint16_t>(2 + i));
        masks.push_back(m);
        write_mask(m, MaskMode::Grayscale, dir / "masks" / ("m" + std::to_string(i) + ".png"));
    }
    ASSERT_EQ(run("convert mask2coco --masks " + p("masks") + " --epsilon 1 --out " + p("coco.json")).code, 0);
    ASSERT_EQ(run("convert coco2masks --coco " + p("coco.json") + " --out " + p("decoded")).code, 0);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(read_mask(dir / "decoded" / ("m" + std::to_string(i) + ".png")), masks[i]);
    std::ofstream(dir / "cats.txt") << "1|thing|1,2,3\n";
    EXPECT_EQ(run("convert mask2coco --masks " + p("masks") + " --categories " + p("cats.txt") + " --out " + p("c2.json")).code, 1);
}

TEST_F(CliTest, Serve) {
    EXPECT_NE(run("serve --engine nope --port 0").out.find("graphcut"), std::string::npos);
    EXPECT_EQ(run("serve --engine nope --port 0").code, 1);

    const fs::path log = dir / "serve.log";
    const std::string cmd = std::string(CLICKMASK_CLI) + " serve --port 0 > " + log.string() + " 2>&1 & echo $!";
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    int pid = 0;
    ASSERT_EQ(std::fscanf(pipe, "%d", &pid), 1);
    pclose(pipe);
    int port = 0;
    for (int i = 0; i < 200 && port == 0; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
        const std::string text = slurp(log);
        const auto pos = text.find("http://127.0.0.1:");
        if (pos != std::string::npos && text.find('\n', pos) != std::string::npos) port = std::stoi(text.substr(pos + 17));
    }
    ASSERT_GT(port, 0) << slurp(log);
    httplib::Client client("127.0.0.1", port);
    const auto res = client.Get("/health");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    kill(pid, SIGTERM);
    for (int i = 0; i < 200 && slurp(log).find("stopped") == std::string::npos; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
    EXPECT_NE(slurp(log).find("stopped"), std::string::npos);
}
