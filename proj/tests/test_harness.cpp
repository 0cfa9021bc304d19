#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "memcore/checkpoint.hpp"
#include "memcore/dataset.hpp"
#include "memcore/error.hpp"
#include "memcore/experiment.hpp"

using namespace memcore;
using namespace memcore::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("memcore_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void be32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

unsigned char fixture_pixel(std::size_t img, std::size_t k) {
    return static_cast<unsigned char>((img * 31 + k * 7) % 256);
}

fs::path idx_fixture(const fs::path& dir) {
    std::vector<unsigned char> b;
    be32(b, 0x00000803);
    be32(b, 4);
    be32(b, 28);
    be32(b, 28);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 784; ++k) b.push_back(fixture_pixel(i, k));
    write_bytes(dir / "images.idx", b);
    std::vector<unsigned char> l;
    be32(l, 0x00000801);
    be32(l, 4);
    for (unsigned char c : {7, 2, 1, 0}) l.push_back(c);
    write_bytes(dir / "labels.idx", l);
    return dir;
}

ExperimentConfig small_kdd() {
    auto cfg = preset("kdd");
    cfg.data.train_samples = 120;
    cfg.data.test_samples = 40;
    cfg.train.epochs = 2;
    return cfg;
}

}  // namespace

TEST(Harness, IdxFixtureDecodes) {
    const auto dir = idx_fixture(scratch_dir("idx"));
    const auto ds = load_idx(dir / "images.idx", dir / "labels.idx");
    ASSERT_EQ(ds.features.rows(), 4u);
    ASSERT_EQ(ds.features.cols(), 784u);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 784; ++k)
            ASSERT_DOUBLE_EQ(ds.features(i, k), fixture_pixel(i, k) / 255.0 - 0.5);
    EXPECT_EQ(ds.labels, (std::vector<int>{7, 2, 1, 0}));
    EXPECT_EQ(load_idx_images(dir / "images.idx", 2).rows(), 2u);
}

TEST(Harness, IdxEndpointScaling) {
    const auto dir = scratch_dir("idx_ends");
    std::vector<unsigned char> b;
    be32(b, 0x00000803);
    be32(b, 1);
    be32(b, 1);
    be32(b, 2);
    b.push_back(0);
    b.push_back(255);
    write_bytes(dir / "two.idx", b);
    const auto m = load_idx_images(dir / "two.idx");
    EXPECT_EQ(m(0, 0), -0.5);
    EXPECT_EQ(m(0, 1), 0.5);
}

TEST(Harness, IdxErrors) {
    const auto dir = scratch_dir("idx_bad");
    write_bytes(dir / "empty.idx", {});
    EXPECT_THROW((void)load_idx_images(dir / "empty.idx"), FormatError);
    std::vector<unsigned char> b;
    be32(b, 0x00000803);
    be32(b, 2);
    be32(b, 28);
    be32(b, 28);
    b.resize(b.size() + 784 + 10, 0);
    write_bytes(dir / "short.idx", b);
    try {
        (void)load_idx_images(dir / "short.idx");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
    std::vector<unsigned char> wrong;
    be32(wrong, 0x00000801);
    be32(wrong, 0);
    write_bytes(dir / "magic.idx", wrong);
    EXPECT_THROW((void)load_idx_images(dir / "magic.idx"), FormatError);
    EXPECT_THROW((void)load_idx_images(dir / "missing.idx"), FormatError);
}

TEST(Harness, CsvNumericFixture) {
    const auto dir = scratch_dir("csv");
    write_text(dir / "a.csv", "1,10,5\n2,20,5\n3,40,5\n");
    const auto ds = load_csv(dir / "a.csv");
    ASSERT_EQ(ds.features.rows(), 3u);
    const double want[3][3] = {{-0.5, -0.5, 0.0}, {0.0, -0.5 + 10.0 / 30.0, 0.0}, {0.5, 0.5, 0.0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(ds.features(i, j), want[i][j], 1e-15);
    const auto raw = load_csv_table(dir / "a.csv");
    EXPECT_EQ(raw.raw(2, 1), 40.0);
}

TEST(Harness, CsvLabelsAndCategoricals) {
    const auto dir = scratch_dir("csv_cat");
    write_text(dir / "c.csv", "x,proto,y\n0.5,tcp,normal\n1.5,udp,attack\n2.5,tcp,normal\n");
    CsvOptions o;
    o.header = true;
    o.label_column = 2;
    const auto ds = load_csv(dir / "c.csv", o);
    EXPECT_EQ(ds.dims(), 2u);
    EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 0}));
    EXPECT_EQ(ds.features(0, 1), ds.features(2, 1));
    o.categorical = CategoricalEncoding::one_hot;
    EXPECT_EQ(load_csv(dir / "c.csv", o).dims(), 3u);
    o.categorical = CategoricalEncoding::none;
    EXPECT_THROW((void)load_csv(dir / "c.csv", o), FormatError);
}

TEST(Harness, CsvKddWidth) {
    const auto dir = scratch_dir("csv_kdd");
    std::string row;
    for (int k = 0; k < 41; ++k) row += (k ? "," : "") + std::to_string(k % 5);
    write_text(dir / "k.csv", row + "\n" + row + "\n");
    EXPECT_EQ(load_csv(dir / "k.csv").dims(), 41u);
}

TEST(Harness, CsvErrorsNameTheLine) {
    const auto dir = scratch_dir("csv_bad");
    write_text(dir / "r.csv", "1,2,3\n4,5,6\n7,8\n");
    try {
        (void)load_csv(dir / "r.csv");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    write_text(dir / "n.csv", "1,2\n3,abc\n");
    CsvOptions strict;
    strict.categorical = CategoricalEncoding::none;
    EXPECT_THROW((void)load_csv(dir / "n.csv", strict), FormatError);
    write_text(dir / "e.csv", "");
    EXPECT_THROW((void)load_csv(dir / "e.csv"), FormatError);
}

TEST(Harness, ScalerRoundTrip) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-300.0, 1200.0);
    Matrix raw(50, 6);
    for (auto& v : raw.data()) v = u(rng);
    MinMaxScaler s;
    s.fit(raw);
    const auto scaled = s.transform(raw);
    for (double v : scaled.data()) {
        EXPECT_GE(v, -0.5);
        EXPECT_LE(v, 0.5);
    }
    const auto back = s.inverse(scaled);
    for (std::size_t k = 0; k < raw.data().size(); ++k)
        EXPECT_NEAR(back.data()[k], raw.data()[k], 1e-9 * std::abs(raw.data()[k]) + 1e-12);
    Matrix wide(1, 6, 1e6);
    const auto clamped = s.transform(wide);
    for (double v : clamped.data()) EXPECT_EQ(v, 0.5);
}

TEST(Harness, Accuracy) {
    Matrix p(4, 3);
    const std::vector<int> labels{0, 1, 2, 1};
    for (int i = 0; i < 4; ++i) p(i, labels[i]) = 1.0;
    EXPECT_EQ(accuracy(p, labels), 1.0);
    p(3, 1) = 0.0;
    p(3, 0) = 1.0;
    EXPECT_EQ(accuracy(p, labels), 0.75);
    const std::vector<int> wrong{1, 2, 0, 2};
    EXPECT_EQ(accuracy(p, wrong), 0.0);
    EXPECT_THROW((void)accuracy(p, std::vector<int>{0, 1}), InvalidInput);
}

TEST(Harness, OneHot) {
    const auto m = one_hot(std::vector<int>{2, 0}, 3);
    EXPECT_EQ(m(0, 2), 0.5);
    EXPECT_EQ(m(0, 0), -0.5);
    EXPECT_EQ(m(1, 0), 0.5);
    EXPECT_THROW((void)one_hot(std::vector<int>{3}, 3), InvalidInput);
}

TEST(Harness, PresetsValidate) {
    for (const auto& name : preset_names()) {
        SCOPED_TRACE(name);
        EXPECT_NO_THROW(preset(name).validate());
    }
    EXPECT_EQ(preset("kdd").topology, (std::vector<std::size_t>{41, 15, 41}));
    EXPECT_THROW((void)preset("nope"), ConfigError);
}

TEST(Harness, ConfigStrictAndRoundTrip) {
    auto j = nlohmann::json::parse(R"({"preset": "kdd", "seed": 9, "train": {"eta": 0.1}})");
    const auto cfg = config_from_json(j);
    EXPECT_EQ(cfg.name, "kdd");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.train.eta, 0.1);
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back).dump(), config_to_json(cfg).dump());
    EXPECT_EQ(config_hash(back), config_hash(cfg));
    EXPECT_NE(config_hash(cfg), config_hash(preset("kdd")));
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"sead": 1})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"train": {"eta": "x"}})")),
                 ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"preset": "nope"})")),
                 ConfigError);
    auto bad = preset("kdd");
    bad.topology = {41, 15, 40};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Harness, AnomalyRunIsDeterministic) {
    const auto cfg = small_kdd();
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    const auto da = scratch_dir("det_a"), db = scratch_dir("det_b");
    write_artifacts(a, da);
    write_artifacts(b, db);
    for (const auto& entry : fs::recursive_directory_iterator(da)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), da);
        EXPECT_EQ(slurp(entry.path()), slurp(db / rel)) << rel;
    }
    EXPECT_TRUE(fs::exists(da / "metrics.json"));
    EXPECT_TRUE(fs::exists(da / "checkpoint"));
    EXPECT_TRUE(fs::exists(da / "reconstructions.csv"));
    ASSERT_TRUE(a.metrics.detection_rate);
    EXPECT_GE(*a.metrics.detection_rate, 0.0);
    EXPECT_LE(*a.metrics.detection_rate, 1.0);
    EXPECT_EQ(a.metrics.cores, 1u);
    auto other = cfg;
    other.seed = 2;
    EXPECT_NE(metrics_to_json(run_experiment(other).metrics).dump(),
              metrics_to_json(a.metrics).dump());
}

TEST(Harness, PlanModeMapsAndCosts) {
    auto cfg = preset("caltech");
    const auto r = run_experiment(cfg);
    EXPECT_FALSE(r.net.has_value());
    EXPECT_EQ(r.metrics.cores, r.plan.core_count());
    EXPECT_GT(r.plan.core_count(), 576u);
    ASSERT_FALSE(r.costs.empty());
    cfg.mesh = map::MeshDims{};
    EXPECT_THROW((void)run_experiment(cfg), CapacityError);
}

TEST(Harness, CheckpointRoundTrip) {
    train::CircuitOptions o;
    o.limits = map::CoreLimits{5, 3};
    const std::vector<std::size_t> topo{8, 4, 2};
    const auto net = train::init_network(topo, 3, o);
    const auto dir = scratch_dir("ckpt");
    save_checkpoint(net, {}, dir);
    EXPECT_TRUE(load_checkpoint(dir) == net);
    fs::remove(dir / "network.json");
    EXPECT_THROW((void)load_checkpoint(dir), FormatError);
}

TEST(Harness, ManifestRecordsHash) {
    const auto dir = scratch_dir("manifest");
    const auto cfg = preset("kdd");
    write_manifest(dir, cfg, "memcore-cli run", 1.5);
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(j.at("config_hash"), config_hash(cfg));
    EXPECT_EQ(j.at("wall_clock_seconds"), 1.5);
    EXPECT_TRUE(j.contains("modules"));
}

TEST(Harness, ConstraintStudyReportsBothAccuracies) {
    auto cfg = preset("digits-desk");
    cfg.data.train_samples = 100;
    cfg.data.test_samples = 50;
    cfg.train.epochs = 2;
    cfg.pretrain_epochs = 1;
    cfg.constraint_study = true;
    const auto r = run_experiment(cfg);
    ASSERT_TRUE(r.metrics.accuracy);
    ASSERT_TRUE(r.metrics.unconstrained_accuracy);
    ASSERT_TRUE(r.metrics.software_accuracy);
    for (double a : {*r.metrics.accuracy, *r.metrics.unconstrained_accuracy,
                     *r.metrics.software_accuracy}) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
    EXPECT_EQ(r.metrics.pretrain_final_mse.size(), 2u);
    EXPECT_EQ(r.metrics.mse_curve.size(), 2u);
}
