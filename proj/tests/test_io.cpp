#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset_io.hpp"
#include "dp.hpp"
#include "env.hpp"

using namespace mcq;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mcq_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

Dataset sample_dataset() {
    PointEnvConfig ec;
    ec.dim = 2;
    ec.horizon = 10;
    const PointEnv env(ec);
    BehaviorController ctrl;
    ctrl.kind = ControllerKind::replay_mix;
    return collect_env_dataset(env, ctrl, 5, 77);
}

void corrupt_byte(const std::string& path, std::size_t offset, char value) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(offset);
    f.put(value);
}

}  // namespace

TEST_CASE("dataset round trip is exact") {
    TempDir tmp;
    const Dataset data = sample_dataset();
    const std::string path = tmp.file("d.mcqd");
    write_dataset(path, data);
    const Dataset back = read_dataset(path);
    REQUIRE(back.size() == data.size());
    CHECK(back.state_dim == data.state_dim);
    CHECK(back.action_dim == data.action_dim);
    CHECK(back.discrete == data.discrete);
    CHECK(back.seed == data.seed);
    CHECK(back.behavior == data.behavior);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back.transitions[i].s == data.transitions[i].s);
        CHECK(back.transitions[i].a == data.transitions[i].a);
        CHECK(back.transitions[i].r == data.transitions[i].r);
        CHECK(back.transitions[i].s_next == data.transitions[i].s_next);
        CHECK(back.transitions[i].d == data.transitions[i].d);
    }
}

TEST_CASE("a flipped magic byte is rejected") {
    TempDir tmp;
    const std::string path = tmp.file("bad.mcqd");
    write_dataset(path, sample_dataset());
    corrupt_byte(path, 0, 'X');
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("BadMagic"), Error);
}

TEST_CASE("an unknown dataset version is rejected") {
    TempDir tmp;
    const std::string path = tmp.file("v9.mcqd");
    write_dataset(path, sample_dataset());
    corrupt_byte(path, 4, 9);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("VersionMismatch"),
                         Error);
}

TEST_CASE("a payload shorter than the header count is rejected") {
    TempDir tmp;
    const std::string path = tmp.file("short.mcqd");
    write_dataset(path, sample_dataset());
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 16);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("Truncated"), Error);
}

TEST_CASE("checkpoint round trip preserves names shapes and values") {
    TempDir tmp;
    std::vector<NamedTensor> tensors;
    tensors.push_back({"actor/w0", {2, 3}, {1, 2, 3, 4, 5, 6}});
    tensors.push_back({"alpha/log_value", {1}, {-0.25}});
    tensors.push_back({"meta/step", {1}, {12345}});
    const std::string path = tmp.file("c.mcqc");
    write_checkpoint(path, tensors);
    const auto back = read_checkpoint(path);
    REQUIRE(back.size() == 3);
    CHECK(back[0].name == "actor/w0");
    CHECK(back[0].shape == std::vector<std::size_t>{2, 3});
    CHECK(back[0].data == tensors[0].data);
    CHECK(find_tensor(back, "meta/step").data[0] == 12345.0);
    CHECK_THROWS_AS(find_tensor(back, "missing/name"), Error);
}

TEST_CASE("duplicate tensor names are rejected on write") {
    TempDir tmp;
    std::vector<NamedTensor> tensors;
    tensors.push_back({"a", {1}, {1.0}});
    tensors.push_back({"a", {1}, {2.0}});
    CHECK_THROWS_WITH_AS(write_checkpoint(tmp.file("dup.mcqc"), tensors),
                         doctest::Contains("DuplicateName"), Error);
}

TEST_CASE("corrupted checkpoints are rejected") {
    TempDir tmp;
    const std::string path = tmp.file("c.mcqc");
    write_checkpoint(path, {{"x", {4}, {1, 2, 3, 4}}});
    corrupt_byte(path, 1, 'Z');
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("BadMagic"),
                         Error);
    write_checkpoint(path, {{"x", {4}, {1, 2, 3, 4}}});
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 8);
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("Truncated"),
                         Error);
}

TEST_CASE("checkpoint values are quantized to 32-bit precision") {
    TempDir tmp;
    const double precise = 0.1234567890123456789;
    const std::string path = tmp.file("q.mcqc");
    write_checkpoint(path, {{"v", {1}, {precise}}});
    const auto back = read_checkpoint(path);
    CHECK(back[0].data[0] == static_cast<double>(static_cast<float>(precise)));
    CHECK(back[0].data[0] != precise);
}

TEST_CASE("config parsing handles sections comments and types") {
    const Config cfg = Config::parse_string(
        "# comment\n"
        "[train]\n"
        "lambda = 0.9   ; inline comment\n"
        "steps = 50000\n"
        "hidden = 16 16\n"
        "flag = true\n"
        "\n"
        "[env]\n"
        "goal = 0.5 -0.25\n");
    CHECK(cfg.get_double("train", "lambda", 0) == doctest::Approx(0.9));
    CHECK(cfg.get_int("train", "steps", 0) == 50000);
    CHECK(cfg.get_bool("train", "flag", false));
    CHECK(cfg.get_sizes("train", "hidden", {}) ==
          std::vector<std::size_t>{16, 16});
    const auto goal = cfg.get_doubles("env", "goal");
    REQUIRE(goal.size() == 2);
    CHECK(goal[1] == doctest::Approx(-0.25));
    CHECK(cfg.get("none", "missing", "fallback") == "fallback");
    CHECK_THROWS_AS(cfg.require("none", "missing"), Error);
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_WITH_AS(Config::parse_string("[broken\n"),
                         doctest::Contains("ConfigError"), Error);
    CHECK_THROWS_AS(Config::parse_string("keyless line\n"), Error);
    const Config cfg = Config::parse_string("[a]\nx = notanumber\n");
    CHECK_THROWS_AS(cfg.get_double("a", "x", 0), Error);
    CHECK_THROWS_AS(cfg.get_bool("a", "x", false), Error);
}

TEST_CASE("dotted overrides update and extend the config") {
    Config cfg = Config::parse_string("[train]\nlambda = 0.9\n");
    cfg.set_dotted("train.lambda=0.5");
    cfg.set_dotted("harness.trials = 10");
    CHECK(cfg.get_double("train", "lambda", 0) == doctest::Approx(0.5));
    CHECK(cfg.get_int("harness", "trials", 0) == 10);
    CHECK_THROWS_AS(cfg.set_dotted("nodot"), Error);
    CHECK_THROWS_AS(cfg.set_dotted("nokey=1"), Error);
}

TEST_CASE("the canonical dump is stable and reparseable") {
    Config cfg = Config::parse_string("[b]\nz = 1\na = 2\n[a]\nk = v\n");
    const std::string dump = cfg.dump();
    const Config again = Config::parse_string(dump);
    CHECK(again.dump() == dump);
    CHECK(dump.find("[a]") < dump.find("[b]"));
}

TEST_CASE("a tabular dataset survives the round trip") {
    TempDir tmp;
    std::vector<double> t = {0.0, 1.0, 1.0, 0.0};
    const TabularMdp mdp = build_mdp(2, 1, t, {1.0, 0.0}, {1, 0}, 0.9, 1.0);
    const TabularPolicy mu = build_policy(2, 1, {1.0, 1.0});
    const Dataset data = collect_dataset(mdp, mu, 2, 8, 5);
    const std::string path = tmp.file("tab.mcqd");
    write_dataset(path, data);
    const Dataset back = read_dataset(path);
    CHECK(back.discrete);
    CHECK(back.state_dim == 1);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back.transitions[i].s == data.transitions[i].s);
        CHECK(back.transitions[i].a == data.transitions[i].a);
    }
}

TEST_CASE("value tables round trip under their reserved name") {
    TempDir tmp;
    QTable q(3, 2);
    Rng rng(9);
    for (auto& v : q.values) v = rng.uniform(-5, 5);
    const std::string path = tmp.file("q.mcqc");
    write_qtable(path, q);
    const QTable back = read_qtable(path);
    CHECK(back.n_states == 3);
    CHECK(back.n_actions == 2);
    for (std::size_t i = 0; i < q.values.size(); ++i)
        CHECK(back.values[i] ==
              static_cast<double>(static_cast<float>(q.values[i])));
    const auto raw = read_checkpoint(path);
    CHECK(raw[0].name == "qtable/values");
}
