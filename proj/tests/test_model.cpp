#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "atlab/checkpoint.hpp"
#include "atlab/model.hpp"
#include "atlab/rng.hpp"

using namespace atlab;

TEST_CASE("build_mlp is deterministic: same seed, identical bits") {
    const MlpSpec spec{2, {16, 16}, 2};
    const Mlp a = Mlp::build(spec, 42);
    const Mlp b = Mlp::build(spec, 42);
    CHECK(a.params().values == b.params().values);
    const Mlp c = Mlp::build(spec, 43);
    CHECK(a.params().values != c.params().values);
}

TEST_CASE("mlp layout is total and ordered") {
    const ParamLayout layout = mlp_layout({2, {16, 16}, 2});
    CHECK(layout.total == 2 * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
    std::size_t expect_offset = 0;
    for (const ParamSlice& s : layout.slices) {
        CHECK(s.offset == expect_offset);
        expect_offset += s.count;
    }
    CHECK(expect_offset == layout.total);
}

TEST_CASE("mlp rejects invalid architecture") {
    CHECK_THROWS_AS(Mlp::build({0, {4}, 2}, 1), ConfigError);
    CHECK_THROWS_AS(Mlp::build({2, {4}, 1}, 1), ConfigError);
    CHECK_THROWS_AS(Mlp::build({2, {0}, 2}, 1), ConfigError);
}

TEST_CASE("set_params(get_params()) leaves forward bitwise unchanged") {
    Mlp m = Mlp::build({3, {8}, 2}, 7);
    Rng rng(5);
    Tensor x = Tensor::zeros({4, 3});
    for (double& v : x.data) v = rng.uniform01();
    const Tensor before = m.forward(x);
    const ParamVector p = m.params();
    m.set_params(p);
    const Tensor after = m.forward(x);
    CHECK(before.data == after.data);
}

TEST_CASE("zero parameters produce all-zero logits") {
    Mlp m = Mlp::build({3, {8, 8}, 2}, 7);
    ParamVector zeros = m.params();
    std::fill(zeros.values.begin(), zeros.values.end(), 0.0);
    m.set_params(zeros);
    const Tensor out = m.forward(Tensor::matrix(2, 3, {0.1, 0.5, 0.9, 0.2, 0.3, 0.4}));
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("set_params rejects layout mismatches") {
    Mlp m = Mlp::build({3, {8}, 2}, 7);
    ParamVector wrong;
    wrong.layout = mlp_layout({3, {9}, 2});
    wrong.values.assign(wrong.layout.total, 0.0);
    CHECK_THROWS_AS(m.set_params(wrong), LayoutError);
}

TEST_CASE("distinct parameter vectors are distinguishable on random probes") {
    const MlpSpec spec{2, {8}, 2};
    const Mlp a = Mlp::build(spec, 1);
    const Mlp b = Mlp::build(spec, 2);
    Rng rng(99);
    bool differs = false;
    for (int trial = 0; trial < 8 && !differs; ++trial) {
        Tensor x = Tensor::zeros({1, 2});
        for (double& v : x.data) v = rng.uniform01();
        differs = a.forward(x).data != b.forward(x).data;
    }
    CHECK(differs);
}

TEST_CASE("graph forward equals plain forward bit for bit") {
    const Mlp m = Mlp::build({4, {16, 8}, 3}, 21);
    Rng rng(13);
    Tensor x = Tensor::zeros({5, 4});
    for (double& v : x.data) v = rng.uniform01();

    Graph g;
    const Mlp::Bound bound = m.bind_forward(g, g.leaf(x));
    CHECK(g.value(bound.logits).data == m.forward(x).data);
}

TEST_CASE("checkpoint round-trips parameters bitwise") {
    const Mlp m = Mlp::build({5, {12, 7}, 4}, 77);
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "atlab_ckpt_test.ckpt";
    save_checkpoint(path.string(), m);
    const Mlp loaded = load_checkpoint(path.string());
    CHECK(loaded.spec() == m.spec());
    CHECK(loaded.params().values == m.params().values);
    CHECK(fingerprint(loaded.params()) == fingerprint(m.params()));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage") {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "atlab_ckpt_garbage.bin";
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("not a checkpoint at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path.string()), IoError);
}
