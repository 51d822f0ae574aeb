#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "bdgx/dataset.hpp"
#include "bdgx/env.hpp"
#include "bdgx/rng.hpp"

using namespace bdgx;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Pack, DefinitionAndOffsets) {
    SegmentLayout lay{2, 1};
    const std::vector<double> s = {1, 2}, a = {3}, sn = {4, 5};
    EXPECT_EQ(pack(lay, s, a, sn), (std::vector<double>{1, 2, 3, 4, 5}));

    SegmentLayout wide{4, 2};
    EXPECT_EQ(wide.s_offset(), 0u);
    EXPECT_EQ(wide.a_offset(), 4u);
    EXPECT_EQ(wide.s_next_offset(), 6u);
    EXPECT_EQ(wide.total_dim(), 10u);
}

TEST(Pack, RoundTripIsIdentity) {
    SegmentLayout lay{3, 2};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> s(3), a(2), sn(3);
        for (double& v : s) v = rng.uniform(-10, 10);
        for (double& v : a) v = rng.uniform(-1, 1);
        for (double& v : sn) v = rng.uniform(-10, 10);
        const std::vector<double> p = pack(lay, s, a, sn);
        const UnpackedTransition t = unpack(lay, p);
        EXPECT_EQ(t.s, s);
        EXPECT_EQ(t.a, a);
        EXPECT_EQ(t.s_next, sn);
        EXPECT_EQ(pack(lay, t.s, t.a, t.s_next), p);
    }
}

TEST(Pack, DimMismatchThrows) {
    SegmentLayout lay{2, 1};
    const std::vector<double> s = {1, 2}, a = {3, 4}, sn = {4, 5};
    EXPECT_THROW(pack(lay, s, a, sn), DimensionError);
    EXPECT_THROW(unpack(lay, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(CollectRollouts, ExactEpisodeBoundary) {
    const EnvSpec spec = make_pointmass_spec();
    Rng rng(3);
    auto policy = [&spec](const EnvState&, Rng& r) { return random_action(spec, r); };
    TransitionDataset ds = collect_rollouts(spec, policy, spec.horizon, rng);
    ASSERT_EQ(ds.size(), static_cast<std::size_t>(spec.horizon));
    for (std::size_t i = 0; i + 1 < ds.size(); ++i) EXPECT_FALSE(ds.done(i));
    EXPECT_TRUE(ds.done(ds.size() - 1));
}

TEST(CollectRollouts, PointmassRewardsNonPositive) {
    const EnvSpec spec = make_pointmass_spec({.gravity_scale = 2.0});
    Rng rng(4);
    auto policy = [&spec](const EnvState&, Rng& r) { return random_action(spec, r); };
    TransitionDataset ds = collect_rollouts(spec, policy, 10000, rng);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_LE(ds.reward(i), 0.0);
}

TEST(CollectRollouts, ZeroPolicyInForceFreeConfigIsFixedPoint) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 0.0, .friction_scale = 0.0});
    Rng rng(5);
    auto zero_policy = [](const EnvState&, Rng&) { return std::vector<double>{0.0, 0.0}; };
    TransitionDataset ds = collect_rollouts(spec, zero_policy, 500, rng);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto s = ds.state(i);
        const auto sn = ds.next_state(i);
        EXPECT_TRUE(std::equal(s.begin(), s.end(), sn.begin()));
    }
}

TEST(ReplayBuffer, RingEvictsOldestFirst) {
    ReplayBuffer buf(2, 1, 1);
    const std::vector<double> a = {0.0};
    buf.push(std::vector<double>{1.0}, a, 1.0, std::vector<double>{1.0}, false);
    buf.push(std::vector<double>{2.0}, a, 2.0, std::vector<double>{2.0}, false);
    buf.push(std::vector<double>{3.0}, a, 3.0, std::vector<double>{3.0}, false);
    EXPECT_EQ(buf.size(), 2u);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        ReplayBatch b = buf.sample(1, rng);
        EXPECT_NE(b.rewards.data[0], 1.0);  // first item evicted
    }
}

TEST(ReplayBuffer, SingleItemAlwaysSampled) {
    ReplayBuffer buf(8, 2, 1);
    buf.push(std::vector<double>{1.0, 2.0}, std::vector<double>{0.5}, -1.0,
             std::vector<double>{3.0, 4.0}, true);
    Rng rng(2);
    ReplayBatch b = buf.sample(16, rng);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_EQ(b.states(i, 0), 1.0);
        EXPECT_EQ(b.rewards.data[i], -1.0);
        EXPECT_EQ(b.dones.data[i], 1.0);
    }
}

TEST(ReplayBuffer, UniformSamplingFrequencies) {
    ReplayBuffer buf(16, 1, 1);
    const std::vector<double> a = {0.0};
    for (int i = 0; i < 10; ++i) {
        buf.push(std::vector<double>{double(i)}, a, double(i), std::vector<double>{0.0}, false);
    }
    Rng rng(6);
    std::vector<int> counts(10, 0);
    const int n = 100000;
    ReplayBatch b = buf.sample(n, rng);
    for (int i = 0; i < n; ++i) counts[int(b.rewards.data[i])]++;
    for (int i = 0; i < 10; ++i) {
        EXPECT_NEAR(counts[i] / double(n), 0.1, 0.01) << "item " << i;
    }
}

TEST(ReplayBuffer, EmptySampleThrows) {
    ReplayBuffer buf(4, 1, 1);
    Rng rng(1);
    EXPECT_THROW(buf.sample(1, rng), PrerequisiteError);
}

TEST(Normalizer, FitStatisticsAndRoundTrip) {
    Rng rng(7);
    Tensor rows({500, 3});
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        rows(i, 0) = rng.normal(5.0, 2.0);
        rows(i, 1) = rng.normal(-3.0, 0.5);
        rows(i, 2) = 7.0;  // constant dimension hits the std floor
    }
    Normalizer norm = Normalizer::fit(rows);
    EXPECT_GE(norm.stds()[2], Normalizer::kStdFloor);

    Tensor normed = norm.normalize_rows(rows);
    for (std::size_t j = 0; j < 2; ++j) {
        double mu = 0, var = 0;
        for (std::size_t i = 0; i < normed.rows(); ++i) mu += normed(i, j);
        mu /= double(normed.rows());
        for (std::size_t i = 0; i < normed.rows(); ++i) {
            var += (normed(i, j) - mu) * (normed(i, j) - mu);
        }
        var /= double(normed.rows());
        EXPECT_LT(std::abs(mu), 1e-9);
        EXPECT_NEAR(std::sqrt(var), 1.0, 1e-6);
    }

    std::vector<double> x = {1.25, -0.5, 7.0};
    const std::vector<double> back = norm.denormalize(norm.normalize(x));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], x[j], 1e-9);
}

TEST(Normalizer, UseBeforeFitThrows) {
    Normalizer norm;
    std::vector<double> x = {1.0};
    EXPECT_THROW(norm.normalize(x), PrerequisiteError);
}

TEST(DatasetIO, RoundTripExact) {
    const EnvSpec spec = make_pointmass_spec();
    Rng rng(8);
    auto policy = [&spec](const EnvState&, Rng& r) { return random_action(spec, r); };
    TransitionDataset ds = collect_rollouts(spec, policy, 300, rng);

    const std::string path = temp_path("bdgx_ds_roundtrip.bgd");
    ds.save(path);
    TransitionDataset back = TransitionDataset::load(path);
    ASSERT_EQ(back.size(), ds.size());
    ASSERT_TRUE(back.has_rewards());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto s0 = ds.state(i);
        const auto s1 = back.state(i);
        for (std::size_t j = 0; j < s0.size(); ++j) {
            EXPECT_EQ(float(s0[j]), float(s1[j]));  // stored as f32
        }
        EXPECT_EQ(float(ds.reward(i)), float(back.reward(i)));
        EXPECT_EQ(ds.done(i), back.done(i));
    }
    std::filesystem::remove(path);
}

TEST(DatasetIO, EmptyAndRewardFreeRoundTrip) {
    TransitionDataset empty(4, 2, true);
    const std::string p1 = temp_path("bdgx_ds_empty.bgd");
    empty.save(p1);
    TransitionDataset back = TransitionDataset::load(p1);
    EXPECT_EQ(back.size(), 0u);
    EXPECT_TRUE(back.has_rewards());

    TransitionDataset demo(3, 1, false);
    demo.append(std::vector<double>{1, 2, 3}, std::vector<double>{0.5},
                std::vector<double>{4, 5, 6}, 0.0, false);
    const std::string p2 = temp_path("bdgx_ds_demo.bgd");
    demo.save(p2);
    TransitionDataset demo_back = TransitionDataset::load(p2);
    EXPECT_FALSE(demo_back.has_rewards());
    EXPECT_THROW(demo_back.reward(0), PrerequisiteError);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(DatasetIO, TruncatedFileRejected) {
    TransitionDataset ds(2, 1, true);
    ds.append(std::vector<double>{1, 2}, std::vector<double>{0.1}, std::vector<double>{3, 4},
              -1.0, true);
    const std::string path = temp_path("bdgx_ds_trunc.bgd");
    ds.save(path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 6);
    EXPECT_THROW(TransitionDataset::load(path), FormatError);
    std::filesystem::remove(path);
}

TEST(DatasetIO, CsvExportShape) {
    TransitionDataset ds(2, 1, true);
    ds.append(std::vector<double>{1, 2}, std::vector<double>{0.25},
              std::vector<double>{3, 4}, -0.5, false);
    ds.append(std::vector<double>{5, 6}, std::vector<double>{-0.75},
              std::vector<double>{7, 8}, -1.5, true);
    const std::string path = temp_path("bdgx_ds.csv");
    ds.export_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "s_0,s_1,a_0,sn_0,sn_1,r,done");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2);
    std::filesystem::remove(path);
}

TEST(Container, VersionMismatchRejected) {
    Container c;
    c.kind = "dataset";
    c.meta["x"] = 1;
    const std::string path = temp_path("bdgx_container_v.bgd");
    c.save(path);
    // Flip the version digit inside the JSON header (same byte length).
    std::string contents;
    {
        std::ifstream f(path, std::ios::binary);
        contents.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    const auto pos = contents.find("\"version\":1");
    ASSERT_NE(pos, std::string::npos);
    contents[pos + std::string("\"version\":").size()] = '9';
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    }
    EXPECT_THROW(Container::load(path), FormatError);
    std::filesystem::remove(path);
}
