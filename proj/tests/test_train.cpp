#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "prng.hpp"
#include "train.hpp"

using namespace glim;

namespace {

GlimmerNetConfig micro_config() {
    GlimmerNetConfig cfg;
    cfg.input_hw = {16, 16};
    cfg.num_classes = 3;
    cfg.stem_width = 4;
    cfg.num_stages = 2;
    cfg.blocks_per_stage = {1, 1};
    cfg.stage_widths = {4, 8};
    cfg.m = 2;
    cfg.dilations = {1, 2};
    cfg.pool_kinds = {PoolKind::max, PoolKind::avg};
    return cfg;
}

Dataset micro_dataset(int n_per_class, uint64_t seed) {
    Dataset ds;
    ds.class_names = {"a", "b", "c"};
    SplitMix64 rng(seed);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < n_per_class; ++i) {
            TensorF img({1, 3, 16, 16});
            // class-dependent mean so the problem is learnable
            const float base = 0.2f + 0.3f * static_cast<float>(k);
            for (int64_t j = 0; j < img.numel(); ++j)
                img.data()[j] = base + static_cast<float>(rng.uniform(-0.05, 0.05));
            ds.images.push_back(std::move(img));
            ds.labels.push_back(k);
            ds.paths.push_back("mem://" + std::to_string(k) + "/" + std::to_string(i));
        }
    return ds;
}

std::vector<float> snapshot(const Model<float>& m) {
    std::vector<float> out;
    for (const auto& e : m.params.entries)
        out.insert(out.end(), e.value.data(), e.value.data() + e.value.numel());
    return out;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("staircase learning-rate schedule") {
    OptimHyper h;
    CHECK(lr_at_epoch(h, 0) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(h, 1) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(h, 2) == doctest::Approx(9.75e-4));
    CHECK(lr_at_epoch(h, 3) == doctest::Approx(9.75e-4));
    CHECK(lr_at_epoch(h, 5) == doctest::Approx(9.50625e-4));
    h.step_epochs = 3;
    CHECK(lr_at_epoch(h, 2) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(h, 3) == doctest::Approx(9.75e-4));
}

TEST_CASE("optimizer single-step worked value") {
    // p=1, g=1, wd=0: v=0.1, b=1/(sqrt(0.1)+1e-8), p'=1-1e-3*b = 0.99683772...
    ParamStore<float> store;
    const int i = store.add("p", {1, 1, 1, 1}, true);
    store[i].data()[0] = 1.0f;
    store.entries[0].grad = TensorF({1, 1, 1, 1}, {1.0f});
    OptimHyper h;
    h.weight_decay = 0;
    rmsprop_step(store, 1e-3f, h);
    CHECK(store[i].data()[0] == doctest::Approx(0.99683772).epsilon(1e-6));
}

TEST_CASE("optimizer fixed points and controls") {
    OptimHyper h;
    SUBCASE("zero gradient with zero decay leaves params alone") {
        ParamStore<float> store;
        const int i = store.add("p", {1, 2, 1, 1}, true);
        store[i] = TensorF({1, 2, 1, 1}, {3, -4});
        store.entries[0].grad = TensorF({1, 2, 1, 1});
        h.weight_decay = 0;
        rmsprop_step(store, 1e-3f, h);
        CHECK(store[i].data()[0] == 3.0f);
        CHECK(store[i].data()[1] == -4.0f);
    }
    SUBCASE("lr zero freezes params but still advances state") {
        ParamStore<float> store;
        const int i = store.add("p", {1, 1, 1, 1}, true);
        store[i].data()[0] = 2.0f;
        store.entries[0].grad = TensorF({1, 1, 1, 1}, {0.5f});
        rmsprop_step(store, 0.0f, h);
        CHECK(store[i].data()[0] == 2.0f);
        CHECK(store.entries[0].sq_avg.numel() == 1);
        CHECK(store.entries[0].sq_avg.data()[0] > 0.0f);
    }
    SUBCASE("weight decay couples into the gradient") {
        ParamStore<float> store;
        store.add("p", {1, 1, 1, 1}, true);
        store[0].data()[0] = 1.0f;
        store.entries[0].grad = TensorF({1, 1, 1, 1});
        h.weight_decay = 1.0;  // effective g = 1
        rmsprop_step(store, 1e-3f, h);
        CHECK(store[0].data()[0] == doctest::Approx(0.99683772).epsilon(1e-6));
    }
    SUBCASE("non-trainable entries never move") {
        ParamStore<float> store;
        const int i = store.add("rm", {1, 1, 1, 1}, false);
        store[i].data()[0] = 7.0f;
        store.entries[0].grad = TensorF({1, 1, 1, 1}, {100.0f});
        rmsprop_step(store, 1.0f, h);
        CHECK(store[i].data()[0] == 7.0f);
    }
    SUBCASE("two steps are deterministic") {
        auto run = [&] {
            ParamStore<float> store;
            store.add("p", {1, 3, 1, 1}, true);
            store[0] = TensorF({1, 3, 1, 1}, {1, 2, 3});
            store.entries[0].grad = TensorF({1, 3, 1, 1}, {0.1f, -0.2f, 0.3f});
            rmsprop_step(store, 1e-3f, h);
            rmsprop_step(store, 1e-3f, h);
            return std::vector<float>(store[0].data(), store[0].data() + 3);
        };
        CHECK(run() == run());
    }
}

TEST_CASE("metrics worked example") {
    // two classes; true {0,0,1}, pred {0,1,1}:
    // class0: P=1, R=1/2, F1=2/3, support 2; class1: P=1/2, R=1, F1=2/3, support 1
    // weighted F1 = (2*(2/3) + 1*(2/3)) / 3 = 2/3
    const Metrics m = compute_metrics({0, 0, 1}, {0, 1, 1}, 2);
    CHECK(m.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(m.weighted_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.precision[0] == doctest::Approx(1.0));
    CHECK(m.recall[0] == doctest::Approx(0.5));
    CHECK(m.precision[1] == doctest::Approx(0.5));
    CHECK(m.recall[1] == doctest::Approx(1.0));
    CHECK(m.support == std::vector<long long>{2, 1});
    CHECK(m.confusion == std::vector<std::vector<long long>>{{1, 1}, {0, 1}});
}

TEST_CASE("metrics edge cases") {
    SUBCASE("perfect prediction") {
        const Metrics m = compute_metrics({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
        CHECK(m.accuracy == 1.0);
        CHECK(m.weighted_f1 == doctest::Approx(1.0));
    }
    SUBCASE("everything wrong") {
        const Metrics m = compute_metrics({0, 0, 1, 1}, {1, 1, 0, 0}, 2);
        CHECK(m.accuracy == 0.0);
        CHECK(m.weighted_f1 == doctest::Approx(0.0));
    }
    SUBCASE("single class present, predicted correctly") {
        const Metrics m = compute_metrics({1, 1, 1}, {1, 1, 1}, 3);
        CHECK(m.accuracy == 1.0);
        CHECK(m.weighted_f1 == doctest::Approx(1.0));
        CHECK(m.support == std::vector<long long>{0, 3, 0});
    }
    SUBCASE("confusion rows sum to support") {
        const Metrics m = compute_metrics({0, 1, 2, 2, 1, 0, 2}, {1, 1, 2, 0, 2, 0, 2}, 3);
        for (int k = 0; k < 3; ++k) {
            long long row = 0;
            for (int j = 0; j < 3; ++j) row += m.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
            CHECK(row == m.support[static_cast<size_t>(k)]);
        }
    }
    SUBCASE("length mismatch rejected") {
        CHECK_THROWS_AS(compute_metrics({0, 1}, {0}, 2), Error);
    }
}

TEST_CASE("horizontal flip reverses columns and is an involution") {
    TensorF img({1, 3, 2, 3});
    for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = static_cast<float>(i);
    TensorF f = hflip_image(img);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 2; ++y)
            for (int64_t x = 0; x < 3; ++x)
                CHECK(f.at(0, c, y, x) == img.at(0, c, y, 2 - x));
    CHECK(max_abs_diff(hflip_image(f), img) == 0.0f);
}

TEST_CASE("training loop determinism and schedule") {
    const auto cfg = micro_config();
    const Dataset ds = micro_dataset(4, 99);  // 12 samples
    TrainOptions topt;
    topt.epochs = 3;
    topt.batch = 4;
    topt.seed = 7;
    auto run = [&] {
        auto model = build_model<float>(cfg, 21);
        const auto stats = train_epochs(model, ds, topt);
        return std::make_pair(snapshot(model), stats);
    };
    const auto [p1, s1] = run();
    const auto [p2, s2] = run();
    CHECK(p1 == p2);  // bitwise
    REQUIRE(s1.size() == 3);
    for (size_t e = 0; e < s1.size(); ++e) {
        CHECK(s1[e].epoch == static_cast<int>(e) + 1);
        CHECK(s1[e].lr == doctest::Approx(lr_at_epoch(topt.opt, static_cast<int>(e))));
        CHECK(s1[e].loss == s2[e].loss);
        CHECK(std::isfinite(s1[e].loss));
        CHECK(s1[e].train_acc >= 0.0);
        CHECK(s1[e].train_acc <= 1.0);
    }
    SUBCASE("different seed reorders the stream") {
        auto model = build_model<float>(cfg, 21);
        TrainOptions other = topt;
        other.seed = 8;
        const auto stats = train_epochs(model, ds, other);
        CHECK(stats[0].loss != s1[0].loss);
    }
}

TEST_CASE("epochs zero is a valid no-op") {
    const auto cfg = micro_config();
    const Dataset ds = micro_dataset(2, 5);
    auto model = build_model<float>(cfg, 3);
    const auto before = snapshot(model);
    TrainOptions topt;
    topt.epochs = 0;
    topt.batch = 2;
    const auto stats = train_epochs(model, ds, topt);
    CHECK(stats.empty());
    CHECK(snapshot(model) == before);
}

TEST_CASE("batch validation") {
    const auto cfg = micro_config();
    auto model = build_model<float>(cfg, 3);
    TrainOptions topt;
    topt.epochs = 1;
    SUBCASE("batch below two rejected") {
        const Dataset ds = micro_dataset(2, 5);
        topt.batch = 1;
        CHECK_THROWS_AS(train_epochs(model, ds, topt), Error);
    }
    SUBCASE("tail batch of one rejected up front") {
        const Dataset ds = micro_dataset(3, 5);  // 9 samples
        topt.batch = 4;                          // 9 % 4 == 1
        CHECK_THROWS_WITH_AS(train_epochs(model, ds, topt), doctest::Contains("batch"), Error);
    }
    SUBCASE("empty dataset rejected") {
        Dataset empty;
        empty.class_names = {"a", "b", "c"};
        topt.batch = 2;
        CHECK_THROWS_AS(train_epochs(model, empty, topt), Error);
    }
}

TEST_CASE("flip augmentation changes the trajectory") {
    const auto cfg = micro_config();
    Dataset ds = micro_dataset(4, 17);
    // make images asymmetric so flips actually matter
    for (auto& img : ds.images) img.at(0, 0, 0, 0) += 1.0f;
    TrainOptions a;
    a.epochs = 2;
    a.batch = 4;
    a.hflip = false;
    TrainOptions b = a;
    b.hflip = true;
    auto m1 = build_model<float>(cfg, 9);
    auto m2 = build_model<float>(cfg, 9);
    const auto s1 = train_epochs(m1, ds, a);
    const auto s2 = train_epochs(m2, ds, b);
    CHECK(s1.back().loss != s2.back().loss);
}

TEST_CASE("training reduces loss on an easy problem") {
    const auto cfg = micro_config();
    const Dataset ds = micro_dataset(4, 31);
    auto model = build_model<float>(cfg, 13);
    TrainOptions topt;
    topt.epochs = 8;
    topt.batch = 4;
    topt.opt.lr0 = 5e-3;
    const auto stats = train_epochs(model, ds, topt);
    CHECK(stats.back().loss < stats.front().loss);
    CHECK(stats.back().train_acc >= 0.9);
}

TEST_CASE("evaluate reports metrics without touching running stats") {
    const auto cfg = micro_config();
    const Dataset ds = micro_dataset(3, 29);
    auto model = build_model<float>(cfg, 19);
    std::vector<float> stats_before;
    for (const auto& e : model.params.entries)
        if (!e.trainable)
            stats_before.insert(stats_before.end(), e.value.data(),
                                e.value.data() + e.value.numel());
    const Metrics m = evaluate(model, ds, 4);
    std::vector<float> stats_after;
    for (const auto& e : model.params.entries)
        if (!e.trainable)
            stats_after.insert(stats_after.end(), e.value.data(),
                               e.value.data() + e.value.numel());
    CHECK(stats_before == stats_after);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
    CHECK(std::isfinite(m.mean_loss));
    CHECK(m.confusion.size() == 3);
    long long total = 0;
    for (const auto& row : m.confusion)
        for (long long v : row) total += v;
    CHECK(total == 9);
}

TEST_CASE("callback sees every epoch in order") {
    const auto cfg = micro_config();
    const Dataset ds = micro_dataset(2, 41);
    auto model = build_model<float>(cfg, 23);
    TrainOptions topt;
    topt.epochs = 3;
    topt.batch = 2;
    std::vector<int> seen;
    train_epochs(model, ds, topt, [&](const EpochStat& s) { seen.push_back(s.epoch); });
    CHECK(seen == std::vector<int>{1, 2, 3});
}

}  // TEST_SUITE
