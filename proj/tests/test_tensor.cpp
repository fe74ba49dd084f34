#include <algorithm>
#include <atomic>
#include <numeric>

#include "doctest.h"
#include "parallel.hpp"
#include "prng.hpp"
#include "tensor.hpp"

using namespace glim;

TEST_SUITE("tensor") {

TEST_CASE("zeros and shape") {
    TensorF t({1, 2, 2, 2});
    CHECK(t.numel() == 8);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t.data()[i] == 0.0f);
    CHECK(TensorF({1, 1, 1, 1}).data()[0] == 0.0f);
    CHECK_THROWS_AS(TensorF({0, 1, 1, 1}), Error);
    CHECK_THROWS_AS(TensorF({1, -2, 1, 1}), Error);
}

TEST_CASE("row-major indexing") {
    TensorF t({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(t.at(0, 0, 1, 0) == 3.0f);
    TensorF u({1, 2, 1, 1}, {5, 7});
    CHECK(u.at(0, 1, 0, 0) == 7.0f);
    CHECK_THROWS_AS(TensorF({1, 1, 2, 2}, {1, 2, 3}), Error);
}

TEST_CASE("value ctor keeps order and dtype tags") {
    TensorD t({2, 1, 1, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.at(1, 0, 0, 2) == 6.0);
    CHECK(t.dtype() == DType::f64);
    CHECK(TensorF({1, 1, 1, 1}).dtype() == DType::f32);
    auto f = t.cast<float>();
    CHECK(f.dtype() == DType::f32);
    CHECK(f.at(1, 0, 0, 0) == 4.0f);
}

TEST_CASE("add") {
    TensorF a({1, 2, 1, 1}, {1, 2});
    CHECK(max_abs_diff(add(a, TensorF({1, 2, 1, 1}, {0, 0})), a) == 0.0f);
    TensorF s = add(a, TensorF({1, 2, 1, 1}, {3, 4}));
    CHECK(s.at(0, 0, 0, 0) == 4.0f);
    CHECK(s.at(0, 1, 0, 0) == 6.0f);
    CHECK_THROWS_AS(add(a, TensorF({1, 3, 1, 1})), Error);
}

TEST_CASE("channel_concat") {
    TensorF a({1, 2, 1, 1}, {1, 2}), b({1, 1, 1, 1}, {3});
    TensorF c = channel_concat(a, b);
    CHECK(c.dims() == Dims{1, 3, 1, 1});
    CHECK(c.at(0, 0, 0, 0) == 1.0f);
    CHECK(c.at(0, 2, 0, 0) == 3.0f);
    TensorF d = channel_concat(TensorF({1, 2, 4, 4}), TensorF({1, 2, 4, 4}));
    CHECK(d.dims() == Dims{1, 4, 4, 4});
    CHECK_THROWS_AS(channel_concat(TensorF({1, 2, 4, 4}), TensorF({1, 2, 3, 4})), Error);
}

TEST_CASE("channel_permute is a gather; inverse undoes it") {
    TensorF x({1, 3, 1, 2}, {1, 1, 2, 2, 3, 3});
    SUBCASE("identity") {
        CHECK(max_abs_diff(channel_permute(x, {0, 1, 2}), x) == 0.0f);
    }
    SUBCASE("swap") {
        TensorF y = channel_permute(TensorF({1, 2, 1, 1}, {10, 20}), {1, 0});
        CHECK(y.at(0, 0, 0, 0) == 20.0f);
        CHECK(y.at(0, 1, 0, 0) == 10.0f);
    }
    SUBCASE("gather semantics: out[j] = in[perm[j]]") {
        TensorF y = channel_permute(x, {2, 0, 1});
        CHECK(y.at(0, 0, 0, 0) == 3.0f);
        CHECK(y.at(0, 1, 0, 0) == 1.0f);
        CHECK(y.at(0, 2, 0, 0) == 2.0f);
    }
    SUBCASE("inverse round-trip") {
        const std::vector<int> perm{2, 0, 1};
        TensorF back = channel_permute(channel_permute(x, perm), invert_perm(perm));
        CHECK(max_abs_diff(back, x) == 0.0f);
    }
    SUBCASE("non-bijections rejected") {
        CHECK_THROWS_AS(channel_permute(x, {0, 0, 1}), Error);
        CHECK_THROWS_AS(channel_permute(x, {0, 1}), Error);
        CHECK_THROWS_AS(channel_permute(x, {0, 1, 3}), Error);
    }
}

TEST_CASE("max_abs_diff") {
    TensorF a({1, 1, 1, 2}, {1, 2}), b({1, 1, 1, 2}, {1, 2.5f});
    CHECK(max_abs_diff(a, a) == 0.0f);
    CHECK(max_abs_diff(a, b) == 0.5f);
    CHECK_THROWS_AS(max_abs_diff(a, TensorF({1, 1, 2, 1})), Error);
}

TEST_CASE("splitmix64 reference vector and stream behavior") {
    SplitMix64 a(0);
    CHECK(a.next() == 0xE220A8397B1DCDAFull);
    SplitMix64 b(0), c(0);
    for (int i = 0; i < 100; ++i) CHECK(b.next() == c.next());
    // different seeds -> different first outputs over a 1k scan
    std::vector<uint64_t> firsts;
    for (uint64_t s = 0; s < 1000; ++s) firsts.push_back(SplitMix64(s).next());
    std::sort(firsts.begin(), firsts.end());
    CHECK(std::adjacent_find(firsts.begin(), firsts.end()) == firsts.end());
}

TEST_CASE("below and shuffle") {
    SplitMix64 rng(7);
    for (int i = 0; i < 200; ++i) CHECK(rng.below(13) < 13);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng.shuffle(w);
    CHECK(w != v);  // astronomically unlikely to be identity
    std::sort(w.begin(), w.end());
    CHECK(w == v);
}

TEST_CASE("parallel_for covers every index exactly once") {
    for (int threads : {1, 3, 8}) {
        set_num_threads(threads);
        std::vector<std::atomic<int>> hits(257);
        parallel_for(257, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) hits[static_cast<size_t>(i)]++;
        });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    set_num_threads(1);
    CHECK_THROWS_AS(set_num_threads(0), Error);
}

}  // TEST_SUITE
