#pragma once

#include "kernels.hpp"

namespace glim {

constexpr double kBNMomentum = 0.1;
constexpr double kBNEps = 1e-5;
constexpr double kGRNEps = 1e-6;

// train_frozen_stats runs batch-stat normalization without touching the running
// stats; finite-difference checks need the forward pass to be side-effect free.
enum class Mode { infer, train, train_frozen_stats };

// Channel recombination. With channels laid out as m contiguous groups of c,
// input channel i (1-based) lands at output slot ((i-1) mod c)*m + ceil(i/c):
// the (m,c) grid read back transposed, so slot t of every group ends up
// adjacent across groups.
int recomb_index(int i, int m, int c);

// 0-based gather map for the same permutation: out[j] = in[perm[j]].
std::vector<int> recomb_perm(int m, int c);

template <typename T>
Tensor<T> recombine(const Tensor<T>& x, int m);
template <typename T>
Tensor<T> recombine_bwd(const Tensor<T>& gy, int m);

// Strict alternation: out[2t] = a[t], out[2t+1] = b[t].
template <typename T>
Tensor<T> mixed_concat(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
void mixed_concat_bwd(const Tensor<T>& gy, Tensor<T>* ga, Tensor<T>* gb);

template <typename T>
struct BNRefs {
    const Tensor<T>* gamma = nullptr;
    const Tensor<T>* beta = nullptr;
    Tensor<T>* running_mean = nullptr;
    Tensor<T>* running_var = nullptr;
};

template <typename T>
Tensor<T> bn_apply(const Tensor<T>& x, const BNRefs<T>& bn, Mode mode, BNCache<T>* cache);
template <typename T>
void bn_apply_bwd(const BNCache<T>& cache, const BNRefs<T>& bn, const Tensor<T>& gy, Tensor<T>* gx,
                  Tensor<T>* ggamma, Tensor<T>* gbeta);

// x + relu6(bn(grouped_dilated_dwconv(x)))
template <typename T>
struct GDBlockCache {
    Tensor<T> x;
    BNCache<T> bn;
    Tensor<T> bn_out;  // pre-activation
};

template <typename T>
Tensor<T> gdblock_forward(const Tensor<T>& x, const Tensor<T>& w, const BNRefs<T>& bn, int m,
                          const std::vector<int>& dilations, Mode mode,
                          GDBlockCache<T>* cache = nullptr);
template <typename T>
Tensor<T> gdblock_backward(const GDBlockCache<T>& cache, const Tensor<T>& w, const BNRefs<T>& bn,
                           int m, const std::vector<int>& dilations, const Tensor<T>& gy,
                           Tensor<T>* gw, Tensor<T>* ggamma, Tensor<T>* gbeta);

// recombine -> interleave with the stage input -> grouped 1x1 (groups = C/m,
// i.e. 2m inputs per group) -> bn -> relu6
template <typename T>
struct AggregatorCache {
    Tensor<T> gd_out, stage_in, mix;
    BNCache<T> bn;
    Tensor<T> bn_out;
};

template <typename T>
Tensor<T> aggregator_forward(const Tensor<T>& gd_out, const Tensor<T>& stage_in,
                             const Tensor<T>& pw_w, const BNRefs<T>& bn, int m, Mode mode,
                             AggregatorCache<T>* cache = nullptr);
template <typename T>
void aggregator_backward(const AggregatorCache<T>& cache, const Tensor<T>& pw_w,
                         const BNRefs<T>& bn, int m, const Tensor<T>& gy, Tensor<T>* g_gd_out,
                         Tensor<T>* g_stage_in, Tensor<T>* gw, Tensor<T>* ggamma, Tensor<T>* gbeta);

// 2x2 pool (skipped whenever H or W is odd, so 1x1 late stages pass through)
// followed by GRN. GRN always applies.
template <typename T>
struct DownsamplerCache {
    Dims in_dims;
    bool pooled = false;
    PoolCache pool;
    GRNCache<T> grn;
};

template <typename T>
Tensor<T> downsampler_forward(const Tensor<T>& x, PoolKind kind, const Tensor<T>& grn_gamma,
                              const Tensor<T>& grn_beta, DownsamplerCache<T>* cache = nullptr);
template <typename T>
Tensor<T> downsampler_backward(const DownsamplerCache<T>& cache, PoolKind kind,
                               const Tensor<T>& grn_gamma, const Tensor<T>& gy, Tensor<T>* ggamma,
                               Tensor<T>* gbeta);

// conv 3x3 s2 -> bn -> relu6 -> dwconv 3x3 s2 -> bn -> relu6
template <typename T>
struct StemCache {
    Tensor<T> x;
    BNCache<T> bn1, bn2;
    Tensor<T> bn1_out, act1, bn2_out;
};

template <typename T>
Tensor<T> stem_forward(const Tensor<T>& x, const Tensor<T>& conv_w, const BNRefs<T>& bn1,
                       const Tensor<T>& dw_w, const BNRefs<T>& bn2, Mode mode,
                       StemCache<T>* cache = nullptr);
template <typename T>
Tensor<T> stem_backward(const StemCache<T>& cache, const Tensor<T>& conv_w, const BNRefs<T>& bn1,
                        const Tensor<T>& dw_w, const BNRefs<T>& bn2, const Tensor<T>& gy,
                        Tensor<T>* g_conv_w, Tensor<T>* g_bn1_gamma, Tensor<T>* g_bn1_beta,
                        Tensor<T>* g_dw_w, Tensor<T>* g_bn2_gamma, Tensor<T>* g_bn2_beta);

// dwconv 3x3 s1 (same padding) -> bn, no activation
template <typename T>
struct RefinerCache {
    Tensor<T> x;
    BNCache<T> bn;
};

template <typename T>
Tensor<T> refiner_forward(const Tensor<T>& x, const Tensor<T>& dw_w, const BNRefs<T>& bn,
                          Mode mode, RefinerCache<T>* cache = nullptr);
template <typename T>
Tensor<T> refiner_backward(const RefinerCache<T>& cache, const Tensor<T>& dw_w,
                           const BNRefs<T>& bn, const Tensor<T>& gy, Tensor<T>* g_dw_w,
                           Tensor<T>* ggamma, Tensor<T>* gbeta);

// global average pool -> linear
template <typename T>
struct HeadCache {
    Dims in_dims;
    Tensor<T> pooled;
};

template <typename T>
Tensor<T> head_forward(const Tensor<T>& x, const Tensor<T>& fc_w, const Tensor<T>& fc_b,
                       HeadCache<T>* cache = nullptr);
template <typename T>
Tensor<T> head_backward(const HeadCache<T>& cache, const Tensor<T>& fc_w, const Tensor<T>& gy,
                        Tensor<T>* g_fc_w, Tensor<T>* g_fc_b);

}  // namespace glim
