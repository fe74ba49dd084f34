#include "blocks.hpp"

namespace glim {

int recomb_index(int i, int m, int c) {
    if (m < 1 || c < 1 || i < 1 || i > m * c)
        fail(ErrCode::invalid_argument, "recomb_index: need 1 <= i <= m*c");
    return ((i - 1) % c) * m + (i + c - 1) / c;
}

std::vector<int> recomb_perm(int m, int c) {
    if (m < 1 || c < 1) fail(ErrCode::invalid_argument, "recomb_perm: need m,c >= 1");
    std::vector<int> perm(static_cast<size_t>(m) * c);
    for (int i = 1; i <= m * c; ++i) perm[recomb_index(i, m, c) - 1] = i - 1;
    return perm;
}

template <typename T>
Tensor<T> recombine(const Tensor<T>& x, int m) {
    const int64_t C = x.dims().c;
    if (m < 1 || C % m)
        fail(ErrCode::invalid_argument, "recombine: channels " + std::to_string(C) +
                                            " not divisible by m=" + std::to_string(m));
    return channel_permute(x, recomb_perm(m, static_cast<int>(C / m)));
}

template <typename T>
Tensor<T> recombine_bwd(const Tensor<T>& gy, int m) {
    const int64_t C = gy.dims().c;
    return channel_permute(gy, invert_perm(recomb_perm(m, static_cast<int>(C / m))));
}

template <typename T>
Tensor<T> mixed_concat(const Tensor<T>& a, const Tensor<T>& b) {
    const Dims da = a.dims(), db = b.dims();
    if (!(da == db))
        fail(ErrCode::invalid_argument,
             "mixed_concat: dims " + da.str() + " vs " + db.str());
    Tensor<T> out({da.n, 2 * da.c, da.h, da.w});
    const int64_t plane = da.h * da.w;
    for (int64_t n = 0; n < da.n; ++n)
        for (int64_t c = 0; c < da.c; ++c) {
            std::copy_n(a.data() + (n * da.c + c) * plane, plane,
                        out.data() + (n * 2 * da.c + 2 * c) * plane);
            std::copy_n(b.data() + (n * da.c + c) * plane, plane,
                        out.data() + (n * 2 * da.c + 2 * c + 1) * plane);
        }
    return out;
}

template <typename T>
void mixed_concat_bwd(const Tensor<T>& gy, Tensor<T>* ga, Tensor<T>* gb) {
    const Dims d = gy.dims();
    if (d.c % 2) fail(ErrCode::invalid_argument, "mixed_concat_bwd: odd channel count");
    const Dims half{d.n, d.c / 2, d.h, d.w};
    const int64_t plane = d.h * d.w;
    if (ga) *ga = Tensor<T>(half);
    if (gb) *gb = Tensor<T>(half);
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t c = 0; c < half.c; ++c) {
            if (ga)
                std::copy_n(gy.data() + (n * d.c + 2 * c) * plane, plane,
                            ga->data() + (n * half.c + c) * plane);
            if (gb)
                std::copy_n(gy.data() + (n * d.c + 2 * c + 1) * plane, plane,
                            gb->data() + (n * half.c + c) * plane);
        }
}

template <typename T>
Tensor<T> bn_apply(const Tensor<T>& x, const BNRefs<T>& bn, Mode mode, BNCache<T>* cache) {
    if (mode == Mode::infer)
        return batchnorm_infer(x, *bn.gamma, *bn.beta, *bn.running_mean, *bn.running_var,
                               static_cast<T>(kBNEps));
    const bool update = mode == Mode::train;
    return batchnorm_train(x, *bn.gamma, *bn.beta, update ? bn.running_mean : nullptr,
                           update ? bn.running_var : nullptr, static_cast<T>(kBNMomentum),
                           static_cast<T>(kBNEps), cache);
}

template <typename T>
void bn_apply_bwd(const BNCache<T>& cache, const BNRefs<T>& bn, const Tensor<T>& gy, Tensor<T>* gx,
                  Tensor<T>* ggamma, Tensor<T>* gbeta) {
    batchnorm_bwd(cache, *bn.gamma, gy, gx, ggamma, gbeta);
}

template <typename T>
Tensor<T> gdblock_forward(const Tensor<T>& x, const Tensor<T>& w, const BNRefs<T>& bn, int m,
                          const std::vector<int>& dilations, Mode mode, GDBlockCache<T>* cache) {
    Tensor<T> conv = grouped_dilated_dwconv(x, w, m, dilations);
    Tensor<T> bno = bn_apply(conv, bn, mode, cache ? &cache->bn : nullptr);
    Tensor<T> act = relu6(bno);
    if (cache) {
        cache->x = x;
        cache->bn_out = std::move(bno);
    }
    return add(x, act);
}

template <typename T>
Tensor<T> gdblock_backward(const GDBlockCache<T>& cache, const Tensor<T>& w, const BNRefs<T>& bn,
                           int m, const std::vector<int>& dilations, const Tensor<T>& gy,
                           Tensor<T>* gw, Tensor<T>* ggamma, Tensor<T>* gbeta) {
    Tensor<T> g_bno = relu6_bwd(cache.bn_out, gy);
    Tensor<T> g_conv;
    bn_apply_bwd(cache.bn, bn, g_bno, &g_conv, ggamma, gbeta);
    Tensor<T> gx;
    grouped_dilated_dwconv_bwd(cache.x, w, m, dilations, g_conv, &gx, gw);
    return add(gx, gy);  // residual path
}

template <typename T>
Tensor<T> aggregator_forward(const Tensor<T>& gd_out, const Tensor<T>& stage_in,
                             const Tensor<T>& pw_w, const BNRefs<T>& bn, int m, Mode mode,
                             AggregatorCache<T>* cache) {
    const int64_t C = gd_out.dims().c;
    if (m < 1 || C % m)
        fail(ErrCode::invalid_argument, "aggregator: channels " + std::to_string(C) +
                                            " not divisible by m=" + std::to_string(m));
    const int groups = static_cast<int>(C / m);
    Tensor<T> rec = recombine(gd_out, m);
    Tensor<T> mix = mixed_concat(rec, stage_in);
    Tensor<T> pw = grouped_pointwise(mix, pw_w, groups);
    Tensor<T> bno = bn_apply(pw, bn, mode, cache ? &cache->bn : nullptr);
    Tensor<T> act = relu6(bno);
    if (cache) {
        cache->gd_out = gd_out;
        cache->stage_in = stage_in;
        cache->mix = std::move(mix);
        cache->bn_out = std::move(bno);
    }
    return act;
}

template <typename T>
void aggregator_backward(const AggregatorCache<T>& cache, const Tensor<T>& pw_w,
                         const BNRefs<T>& bn, int m, const Tensor<T>& gy, Tensor<T>* g_gd_out,
                         Tensor<T>* g_stage_in, Tensor<T>* gw, Tensor<T>* ggamma,
                         Tensor<T>* gbeta) {
    const int groups = static_cast<int>(cache.gd_out.dims().c / m);
    Tensor<T> g_bno = relu6_bwd(cache.bn_out, gy);
    Tensor<T> g_pw;
    bn_apply_bwd(cache.bn, bn, g_bno, &g_pw, ggamma, gbeta);
    Tensor<T> g_mix;
    grouped_pointwise_bwd(cache.mix, pw_w, groups, g_pw, &g_mix, gw);
    Tensor<T> g_rec;
    mixed_concat_bwd(g_mix, g_gd_out ? &g_rec : nullptr, g_stage_in);
    if (g_gd_out) *g_gd_out = recombine_bwd(g_rec, m);
}

template <typename T>
Tensor<T> downsampler_forward(const Tensor<T>& x, PoolKind kind, const Tensor<T>& grn_gamma,
                              const Tensor<T>& grn_beta, DownsamplerCache<T>* cache) {
    const Dims d = x.dims();
    const bool do_pool = d.h % 2 == 0 && d.w % 2 == 0;
    if (cache) {
        cache->in_dims = d;
        cache->pooled = do_pool;
    }
    if (do_pool) {
        Tensor<T> p = pool2d(x, kind, 2, 2, cache ? &cache->pool : nullptr);
        return grn(p, grn_gamma, grn_beta, static_cast<T>(kGRNEps), cache ? &cache->grn : nullptr);
    }
    return grn(x, grn_gamma, grn_beta, static_cast<T>(kGRNEps), cache ? &cache->grn : nullptr);
}

template <typename T>
Tensor<T> downsampler_backward(const DownsamplerCache<T>& cache, PoolKind kind,
                               const Tensor<T>& grn_gamma, const Tensor<T>& gy, Tensor<T>* ggamma,
                               Tensor<T>* gbeta) {
    Tensor<T> g_pool;
    grn_bwd(cache.grn, grn_gamma, gy, &g_pool, ggamma, gbeta);
    if (!cache.pooled) return g_pool;
    return pool2d_bwd(cache.in_dims, kind, 2, 2, cache.pool, g_pool);
}

template <typename T>
Tensor<T> stem_forward(const Tensor<T>& x, const Tensor<T>& conv_w, const BNRefs<T>& bn1,
                       const Tensor<T>& dw_w, const BNRefs<T>& bn2, Mode mode,
                       StemCache<T>* cache) {
    ConvSpec s;
    s.stride = 2;
    s.pad_h = s.pad_w = 1;
    Tensor<T> c1 = conv2d(x, conv_w, s);
    Tensor<T> b1 = bn_apply(c1, bn1, mode, cache ? &cache->bn1 : nullptr);
    Tensor<T> a1 = relu6(b1);
    Tensor<T> c2 = dwconv2d(a1, dw_w, s);
    Tensor<T> b2 = bn_apply(c2, bn2, mode, cache ? &cache->bn2 : nullptr);
    Tensor<T> a2 = relu6(b2);
    if (cache) {
        cache->x = x;
        cache->bn1_out = std::move(b1);
        cache->act1 = std::move(a1);
        cache->bn2_out = std::move(b2);
    }
    return a2;
}

template <typename T>
Tensor<T> stem_backward(const StemCache<T>& cache, const Tensor<T>& conv_w, const BNRefs<T>& bn1,
                        const Tensor<T>& dw_w, const BNRefs<T>& bn2, const Tensor<T>& gy,
                        Tensor<T>* g_conv_w, Tensor<T>* g_bn1_gamma, Tensor<T>* g_bn1_beta,
                        Tensor<T>* g_dw_w, Tensor<T>* g_bn2_gamma, Tensor<T>* g_bn2_beta) {
    ConvSpec s;
    s.stride = 2;
    s.pad_h = s.pad_w = 1;
    Tensor<T> g_b2 = relu6_bwd(cache.bn2_out, gy);
    Tensor<T> g_c2;
    bn_apply_bwd(cache.bn2, bn2, g_b2, &g_c2, g_bn2_gamma, g_bn2_beta);
    Tensor<T> g_a1;
    dwconv2d_bwd(cache.act1, dw_w, s, g_c2, &g_a1, g_dw_w);
    Tensor<T> g_b1 = relu6_bwd(cache.bn1_out, g_a1);
    Tensor<T> g_c1;
    bn_apply_bwd(cache.bn1, bn1, g_b1, &g_c1, g_bn1_gamma, g_bn1_beta);
    Tensor<T> gx;
    conv2d_bwd(cache.x, conv_w, s, g_c1, &gx, g_conv_w);
    return gx;
}

template <typename T>
Tensor<T> refiner_forward(const Tensor<T>& x, const Tensor<T>& dw_w, const BNRefs<T>& bn,
                          Mode mode, RefinerCache<T>* cache) {
    ConvSpec s;
    s.pad_h = s.pad_w = 1;
    Tensor<T> c = dwconv2d(x, dw_w, s);
    if (cache) cache->x = x;
    return bn_apply(c, bn, mode, cache ? &cache->bn : nullptr);
}

template <typename T>
Tensor<T> refiner_backward(const RefinerCache<T>& cache, const Tensor<T>& dw_w,
                           const BNRefs<T>& bn, const Tensor<T>& gy, Tensor<T>* g_dw_w,
                           Tensor<T>* ggamma, Tensor<T>* gbeta) {
    ConvSpec s;
    s.pad_h = s.pad_w = 1;
    Tensor<T> g_c;
    bn_apply_bwd(cache.bn, bn, gy, &g_c, ggamma, gbeta);
    Tensor<T> gx;
    dwconv2d_bwd(cache.x, dw_w, s, g_c, &gx, g_dw_w);
    return gx;
}

template <typename T>
Tensor<T> head_forward(const Tensor<T>& x, const Tensor<T>& fc_w, const Tensor<T>& fc_b,
                       HeadCache<T>* cache) {
    Tensor<T> pooled = global_avg_pool(x);
    if (cache) {
        cache->in_dims = x.dims();
        cache->pooled = pooled;
    }
    return linear(pooled, fc_w, fc_b);
}

template <typename T>
Tensor<T> head_backward(const HeadCache<T>& cache, const Tensor<T>& fc_w, const Tensor<T>& gy,
                        Tensor<T>* g_fc_w, Tensor<T>* g_fc_b) {
    Tensor<T> g_pooled;
    linear_bwd(cache.pooled, fc_w, gy, &g_pooled, g_fc_w, g_fc_b);
    return global_avg_pool_bwd(cache.in_dims, g_pooled);
}

#define GLIM_INSTANTIATE(T)                                                                        \
    template Tensor<T> recombine(const Tensor<T>&, int);                                          \
    template Tensor<T> recombine_bwd(const Tensor<T>&, int);                                      \
    template Tensor<T> mixed_concat(const Tensor<T>&, const Tensor<T>&);                          \
    template void mixed_concat_bwd(const Tensor<T>&, Tensor<T>*, Tensor<T>*);                     \
    template Tensor<T> bn_apply(const Tensor<T>&, const BNRefs<T>&, Mode, BNCache<T>*);           \
    template void bn_apply_bwd(const BNCache<T>&, const BNRefs<T>&, const Tensor<T>&,             \
                               Tensor<T>*, Tensor<T>*, Tensor<T>*);                               \
    template Tensor<T> gdblock_forward(const Tensor<T>&, const Tensor<T>&, const BNRefs<T>&, int, \
                                       const std::vector<int>&, Mode, GDBlockCache<T>*);          \
    template Tensor<T> gdblock_backward(const GDBlockCache<T>&, const Tensor<T>&,                 \
                                        const BNRefs<T>&, int, const std::vector<int>&,           \
                                        const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);    \
    template Tensor<T> aggregator_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                          const BNRefs<T>&, int, Mode, AggregatorCache<T>*);      \
    template void aggregator_backward(const AggregatorCache<T>&, const Tensor<T>&,                \
                                      const BNRefs<T>&, int, const Tensor<T>&, Tensor<T>*,        \
                                      Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*);            \
    template Tensor<T> downsampler_forward(const Tensor<T>&, PoolKind, const Tensor<T>&,          \
                                           const Tensor<T>&, DownsamplerCache<T>*);               \
    template Tensor<T> downsampler_backward(const DownsamplerCache<T>&, PoolKind,                 \
                                            const Tensor<T>&, const Tensor<T>&, Tensor<T>*,       \
                                            Tensor<T>*);                                          \
    template Tensor<T> stem_forward(const Tensor<T>&, const Tensor<T>&, const BNRefs<T>&,         \
                                    const Tensor<T>&, const BNRefs<T>&, Mode, StemCache<T>*);     \
    template Tensor<T> stem_backward(const StemCache<T>&, const Tensor<T>&, const BNRefs<T>&,     \
                                     const Tensor<T>&, const BNRefs<T>&, const Tensor<T>&,        \
                                     Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*,  \
                                     Tensor<T>*);                                                 \
    template Tensor<T> refiner_forward(const Tensor<T>&, const Tensor<T>&, const BNRefs<T>&,      \
                                       Mode, RefinerCache<T>*);                                   \
    template Tensor<T> refiner_backward(const RefinerCache<T>&, const Tensor<T>&,                 \
                                        const BNRefs<T>&, const Tensor<T>&, Tensor<T>*,           \
                                        Tensor<T>*, Tensor<T>*);                                  \
    template Tensor<T> head_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                    HeadCache<T>*);                                               \
    template Tensor<T> head_backward(const HeadCache<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                     Tensor<T>*, Tensor<T>*);

GLIM_INSTANTIATE(float)
GLIM_INSTANTIATE(double)
#undef GLIM_INSTANTIATE

}  // namespace glim
