#pragma once

#include <vector>

#include "tensor.hpp"

namespace glim {

// The path toggle selects between the reference loops and the restructured fast
// loops for the conv-family forwards (conv2d, dwconv2d, grouped_dilated_dwconv,
// grouped_pointwise). Elementwise/normalization ops have a single implementation
// that serves both paths. Per output element both paths accumulate taps in the
// same order, so they agree bit-for-bit; tests still budget 1e-6.
enum class KernelPath { naive, optimized };
void set_kernel_path(KernelPath p);
KernelPath kernel_path();

struct ConvSpec {
    int kh = 3, kw = 3;
    int stride = 1;
    int pad_h = 0, pad_w = 0;
    int dilation = 1;
};

// Dense conv, weights (Cout, Cin, kh, kw), no bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s);
template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,
                Tensor<T>* gx, Tensor<T>* gw);

// Depthwise conv, weights (C, 1, kh, kw).
template <typename T>
Tensor<T> dwconv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s);
template <typename T>
void dwconv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,
                  Tensor<T>* gx, Tensor<T>* gw);

// Depthwise conv where channels split into m contiguous groups of C/m and group g
// runs at dilation dilations[g] with its own "same" padding d*(k-1)/2. Stride is
// fixed at 1 and spatial size is preserved. Weights (C, 1, k, k), k odd.
template <typename T>
Tensor<T> grouped_dilated_dwconv(const Tensor<T>& x, const Tensor<T>& w, int m,
                                 const std::vector<int>& dilations);
template <typename T>
void grouped_dilated_dwconv_bwd(const Tensor<T>& x, const Tensor<T>& w, int m,
                                const std::vector<int>& dilations, const Tensor<T>& gy,
                                Tensor<T>* gx, Tensor<T>* gw);

// Grouped 1x1 conv, weights (Cout, Cin/groups, 1, 1), contiguous channel groups.
template <typename T>
Tensor<T> grouped_pointwise(const Tensor<T>& x, const Tensor<T>& w, int groups);
template <typename T>
void grouped_pointwise_bwd(const Tensor<T>& x, const Tensor<T>& w, int groups, const Tensor<T>& gy,
                           Tensor<T>* gx, Tensor<T>* gw);

template <typename T>
Tensor<T> relu6(const Tensor<T>& x);
// Needs the pre-activation input; slope taken as 0 at the kinks.
template <typename T>
Tensor<T> relu6_bwd(const Tensor<T>& x, const Tensor<T>& gy);

enum class PoolKind { max, avg };

struct PoolCache {
    std::vector<int64_t> argmax;  // flat input index per output element (max pooling)
};

// No padding; requires k <= H,W and, when k == s, H and W divisible by s.
// Max pooling resolves ties to the first element in scan order.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int k, int s, PoolCache* cache = nullptr);
template <typename T>
Tensor<T> pool2d_bwd(const Dims& xdims, PoolKind kind, int k, int s, const PoolCache& cache,
                     const Tensor<T>& gy);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_bwd(const Dims& xdims, const Tensor<T>& gy);

// Batch norm over (N,H,W) per channel. Params shaped (1,C,1,1). Normalization
// uses the biased batch variance; the running-variance update uses the unbiased
// one. running = (1-momentum)*running + momentum*batch.
template <typename T>
struct BNCache {
    Tensor<T> x;
    std::vector<T> mean, inv_std;
};

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          Tensor<T>* running_mean, Tensor<T>* running_var, T momentum, T eps,
                          BNCache<T>* cache);
template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps);
template <typename T>
void batchnorm_bwd(const BNCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& gy,
                   Tensor<T>* gx, Tensor<T>* ggamma, Tensor<T>* gbeta);

// Global response normalization, residual form:
//   G[n,c] = ||x[n,c,:,:]||_2,  N[n,c] = G / (mean_c G + eps),
//   y = gamma_c * (x * N) + beta_c + x
template <typename T>
struct GRNCache {
    Tensor<T> x;
    std::vector<T> gnorm;     // (n,c)
    std::vector<T> mean_eps;  // (n): mean_c G + eps
};

template <typename T>
Tensor<T> grn(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
              GRNCache<T>* cache = nullptr);
template <typename T>
void grn_bwd(const GRNCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& gy, Tensor<T>* gx,
             Tensor<T>* ggamma, Tensor<T>* gbeta);

// Fully connected on (n,F,1,1): w (K,F,1,1), b (1,K,1,1) -> (n,K,1,1).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
template <typename T>
void linear_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx,
                Tensor<T>* gw, Tensor<T>* gb);

// Mean cross-entropy over the batch; logits (n,K,1,1). probs out is optional.
template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                        Tensor<T>* probs = nullptr);
template <typename T>
Tensor<T> softmax_cross_entropy_bwd(const Tensor<T>& probs, const std::vector<int>& labels);

}  // namespace glim
