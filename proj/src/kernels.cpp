#include "kernels.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace glim {

namespace {

KernelPath g_path = KernelPath::optimized;

int64_t out_dim(int64_t in, int k, int stride, int pad, int dil, const char* what) {
    if (k < 1 || stride < 1 || dil < 1 || pad < 0)
        fail(ErrCode::invalid_argument, std::string(what) + ": bad kernel/stride/pad/dilation");
    const int64_t eff = static_cast<int64_t>(dil) * (k - 1) + 1;
    const int64_t o = (in + 2 * pad - eff) / stride + 1;
    if (in + 2 * pad < eff || o < 1)
        fail(ErrCode::invalid_argument,
             std::string(what) + ": kernel extent " + std::to_string(eff) +
                 " exceeds padded input " + std::to_string(in + 2 * pad));
    return o;
}

// Valid tap range so that base + k*dil lands in [0, limit).
inline void tap_range(int64_t base, int dil, int k, int64_t limit, int& lo, int& hi) {
    lo = base >= 0 ? 0 : static_cast<int>((-base + dil - 1) / dil);
    const int64_t top = limit - 1 - base;
    hi = top < 0 ? -1 : static_cast<int>(std::min<int64_t>(k - 1, top / dil));
}

// One depthwise output plane, taps checked individually.
template <typename T>
void dw_plane_naive(const T* xp, int64_t H, int64_t W, const T* wp, int kh, int kw, int stride,
                    int ph, int pw, int dil, T* yp, int64_t OH, int64_t OW) {
    for (int64_t oy = 0; oy < OH; ++oy)
        for (int64_t ox = 0; ox < OW; ++ox) {
            T acc = 0;
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const int64_t iy = oy * stride - ph + static_cast<int64_t>(ky) * dil;
                    const int64_t ix = ox * stride - pw + static_cast<int64_t>(kx) * dil;
                    if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                        acc += xp[iy * W + ix] * wp[ky * kw + kx];
                }
            yp[oy * OW + ox] = acc;
        }
}

// Same computation with hoisted tap ranges and an unrolled 3x3 stride-1 interior.
template <typename T>
void dw_plane_fast(const T* xp, int64_t H, int64_t W, const T* wp, int kh, int kw, int stride,
                   int ph, int pw, int dil, T* yp, int64_t OH, int64_t OW) {
    if (kh == 3 && kw == 3 && stride == 1) {
        const T w00 = wp[0], w01 = wp[1], w02 = wp[2];
        const T w10 = wp[3], w11 = wp[4], w12 = wp[5];
        const T w20 = wp[6], w21 = wp[7], w22 = wp[8];
        for (int64_t oy = 0; oy < OH; ++oy) {
            const int64_t by = oy - ph;
            int kylo, kyhi;
            tap_range(by, dil, 3, H, kylo, kyhi);
            // ox range where all three column taps are in bounds
            const int64_t lo = std::min<int64_t>(OW, std::max<int64_t>(0, pw));
            const int64_t hi = std::max<int64_t>(lo, std::min<int64_t>(OW, W + pw - 2 * dil));
            T* yrow = yp + oy * OW;
            for (int64_t ox = 0; ox < lo; ++ox) {
                int kxlo, kxhi;
                tap_range(ox - pw, dil, 3, W, kxlo, kxhi);
                T acc = 0;
                for (int ky = kylo; ky <= kyhi; ++ky) {
                    const T* row = xp + (by + static_cast<int64_t>(ky) * dil) * W + (ox - pw);
                    const T* wr = wp + ky * 3;
                    for (int kx = kxlo; kx <= kxhi; ++kx) acc += row[kx * dil] * wr[kx];
                }
                yrow[ox] = acc;
            }
            if (kylo == 0 && kyhi == 2) {
                const T* r0 = xp + by * W - pw;
                const T* r1 = r0 + static_cast<int64_t>(dil) * W;
                const T* r2 = r1 + static_cast<int64_t>(dil) * W;
                for (int64_t ox = lo; ox < hi; ++ox) {
                    yrow[ox] = r0[ox] * w00 + r0[ox + dil] * w01 + r0[ox + 2 * dil] * w02 +
                               r1[ox] * w10 + r1[ox + dil] * w11 + r1[ox + 2 * dil] * w12 +
                               r2[ox] * w20 + r2[ox + dil] * w21 + r2[ox + 2 * dil] * w22;
                }
            } else {
                for (int64_t ox = lo; ox < hi; ++ox) {
                    T acc = 0;
                    for (int ky = kylo; ky <= kyhi; ++ky) {
                        const T* row = xp + (by + static_cast<int64_t>(ky) * dil) * W + (ox - pw);
                        const T* wr = wp + ky * 3;
                        acc += row[0] * wr[0] + row[dil] * wr[1] + row[2 * dil] * wr[2];
                    }
                    yrow[ox] = acc;
                }
            }
            for (int64_t ox = hi; ox < OW; ++ox) {
                int kxlo, kxhi;
                tap_range(ox - pw, dil, 3, W, kxlo, kxhi);
                T acc = 0;
                for (int ky = kylo; ky <= kyhi; ++ky) {
                    const T* row = xp + (by + static_cast<int64_t>(ky) * dil) * W + (ox - pw);
                    const T* wr = wp + ky * 3;
                    for (int kx = kxlo; kx <= kxhi; ++kx) acc += row[kx * dil] * wr[kx];
                }
                yrow[ox] = acc;
            }
        }
        return;
    }
    for (int64_t oy = 0; oy < OH; ++oy) {
        const int64_t by = oy * stride - ph;
        int kylo, kyhi;
        tap_range(by, dil, kh, H, kylo, kyhi);
        for (int64_t ox = 0; ox < OW; ++ox) {
            const int64_t bx = ox * stride - pw;
            int kxlo, kxhi;
            tap_range(bx, dil, kw, W, kxlo, kxhi);
            T acc = 0;
            for (int ky = kylo; ky <= kyhi; ++ky) {
                const T* row = xp + (by + static_cast<int64_t>(ky) * dil) * W + bx;
                const T* wr = wp + ky * kw;
                for (int kx = kxlo; kx <= kxhi; ++kx) acc += row[static_cast<int64_t>(kx) * dil] * wr[kx];
            }
            yp[oy * OW + ox] = acc;
        }
    }
}

template <typename T>
void check_per_channel(const Tensor<T>& p, int64_t c, const char* what) {
    const Dims d = p.dims();
    if (d.n != 1 || d.c != c || d.h != 1 || d.w != 1)
        fail(ErrCode::invalid_argument,
             std::string(what) + ": expected (1," + std::to_string(c) + ",1,1), got " + d.str());
}

}  // namespace

void set_kernel_path(KernelPath p) { g_path = p; }
KernelPath kernel_path() { return g_path; }

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s) {
    const Dims xd = x.dims(), wd = w.dims();
    if (wd.c != xd.c || wd.h != s.kh || wd.w != s.kw)
        fail(ErrCode::invalid_argument,
             "conv2d: weight dims " + wd.str() + " mismatch input " + xd.str());
    const int64_t OH = out_dim(xd.h, s.kh, s.stride, s.pad_h, s.dilation, "conv2d");
    const int64_t OW = out_dim(xd.w, s.kw, s.stride, s.pad_w, s.dilation, "conv2d");
    Tensor<T> y({xd.n, wd.n, OH, OW});
    const int64_t C = xd.c, H = xd.h, W = xd.w, Cout = wd.n;
    const T* xp = x.data();
    const T* wp = w.data();
    T* yp = y.data();
    const bool fast = g_path == KernelPath::optimized;

    parallel_for(xd.n * Cout, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const int64_t n = i / Cout, co = i % Cout;
            T* yq = yp + i * OH * OW;
            const T* xb = xp + n * C * H * W;
            const T* wb = wp + co * C * s.kh * s.kw;
            if (fast) {
                for (int64_t oy = 0; oy < OH; ++oy) {
                    const int64_t by = oy * s.stride - s.pad_h;
                    int kylo, kyhi;
                    tap_range(by, s.dilation, s.kh, H, kylo, kyhi);
                    for (int64_t ox = 0; ox < OW; ++ox) {
                        const int64_t bx = ox * s.stride - s.pad_w;
                        int kxlo, kxhi;
                        tap_range(bx, s.dilation, s.kw, W, kxlo, kxhi);
                        T acc = 0;
                        for (int64_t ci = 0; ci < C; ++ci) {
                            const T* xc = xb + ci * H * W;
                            const T* wc = wb + ci * s.kh * s.kw;
                            for (int ky = kylo; ky <= kyhi; ++ky) {
                                const T* row = xc + (by + static_cast<int64_t>(ky) * s.dilation) * W + bx;
                                const T* wr = wc + ky * s.kw;
                                for (int kx = kxlo; kx <= kxhi; ++kx)
                                    acc += row[static_cast<int64_t>(kx) * s.dilation] * wr[kx];
                            }
                        }
                        yq[oy * OW + ox] = acc;
                    }
                }
            } else {
                for (int64_t oy = 0; oy < OH; ++oy)
                    for (int64_t ox = 0; ox < OW; ++ox) {
                        T acc = 0;
                        for (int64_t ci = 0; ci < C; ++ci)
                            for (int ky = 0; ky < s.kh; ++ky)
                                for (int kx = 0; kx < s.kw; ++kx) {
                                    const int64_t iy = oy * s.stride - s.pad_h +
                                                       static_cast<int64_t>(ky) * s.dilation;
                                    const int64_t ix = ox * s.stride - s.pad_w +
                                                       static_cast<int64_t>(kx) * s.dilation;
                                    if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                        acc += xb[(ci * H + iy) * W + ix] *
                                               wb[(ci * s.kh + ky) * s.kw + kx];
                                }
                        yq[oy * OW + ox] = acc;
                    }
            }
        }
    });
    return y;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,
                Tensor<T>* gx, Tensor<T>* gw) {
    const Dims xd = x.dims(), wd = w.dims(), yd = gy.dims();
    const int64_t C = xd.c, H = xd.h, W = xd.w, Cout = wd.n, OH = yd.h, OW = yd.w;
    if (yd.n != xd.n || yd.c != Cout)
        fail(ErrCode::invalid_argument, "conv2d_bwd: upstream dims " + yd.str());
    if (gx) {
        *gx = Tensor<T>(xd);
        T* gp = gx->data();
        parallel_for(xd.n * C, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const int64_t n = i / C, ci = i % C;
                T* gq = gp + i * H * W;
                for (int64_t iy = 0; iy < H; ++iy)
                    for (int64_t ix = 0; ix < W; ++ix) {
                        T acc = 0;
                        for (int64_t co = 0; co < Cout; ++co)
                            for (int ky = 0; ky < s.kh; ++ky)
                                for (int kx = 0; kx < s.kw; ++kx) {
                                    const int64_t ty = iy + s.pad_h - static_cast<int64_t>(ky) * s.dilation;
                                    const int64_t tx = ix + s.pad_w - static_cast<int64_t>(kx) * s.dilation;
                                    if (ty < 0 || tx < 0 || ty % s.stride || tx % s.stride) continue;
                                    const int64_t oy = ty / s.stride, ox = tx / s.stride;
                                    if (oy >= OH || ox >= OW) continue;
                                    acc += w.data()[((co * C + ci) * s.kh + ky) * s.kw + kx] *
                                           gy.data()[((n * Cout + co) * OH + oy) * OW + ox];
                                }
                        gq[iy * W + ix] = acc;
                    }
            }
        });
    }
    if (gw) {
        *gw = Tensor<T>(wd);
        T* gp = gw->data();
        parallel_for(Cout, [&](int64_t lo, int64_t hi) {
            for (int64_t co = lo; co < hi; ++co)
                for (int64_t ci = 0; ci < C; ++ci)
                    for (int ky = 0; ky < s.kh; ++ky)
                        for (int kx = 0; kx < s.kw; ++kx) {
                            T acc = 0;
                            for (int64_t n = 0; n < xd.n; ++n)
                                for (int64_t oy = 0; oy < OH; ++oy)
                                    for (int64_t ox = 0; ox < OW; ++ox) {
                                        const int64_t iy = oy * s.stride - s.pad_h +
                                                           static_cast<int64_t>(ky) * s.dilation;
                                        const int64_t ix = ox * s.stride - s.pad_w +
                                                           static_cast<int64_t>(kx) * s.dilation;
                                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                        acc += x.data()[((n * C + ci) * H + iy) * W + ix] *
                                               gy.data()[((n * Cout + co) * OH + oy) * OW + ox];
                                    }
                            gp[((co * C + ci) * s.kh + ky) * s.kw + kx] = acc;
                        }
        });
    }
}

template <typename T>
Tensor<T> dwconv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s) {
    const Dims xd = x.dims(), wd = w.dims();
    if (wd.n != xd.c || wd.c != 1 || wd.h != s.kh || wd.w != s.kw)
        fail(ErrCode::invalid_argument,
             "dwconv2d: weight dims " + wd.str() + " mismatch input " + xd.str());
    const int64_t OH = out_dim(xd.h, s.kh, s.stride, s.pad_h, s.dilation, "dwconv2d");
    const int64_t OW = out_dim(xd.w, s.kw, s.stride, s.pad_w, s.dilation, "dwconv2d");
    Tensor<T> y({xd.n, xd.c, OH, OW});
    const int64_t C = xd.c, H = xd.h, W = xd.w;
    const bool fast = g_path == KernelPath::optimized;
    parallel_for(xd.n * C, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const int64_t c = i % C;
            const T* xp = x.data() + i * H * W;
            const T* wp = w.data() + c * s.kh * s.kw;
            T* yp = y.data() + i * OH * OW;
            if (fast)
                dw_plane_fast(xp, H, W, wp, s.kh, s.kw, s.stride, s.pad_h, s.pad_w, s.dilation, yp,
                              OH, OW);
            else
                dw_plane_naive(xp, H, W, wp, s.kh, s.kw, s.stride, s.pad_h, s.pad_w, s.dilation, yp,
                               OH, OW);
        }
    });
    return y;
}

namespace {

// Shared by dwconv2d_bwd and the per-group backward of grouped_dilated_dwconv.
template <typename T>
void dw_plane_bwd_x(const T* wp, const T* gyp, int64_t H, int64_t W, int kh, int kw, int stride,
                    int ph, int pw, int dil, int64_t OH, int64_t OW, T* gxp) {
    for (int64_t iy = 0; iy < H; ++iy)
        for (int64_t ix = 0; ix < W; ++ix) {
            T acc = 0;
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const int64_t ty = iy + ph - static_cast<int64_t>(ky) * dil;
                    const int64_t tx = ix + pw - static_cast<int64_t>(kx) * dil;
                    if (ty < 0 || tx < 0 || ty % stride || tx % stride) continue;
                    const int64_t oy = ty / stride, ox = tx / stride;
                    if (oy >= OH || ox >= OW) continue;
                    acc += wp[ky * kw + kx] * gyp[oy * OW + ox];
                }
            gxp[iy * W + ix] = acc;
        }
}

template <typename T>
void dw_plane_bwd_w(const T* xp, const T* gyp, int64_t H, int64_t W, int kh, int kw, int stride,
                    int ph, int pw, int dil, int64_t OH, int64_t OW, T* gwp) {
    for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
            T acc = 0;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    const int64_t iy = oy * stride - ph + static_cast<int64_t>(ky) * dil;
                    const int64_t ix = ox * stride - pw + static_cast<int64_t>(kx) * dil;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                    acc += xp[iy * W + ix] * gyp[oy * OW + ox];
                }
            gwp[ky * kw + kx] += acc;
        }
}

}  // namespace

template <typename T>
void dwconv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,
                  Tensor<T>* gx, Tensor<T>* gw) {
    const Dims xd = x.dims(), yd = gy.dims();
    const int64_t C = xd.c, H = xd.h, W = xd.w, OH = yd.h, OW = yd.w;
    if (yd.n != xd.n || yd.c != C)
        fail(ErrCode::invalid_argument, "dwconv2d_bwd: upstream dims " + yd.str());
    if (gx) {
        *gx = Tensor<T>(xd);
        parallel_for(xd.n * C, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const int64_t c = i % C;
                dw_plane_bwd_x(w.data() + c * s.kh * s.kw, gy.data() + i * OH * OW, H, W, s.kh,
                               s.kw, s.stride, s.pad_h, s.pad_w, s.dilation,
                               OH, OW, gx->data() + i * H * W);
            }
        });
    }
    if (gw) {
        *gw = Tensor<T>(w.dims());
        parallel_for(C, [&](int64_t lo, int64_t hi) {
            for (int64_t c = lo; c < hi; ++c)
                for (int64_t n = 0; n < xd.n; ++n)
                    dw_plane_bwd_w(x.data() + (n * C + c) * H * W,
                                   gy.data() + (n * C + c) * OH * OW, H, W, s.kh, s.kw, s.stride,
                                   s.pad_h, s.pad_w, s.dilation, OH, OW,
                                   gw->data() + c * s.kh * s.kw);
        });
    }
}

namespace {

template <typename T>
void check_gddw_args(const Dims& xd, const Dims& wd, int m, const std::vector<int>& dilations) {
    if (m < 1 || xd.c % m)
        fail(ErrCode::invalid_argument, "grouped_dilated_dwconv: channels " + std::to_string(xd.c) +
                                            " not divisible by m=" + std::to_string(m));
    if (static_cast<int>(dilations.size()) != m)
        fail(ErrCode::invalid_argument,
             "grouped_dilated_dwconv: dilations size != m=" + std::to_string(m));
    for (int d : dilations)
        if (d < 1) fail(ErrCode::invalid_argument, "grouped_dilated_dwconv: dilation must be >= 1");
    if (wd.n != xd.c || wd.c != 1 || wd.h != wd.w || wd.h % 2 == 0)
        fail(ErrCode::invalid_argument,
             "grouped_dilated_dwconv: weights must be (C,1,k,k) with odd k, got " + wd.str());
}

}  // namespace

template <typename T>
Tensor<T> grouped_dilated_dwconv(const Tensor<T>& x, const Tensor<T>& w, int m,
                                 const std::vector<int>& dilations) {
    const Dims xd = x.dims(), wd = w.dims();
    check_gddw_args<T>(xd, wd, m, dilations);
    const int k = static_cast<int>(wd.h);
    const int64_t cpg = xd.c / m, H = xd.h, W = xd.w;
    Tensor<T> y(xd);
    const bool fast = g_path == KernelPath::optimized;
    parallel_for(xd.n * xd.c, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const int64_t c = i % xd.c;
            const int d = dilations[static_cast<size_t>(c / cpg)];
            const int pad = d * (k - 1) / 2;
            const T* xp = x.data() + i * H * W;
            const T* wp = w.data() + c * k * k;
            T* yp = y.data() + i * H * W;
            if (fast)
                dw_plane_fast(xp, H, W, wp, k, k, 1, pad, pad, d, yp, H, W);
            else
                dw_plane_naive(xp, H, W, wp, k, k, 1, pad, pad, d, yp, H, W);
        }
    });
    return y;
}

template <typename T>
void grouped_dilated_dwconv_bwd(const Tensor<T>& x, const Tensor<T>& w, int m,
                                const std::vector<int>& dilations, const Tensor<T>& gy,
                                Tensor<T>* gx, Tensor<T>* gw) {
    const Dims xd = x.dims(), wd = w.dims();
    check_gddw_args<T>(xd, wd, m, dilations);
    if (!(gy.dims() == xd))
        fail(ErrCode::invalid_argument, "grouped_dilated_dwconv_bwd: upstream dims " +
                                            gy.dims().str() + " != " + xd.str());
    const int k = static_cast<int>(wd.h);
    const int64_t cpg = xd.c / m, H = xd.h, W = xd.w;
    if (gx) {
        *gx = Tensor<T>(xd);
        parallel_for(xd.n * xd.c, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const int64_t c = i % xd.c;
                const int d = dilations[static_cast<size_t>(c / cpg)];
                const int pad = d * (k - 1) / 2;
                dw_plane_bwd_x(w.data() + c * k * k, gy.data() + i * H * W, H, W, k, k, 1, pad, pad,
                               d, H, W, gx->data() + i * H * W);
            }
        });
    }
    if (gw) {
        *gw = Tensor<T>(wd);
        parallel_for(xd.c, [&](int64_t lo, int64_t hi) {
            for (int64_t c = lo; c < hi; ++c) {
                const int d = dilations[static_cast<size_t>(c / cpg)];
                const int pad = d * (k - 1) / 2;
                for (int64_t n = 0; n < xd.n; ++n)
                    dw_plane_bwd_w(x.data() + (n * xd.c + c) * H * W,
                                   gy.data() + (n * xd.c + c) * H * W, H, W, k, k, 1, pad, pad, d,
                                   H, W, gw->data() + c * k * k);
            }
        });
    }
}

template <typename T>
Tensor<T> grouped_pointwise(const Tensor<T>& x, const Tensor<T>& w, int groups) {
    const Dims xd = x.dims(), wd = w.dims();
    if (groups < 1 || xd.c % groups)
        fail(ErrCode::invalid_argument, "grouped_pointwise: in_channels " + std::to_string(xd.c) +
                                            " not divisible by groups=" + std::to_string(groups));
    if (wd.n % groups)
        fail(ErrCode::invalid_argument, "grouped_pointwise: out_channels " + std::to_string(wd.n) +
                                            " not divisible by groups=" + std::to_string(groups));
    const int64_t cpg_in = xd.c / groups, cpg_out = wd.n / groups;
    if (wd.c != cpg_in || wd.h != 1 || wd.w != 1)
        fail(ErrCode::invalid_argument,
             "grouped_pointwise: weight dims " + wd.str() + " mismatch groups=" +
                 std::to_string(groups) + " over input " + xd.str());
    const int64_t plane = xd.h * xd.w;
    Tensor<T> y({xd.n, wd.n, xd.h, xd.w});
    const bool fast = g_path == KernelPath::optimized;
    parallel_for(xd.n * wd.n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const int64_t n = i / wd.n, co = i % wd.n, g = co / cpg_out;
            const T* xb = x.data() + (n * xd.c + g * cpg_in) * plane;
            const T* wb = w.data() + co * cpg_in;
            T* yb = y.data() + i * plane;
            if (fast) {
                std::fill_n(yb, plane, T(0));
                for (int64_t ci = 0; ci < cpg_in; ++ci) {
                    const T wv = wb[ci];
                    const T* xr = xb + ci * plane;
                    for (int64_t p = 0; p < plane; ++p) yb[p] += wv * xr[p];
                }
            } else {
                for (int64_t p = 0; p < plane; ++p) {
                    T acc = 0;
                    for (int64_t ci = 0; ci < cpg_in; ++ci) acc += xb[ci * plane + p] * wb[ci];
                    yb[p] = acc;
                }
            }
        }
    });
    return y;
}

template <typename T>
void grouped_pointwise_bwd(const Tensor<T>& x, const Tensor<T>& w, int groups, const Tensor<T>& gy,
                           Tensor<T>* gx, Tensor<T>* gw) {
    const Dims xd = x.dims(), wd = w.dims(), yd = gy.dims();
    const int64_t cpg_in = xd.c / groups, cpg_out = wd.n / groups, plane = xd.h * xd.w;
    if (yd.n != xd.n || yd.c != wd.n || yd.h != xd.h || yd.w != xd.w)
        fail(ErrCode::invalid_argument, "grouped_pointwise_bwd: upstream dims " + yd.str());
    if (gx) {
        *gx = Tensor<T>(xd);
        parallel_for(xd.n * xd.c, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const int64_t n = i / xd.c, ci = i % xd.c, g = ci / cpg_in;
                T* gq = gx->data() + i * plane;
                for (int64_t co = g * cpg_out; co < (g + 1) * cpg_out; ++co) {
                    const T wv = w.data()[co * cpg_in + (ci - g * cpg_in)];
                    const T* gyr = gy.data() + (n * wd.n + co) * plane;
                    for (int64_t p = 0; p < plane; ++p) gq[p] += wv * gyr[p];
                }
            }
        });
    }
    if (gw) {
        *gw = Tensor<T>(wd);
        parallel_for(wd.n, [&](int64_t lo, int64_t hi) {
            for (int64_t co = lo; co < hi; ++co) {
                const int64_t g = co / cpg_out;
                for (int64_t ci = 0; ci < cpg_in; ++ci) {
                    T acc = 0;
                    for (int64_t n = 0; n < xd.n; ++n) {
                        const T* xr = x.data() + (n * xd.c + g * cpg_in + ci) * plane;
                        const T* gyr = gy.data() + (n * wd.n + co) * plane;
                        for (int64_t p = 0; p < plane; ++p) acc += xr[p] * gyr[p];
                    }
                    gw->data()[co * cpg_in + ci] = acc;
                }
            }
        });
    }
}

template <typename T>
Tensor<T> relu6(const Tensor<T>& x) {
    Tensor<T> y(x.dims());
    for (int64_t i = 0; i < x.numel(); ++i)
        y.data()[i] = std::min<T>(std::max<T>(x.data()[i], 0), 6);
    return y;
}

template <typename T>
Tensor<T> relu6_bwd(const Tensor<T>& x, const Tensor<T>& gy) {
    if (!(x.dims() == gy.dims()))
        fail(ErrCode::invalid_argument, "relu6_bwd: dims mismatch");
    Tensor<T> gx(x.dims());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const T v = x.data()[i];
        gx.data()[i] = (v > 0 && v < 6) ? gy.data()[i] : T(0);
    }
    return gx;
}

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int k, int s, PoolCache* cache) {
    const Dims xd = x.dims();
    if (k < 1 || s < 1) fail(ErrCode::invalid_argument, "pool2d: bad kernel/stride");
    if (k > xd.h || k > xd.w)
        fail(ErrCode::invalid_argument, "pool2d: window " + std::to_string(k) +
                                            " exceeds input " + xd.str());
    if (k == s && (xd.h % s || xd.w % s))
        fail(ErrCode::invalid_argument,
             "pool2d: input " + xd.str() + " not divisible by stride " + std::to_string(s));
    const int64_t OH = (xd.h - k) / s + 1, OW = (xd.w - k) / s + 1;
    Tensor<T> y({xd.n, xd.c, OH, OW});
    if (cache) cache->argmax.assign(kind == PoolKind::max ? static_cast<size_t>(y.numel()) : 0, 0);
    const int64_t H = xd.h, W = xd.w;
    parallel_for(xd.n * xd.c, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const T* xp = x.data() + i * H * W;
            T* yp = y.data() + i * OH * OW;
            for (int64_t oy = 0; oy < OH; ++oy)
                for (int64_t ox = 0; ox < OW; ++ox) {
                    if (kind == PoolKind::max) {
                        T best = xp[(oy * s) * W + ox * s];
                        int64_t arg = (oy * s) * W + ox * s;
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int64_t idx = (oy * s + ky) * W + (ox * s + kx);
                                if (xp[idx] > best) {
                                    best = xp[idx];
                                    arg = idx;
                                }
                            }
                        yp[oy * OW + ox] = best;
                        if (cache) cache->argmax[static_cast<size_t>(i * OH * OW + oy * OW + ox)] =
                            i * H * W + arg;
                    } else {
                        T acc = 0;
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                acc += xp[(oy * s + ky) * W + (ox * s + kx)];
                        yp[oy * OW + ox] = acc / static_cast<T>(k * k);
                    }
                }
        }
    });
    return y;
}

template <typename T>
Tensor<T> pool2d_bwd(const Dims& xdims, PoolKind kind, int k, int s, const PoolCache& cache,
                     const Tensor<T>& gy) {
    Tensor<T> gx(xdims);
    const Dims yd = gy.dims();
    const int64_t OH = yd.h, OW = yd.w, H = xdims.h, W = xdims.w;
    if (kind == PoolKind::max && cache.argmax.size() != static_cast<size_t>(gy.numel()))
        fail(ErrCode::invalid_argument, "pool2d_bwd: stale cache");
    parallel_for(xdims.n * xdims.c, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const T* gyp = gy.data() + i * OH * OW;
            T* gxp = gx.data();
            if (kind == PoolKind::max) {
                for (int64_t j = 0; j < OH * OW; ++j)
                    gxp[cache.argmax[static_cast<size_t>(i * OH * OW + j)]] += gyp[j];
            } else {
                const T inv = T(1) / static_cast<T>(k * k);
                for (int64_t oy = 0; oy < OH; ++oy)
                    for (int64_t ox = 0; ox < OW; ++ox)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                gxp[i * H * W + (oy * s + ky) * W + (ox * s + kx)] +=
                                    gyp[oy * OW + ox] * inv;
            }
        }
    });
    return gx;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    const Dims xd = x.dims();
    Tensor<T> y({xd.n, xd.c, 1, 1});
    const int64_t plane = xd.h * xd.w;
    for (int64_t i = 0; i < xd.n * xd.c; ++i) {
        T acc = 0;
        const T* xp = x.data() + i * plane;
        for (int64_t p = 0; p < plane; ++p) acc += xp[p];
        y.data()[i] = acc / static_cast<T>(plane);
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_bwd(const Dims& xdims, const Tensor<T>& gy) {
    Tensor<T> gx(xdims);
    const int64_t plane = xdims.h * xdims.w;
    for (int64_t i = 0; i < xdims.n * xdims.c; ++i) {
        const T v = gy.data()[i] / static_cast<T>(plane);
        T* gp = gx.data() + i * plane;
        for (int64_t p = 0; p < plane; ++p) gp[p] = v;
    }
    return gx;
}

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          Tensor<T>* running_mean, Tensor<T>* running_var, T momentum, T eps,
                          BNCache<T>* cache) {
    const Dims xd = x.dims();
    check_per_channel(gamma, xd.c, "batchnorm gamma");
    check_per_channel(beta, xd.c, "batchnorm beta");
    const int64_t N = xd.n * xd.h * xd.w;
    if (N < 2)
        fail(ErrCode::invalid_argument,
             "batchnorm_train: needs more than one value per channel, input " + xd.str());
    Tensor<T> y(xd);
    std::vector<T> mean(static_cast<size_t>(xd.c)), istd(static_cast<size_t>(xd.c));
    const int64_t plane = xd.h * xd.w;
    parallel_for(xd.c, [&](int64_t lo, int64_t hi) {
        for (int64_t c = lo; c < hi; ++c) {
            T sum = 0;
            for (int64_t n = 0; n < xd.n; ++n) {
                const T* xp = x.data() + (n * xd.c + c) * plane;
                for (int64_t p = 0; p < plane; ++p) sum += xp[p];
            }
            const T mu = sum / static_cast<T>(N);
            T ss = 0;
            for (int64_t n = 0; n < xd.n; ++n) {
                const T* xp = x.data() + (n * xd.c + c) * plane;
                for (int64_t p = 0; p < plane; ++p) {
                    const T d = xp[p] - mu;
                    ss += d * d;
                }
            }
            const T var = ss / static_cast<T>(N);
            mean[static_cast<size_t>(c)] = mu;
            istd[static_cast<size_t>(c)] = T(1) / std::sqrt(var + eps);
            if (running_mean && running_var) {
                running_mean->data()[c] = (T(1) - momentum) * running_mean->data()[c] + momentum * mu;
                running_var->data()[c] = (T(1) - momentum) * running_var->data()[c] +
                                         momentum * (ss / static_cast<T>(N - 1));
            }
            const T g = gamma.data()[c], b = beta.data()[c];
            for (int64_t n = 0; n < xd.n; ++n) {
                const T* xp = x.data() + (n * xd.c + c) * plane;
                T* yp = y.data() + (n * xd.c + c) * plane;
                for (int64_t p = 0; p < plane; ++p)
                    yp[p] = g * (xp[p] - mu) * istd[static_cast<size_t>(c)] + b;
            }
        }
    });
    if (cache) {
        cache->x = x;
        cache->mean = std::move(mean);
        cache->inv_std = std::move(istd);
    }
    return y;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps) {
    const Dims xd = x.dims();
    check_per_channel(gamma, xd.c, "batchnorm gamma");
    Tensor<T> y(xd);
    const int64_t plane = xd.h * xd.w;
    for (int64_t c = 0; c < xd.c; ++c) {
        const T istd = T(1) / std::sqrt(running_var.data()[c] + eps);
        const T g = gamma.data()[c], b = beta.data()[c], mu = running_mean.data()[c];
        for (int64_t n = 0; n < xd.n; ++n) {
            const T* xp = x.data() + (n * xd.c + c) * plane;
            T* yp = y.data() + (n * xd.c + c) * plane;
            for (int64_t p = 0; p < plane; ++p) yp[p] = g * (xp[p] - mu) * istd + b;
        }
    }
    return y;
}

template <typename T>
void batchnorm_bwd(const BNCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& gy,
                   Tensor<T>* gx, Tensor<T>* ggamma, Tensor<T>* gbeta) {
    const Dims xd = cache.x.dims();
    const int64_t N = xd.n * xd.h * xd.w, plane = xd.h * xd.w;
    if (gx) *gx = Tensor<T>(xd);
    if (ggamma) *ggamma = Tensor<T>({1, xd.c, 1, 1});
    if (gbeta) *gbeta = Tensor<T>({1, xd.c, 1, 1});
    parallel_for(xd.c, [&](int64_t lo, int64_t hi) {
        for (int64_t c = lo; c < hi; ++c) {
            const T mu = cache.mean[static_cast<size_t>(c)];
            const T istd = cache.inv_std[static_cast<size_t>(c)];
            T sum_gy = 0, sum_gy_xhat = 0;
            for (int64_t n = 0; n < xd.n; ++n) {
                const T* xp = cache.x.data() + (n * xd.c + c) * plane;
                const T* gp = gy.data() + (n * xd.c + c) * plane;
                for (int64_t p = 0; p < plane; ++p) {
                    sum_gy += gp[p];
                    sum_gy_xhat += gp[p] * (xp[p] - mu) * istd;
                }
            }
            if (ggamma) ggamma->data()[c] = sum_gy_xhat;
            if (gbeta) gbeta->data()[c] = sum_gy;
            if (gx) {
                const T g = gamma.data()[c];
                const T k1 = sum_gy / static_cast<T>(N);
                const T k2 = sum_gy_xhat / static_cast<T>(N);
                for (int64_t n = 0; n < xd.n; ++n) {
                    const T* xp = cache.x.data() + (n * xd.c + c) * plane;
                    const T* gp = gy.data() + (n * xd.c + c) * plane;
                    T* op = gx->data() + (n * xd.c + c) * plane;
                    for (int64_t p = 0; p < plane; ++p) {
                        const T xhat = (xp[p] - mu) * istd;
                        op[p] = g * istd * (gp[p] - k1 - xhat * k2);
                    }
                }
            }
        }
    });
}

template <typename T>
Tensor<T> grn(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
              GRNCache<T>* cache) {
    const Dims xd = x.dims();
    check_per_channel(gamma, xd.c, "grn gamma");
    check_per_channel(beta, xd.c, "grn beta");
    Tensor<T> y(xd);
    const int64_t plane = xd.h * xd.w;
    std::vector<T> gnorm(static_cast<size_t>(xd.n * xd.c));
    std::vector<T> mean_eps(static_cast<size_t>(xd.n));
    for (int64_t n = 0; n < xd.n; ++n) {
        T gsum = 0;
        for (int64_t c = 0; c < xd.c; ++c) {
            T ss = 0;
            const T* xp = x.data() + (n * xd.c + c) * plane;
            for (int64_t p = 0; p < plane; ++p) ss += xp[p] * xp[p];
            const T g = std::sqrt(ss);
            gnorm[static_cast<size_t>(n * xd.c + c)] = g;
            gsum += g;
        }
        const T s = gsum / static_cast<T>(xd.c) + eps;
        mean_eps[static_cast<size_t>(n)] = s;
        for (int64_t c = 0; c < xd.c; ++c) {
            const T nf = gnorm[static_cast<size_t>(n * xd.c + c)] / s;
            const T gm = gamma.data()[c], bt = beta.data()[c];
            const T* xp = x.data() + (n * xd.c + c) * plane;
            T* yp = y.data() + (n * xd.c + c) * plane;
            for (int64_t p = 0; p < plane; ++p) yp[p] = gm * (xp[p] * nf) + bt + xp[p];
        }
    }
    if (cache) {
        cache->x = x;
        cache->gnorm = std::move(gnorm);
        cache->mean_eps = std::move(mean_eps);
    }
    return y;
}

template <typename T>
void grn_bwd(const GRNCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& gy, Tensor<T>* gx,
             Tensor<T>* ggamma, Tensor<T>* gbeta) {
    const Dims xd = cache.x.dims();
    const int64_t plane = xd.h * xd.w, C = xd.c;
    if (gx) *gx = Tensor<T>(xd);
    if (ggamma) *ggamma = Tensor<T>({1, C, 1, 1});
    if (gbeta) *gbeta = Tensor<T>({1, C, 1, 1});
    for (int64_t n = 0; n < xd.n; ++n) {
        const T s = cache.mean_eps[static_cast<size_t>(n)];
        // A_c: sensitivity of the loss to N[n,c]; B: sum_c A_c * G_c
        std::vector<T> A(static_cast<size_t>(C));
        T B = 0;
        for (int64_t c = 0; c < C; ++c) {
            const T* xp = cache.x.data() + (n * C + c) * plane;
            const T* gp = gy.data() + (n * C + c) * plane;
            T dot = 0, gsum = 0;
            for (int64_t p = 0; p < plane; ++p) {
                dot += gp[p] * xp[p];
                gsum += gp[p];
            }
            const T g = cache.gnorm[static_cast<size_t>(n * C + c)];
            A[static_cast<size_t>(c)] = gamma.data()[c] * dot;
            B += A[static_cast<size_t>(c)] * g;
            if (ggamma) ggamma->data()[c] += dot * (g / s);
            if (gbeta) gbeta->data()[c] += gsum;
        }
        if (gx) {
            for (int64_t c = 0; c < C; ++c) {
                const T g = cache.gnorm[static_cast<size_t>(n * C + c)];
                const T nf = g / s;
                const T direct = gamma.data()[c] * nf + T(1);
                const T coef =
                    g > 0 ? (A[static_cast<size_t>(c)] / s - B / (static_cast<T>(C) * s * s)) / g
                          : T(0);
                const T* xp = cache.x.data() + (n * C + c) * plane;
                const T* gp = gy.data() + (n * C + c) * plane;
                T* op = gx->data() + (n * C + c) * plane;
                for (int64_t p = 0; p < plane; ++p) op[p] = gp[p] * direct + coef * xp[p];
            }
        }
    }
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Dims xd = x.dims(), wd = w.dims();
    if (xd.h != 1 || xd.w != 1)
        fail(ErrCode::invalid_argument, "linear: expected flattened input, got " + xd.str());
    if (wd.c != xd.c || wd.h != 1 || wd.w != 1)
        fail(ErrCode::invalid_argument,
             "linear: weight dims " + wd.str() + " mismatch input " + xd.str());
    check_per_channel(b, wd.n, "linear bias");
    Tensor<T> y({xd.n, wd.n, 1, 1});
    for (int64_t n = 0; n < xd.n; ++n)
        for (int64_t k = 0; k < wd.n; ++k) {
            T acc = b.data()[k];
            const T* xp = x.data() + n * xd.c;
            const T* wp = w.data() + k * xd.c;
            for (int64_t f = 0; f < xd.c; ++f) acc += xp[f] * wp[f];
            y.data()[n * wd.n + k] = acc;
        }
    return y;
}

template <typename T>
void linear_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx,
                Tensor<T>* gw, Tensor<T>* gb) {
    const Dims xd = x.dims(), wd = w.dims();
    if (gx) {
        *gx = Tensor<T>(xd);
        for (int64_t n = 0; n < xd.n; ++n)
            for (int64_t f = 0; f < xd.c; ++f) {
                T acc = 0;
                for (int64_t k = 0; k < wd.n; ++k)
                    acc += w.data()[k * xd.c + f] * gy.data()[n * wd.n + k];
                gx->data()[n * xd.c + f] = acc;
            }
    }
    if (gw) {
        *gw = Tensor<T>(wd);
        for (int64_t k = 0; k < wd.n; ++k)
            for (int64_t f = 0; f < xd.c; ++f) {
                T acc = 0;
                for (int64_t n = 0; n < xd.n; ++n)
                    acc += x.data()[n * xd.c + f] * gy.data()[n * wd.n + k];
                gw->data()[k * xd.c + f] = acc;
            }
    }
    if (gb) {
        *gb = Tensor<T>({1, wd.n, 1, 1});
        for (int64_t k = 0; k < wd.n; ++k) {
            T acc = 0;
            for (int64_t n = 0; n < xd.n; ++n) acc += gy.data()[n * wd.n + k];
            gb->data()[k] = acc;
        }
    }
}

template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>* probs) {
    const Dims d = logits.dims();
    if (d.h != 1 || d.w != 1)
        fail(ErrCode::invalid_argument, "softmax_cross_entropy: expected (n,K,1,1), got " + d.str());
    if (static_cast<int64_t>(labels.size()) != d.n)
        fail(ErrCode::invalid_argument, "softmax_cross_entropy: labels size " +
                                            std::to_string(labels.size()) + " != batch " +
                                            std::to_string(d.n));
    Tensor<T> p(d);
    T loss = 0;
    for (int64_t n = 0; n < d.n; ++n) {
        if (labels[static_cast<size_t>(n)] < 0 || labels[static_cast<size_t>(n)] >= d.c)
            fail(ErrCode::invalid_argument, "softmax_cross_entropy: label out of range at row " +
                                                std::to_string(n));
        const T* lp = logits.data() + n * d.c;
        T m = lp[0];
        for (int64_t k = 1; k < d.c; ++k) m = std::max(m, lp[k]);
        T z = 0;
        for (int64_t k = 0; k < d.c; ++k) z += std::exp(lp[k] - m);
        const T logz = std::log(z);
        for (int64_t k = 0; k < d.c; ++k)
            p.data()[n * d.c + k] = std::exp(lp[k] - m) / z;
        loss -= lp[labels[static_cast<size_t>(n)]] - m - logz;
    }
    if (probs) *probs = std::move(p);
    return loss / static_cast<T>(d.n);
}

template <typename T>
Tensor<T> softmax_cross_entropy_bwd(const Tensor<T>& probs, const std::vector<int>& labels) {
    const Dims d = probs.dims();
    Tensor<T> g(d);
    const T inv = T(1) / static_cast<T>(d.n);
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t k = 0; k < d.c; ++k)
            g.data()[n * d.c + k] =
                (probs.data()[n * d.c + k] - (labels[static_cast<size_t>(n)] == k ? T(1) : T(0))) *
                inv;
    return g;
}

#define GLIM_INSTANTIATE(T)                                                                        \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const ConvSpec&);               \
    template void conv2d_bwd(const Tensor<T>&, const Tensor<T>&, const ConvSpec&,                 \
                             const Tensor<T>&, Tensor<T>*, Tensor<T>*);                           \
    template Tensor<T> dwconv2d(const Tensor<T>&, const Tensor<T>&, const ConvSpec&);             \
    template void dwconv2d_bwd(const Tensor<T>&, const Tensor<T>&, const ConvSpec&,               \
                               const Tensor<T>&, Tensor<T>*, Tensor<T>*);                         \
    template Tensor<T> grouped_dilated_dwconv(const Tensor<T>&, const Tensor<T>&, int,            \
                                              const std::vector<int>&);                           \
    template void grouped_dilated_dwconv_bwd(const Tensor<T>&, const Tensor<T>&, int,             \
                                             const std::vector<int>&, const Tensor<T>&,           \
                                             Tensor<T>*, Tensor<T>*);                             \
    template Tensor<T> grouped_pointwise(const Tensor<T>&, const Tensor<T>&, int);                \
    template void grouped_pointwise_bwd(const Tensor<T>&, const Tensor<T>&, int,                  \
                                        const Tensor<T>&, Tensor<T>*, Tensor<T>*);                \
    template Tensor<T> relu6(const Tensor<T>&);                                                   \
    template Tensor<T> relu6_bwd(const Tensor<T>&, const Tensor<T>&);                             \
    template Tensor<T> pool2d(const Tensor<T>&, PoolKind, int, int, PoolCache*);                  \
    template Tensor<T> pool2d_bwd(const Dims&, PoolKind, int, int, const PoolCache&,              \
                                  const Tensor<T>&);                                              \
    template Tensor<T> global_avg_pool(const Tensor<T>&);                                         \
    template Tensor<T> global_avg_pool_bwd(const Dims&, const Tensor<T>&);                        \
    template Tensor<T> batchnorm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       Tensor<T>*, Tensor<T>*, T, T, BNCache<T>*);                \
    template Tensor<T> batchnorm_infer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       const Tensor<T>&, const Tensor<T>&, T);                    \
    template void batchnorm_bwd(const BNCache<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                Tensor<T>*, Tensor<T>*, Tensor<T>*);                              \
    template Tensor<T> grn(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,               \
                           GRNCache<T>*);                                                         \
    template void grn_bwd(const GRNCache<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,     \
                          Tensor<T>*, Tensor<T>*);                                                \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
    template void linear_bwd(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,    \
                             Tensor<T>*, Tensor<T>*);                                             \
    template T softmax_cross_entropy(const Tensor<T>&, const std::vector<int>&, Tensor<T>*);      \
    template Tensor<T> softmax_cross_entropy_bwd(const Tensor<T>&, const std::vector<int>&);

GLIM_INSTANTIATE(float)
GLIM_INSTANTIATE(double)
#undef GLIM_INSTANTIATE

}  // namespace glim
