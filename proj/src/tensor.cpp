#include "tensor.hpp"

#include <algorithm>
#include <cmath>

namespace glim {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (!(a.dims() == b.dims()))
        fail(ErrCode::invalid_argument, "add: dims " + a.dims().str() + " vs " + b.dims().str());
    Tensor<T> out(a.dims());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] + pb[i];
    return out;
}

template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
    const Dims da = a.dims(), db = b.dims();
    if (da.n != db.n || da.h != db.h || da.w != db.w)
        fail(ErrCode::invalid_argument,
             "channel_concat: incompatible dims " + da.str() + " vs " + db.str());
    Tensor<T> out({da.n, da.c + db.c, da.h, da.w});
    const int64_t plane = da.h * da.w;
    for (int64_t n = 0; n < da.n; ++n) {
        T* dst = out.data() + n * (da.c + db.c) * plane;
        std::copy_n(a.data() + n * da.c * plane, da.c * plane, dst);
        std::copy_n(b.data() + n * db.c * plane, db.c * plane, dst + da.c * plane);
    }
    return out;
}

template <typename T>
Tensor<T> channel_permute(const Tensor<T>& x, const std::vector<int>& perm) {
    const Dims d = x.dims();
    if (static_cast<int64_t>(perm.size()) != d.c)
        fail(ErrCode::invalid_argument, "channel_permute: perm size " +
                                            std::to_string(perm.size()) + " != C " +
                                            std::to_string(d.c));
    std::vector<char> seen(perm.size(), 0);
    for (int p : perm) {
        if (p < 0 || p >= d.c || seen[p])
            fail(ErrCode::invalid_argument, "channel_permute: perm is not a bijection");
        seen[p] = 1;
    }
    Tensor<T> out(d);
    const int64_t plane = d.h * d.w;
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t c = 0; c < d.c; ++c)
            std::copy_n(x.data() + (n * d.c + perm[c]) * plane, plane,
                        out.data() + (n * d.c + c) * plane);
    return out;
}

std::vector<int> invert_perm(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return inv;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!(a.dims() == b.dims()))
        fail(ErrCode::invalid_argument,
             "max_abs_diff: dims " + a.dims().str() + " vs " + b.dims().str());
    T m = 0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

template Tensor<float> add(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> add(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> channel_concat(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> channel_concat(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> channel_permute(const Tensor<float>&, const std::vector<int>&);
template Tensor<double> channel_permute(const Tensor<double>&, const std::vector<int>&);
template float max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);

}  // namespace glim
