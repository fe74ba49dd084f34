#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace glim {

enum class ErrCode { invalid_argument = 1, io = 2, data = 3, check_failed = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrCode code() const { return code_; }

private:
    ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) { throw Error(code, msg); }

enum class DType : uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

// NCHW, row-major, W fastest.
struct Dims {
    int64_t n = 0, c = 0, h = 0, w = 0;

    int64_t numel() const { return n * c * h * w; }
    bool operator==(const Dims&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Dims d) : dims_(d) {
        check_dims(d);
        data_.assign(static_cast<size_t>(d.numel()), T(0));
    }
    Tensor(Dims d, std::vector<T> values) : dims_(d), data_(std::move(values)) {
        check_dims(d);
        if (static_cast<int64_t>(data_.size()) != d.numel())
            fail(ErrCode::invalid_argument,
                 "tensor: value count " + std::to_string(data_.size()) + " != numel of " + d.str());
    }

    static Tensor zeros(Dims d) { return Tensor(d); }

    const Dims& dims() const { return dims_; }
    int64_t numel() const { return dims_.numel(); }
    DType dtype() const { return dtype_of<T>(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        return data_[index(n, c, y, x)];
    }
    T at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        return data_[index(n, c, y, x)];
    }

    int64_t index(int64_t n, int64_t c, int64_t y, int64_t x) const {
#ifndef NDEBUG
        if (n < 0 || n >= dims_.n || c < 0 || c >= dims_.c || y < 0 || y >= dims_.h || x < 0 ||
            x >= dims_.w)
            fail(ErrCode::invalid_argument, "tensor: index out of range for " + dims_.str());
#endif
        return ((n * dims_.c + c) * dims_.h + y) * dims_.w + x;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(dims_);
        for (int64_t i = 0; i < numel(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static void check_dims(const Dims& d) {
        if (d.n <= 0 || d.c <= 0 || d.h <= 0 || d.w <= 0)
            fail(ErrCode::invalid_argument, "tensor: non-positive dims " + d.str());
    }

    Dims dims_;
    std::vector<T> data_;
};

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// Concatenate along channels; all other dims must match.
template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b);

// Gather permutation: out channel j reads in channel perm[j]. perm must be a bijection on [0,C).
template <typename T>
Tensor<T> channel_permute(const Tensor<T>& x, const std::vector<int>& perm);

std::vector<int> invert_perm(const std::vector<int>& perm);

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace glim
