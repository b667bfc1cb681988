#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdfnet {

// Dense tensor, row-major. Activations are rank-4 (N, H, W, C); conv kernels
// are rank-4 (kh, kw, cin, cout); biases are rank-1 (c).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(int n, int h, int w, int c)
        : rank_(4), dims_{n, h, w, c},
          data_(static_cast<std::size_t>(check_dim(n)) * check_dim(h) * check_dim(w) * check_dim(c)) {}

    explicit Tensor(int c) : rank_(1), dims_{c, 1, 1, 1}, data_(static_cast<std::size_t>(check_dim(c))) {}

    static Tensor zeros_like(const Tensor& other) {
        Tensor t;
        t.rank_ = other.rank_;
        t.dims_ = other.dims_;
        t.data_.assign(other.data_.size(), T(0));
        return t;
    }

    int rank() const { return rank_; }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    int n() const { return dims_[0]; }
    int h() const { return dims_[1]; }
    int w() const { return dims_[2]; }
    int c() const { return dims_[3]; }

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int n, int h, int w, int c) const {
        return ((static_cast<std::size_t>(n) * dims_[1] + h) * dims_[2] + w) * dims_[3] + c;
    }

    T& at(int n, int h, int w, int c) { return data_[index(n, h, w, c)]; }
    const T& at(int n, int h, int w, int c) const { return data_[index(n, h, w, c)]; }

    bool same_shape(const Tensor& other) const { return rank_ == other.rank_ && dims_ == other.dims_; }

    bool same_spatial(const Tensor& other) const {
        return rank_ == 4 && other.rank_ == 4 && dims_[1] == other.dims_[1] && dims_[2] == other.dims_[2];
    }

    void fill(T v) { data_.assign(data_.size(), v); }

    void add_inplace(const Tensor& other) {
        if (!same_shape(other)) {
            throw std::invalid_argument("tensor add: shape mismatch " + shape_str() + " vs " + other.shape_str());
        }
        const T* src = other.data();
        T* dst = data();
        for (std::size_t i = 0; i < data_.size(); ++i) dst[i] += src[i];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << dims_[static_cast<std::size_t>(i)];
        os << ")";
        return os.str();
    }

    // Copies image `n` into a 1 x H x W x C tensor.
    Tensor slice_batch(int n) const {
        Tensor out(1, dims_[1], dims_[2], dims_[3]);
        const std::size_t per = out.size();
        std::copy(data_.begin() + static_cast<std::ptrdiff_t>(per) * n,
                  data_.begin() + static_cast<std::ptrdiff_t>(per) * (n + 1), out.data_.begin());
        return out;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.rank_ = rank_;
        out.dims_ = dims_;
        out.data_.resize(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    template <typename U>
    friend class Tensor;

    static int check_dim(int d) {
        if (d < 1) throw std::invalid_argument("tensor dimension must be >= 1, got " + std::to_string(d));
        return d;
    }

    int rank_ = 0;
    std::array<int, 4> dims_{0, 0, 0, 0};
    std::vector<T> data_;
};

}  // namespace pdfnet
