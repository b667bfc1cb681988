#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdfnet/tensor.hpp"

namespace pdfnet {

// Thrown when an activation stops being finite; carries the layer name so
// training aborts with a usable diagnostic.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& layer, const std::string& what)
        : std::runtime_error("numeric error in layer '" + layer + "': " + what), layer_(layer) {}
    const std::string& layer() const { return layer_; }

private:
    std::string layer_;
};

enum class Act { None, Relu, Sigmoid };

namespace ops {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

template <typename T>
inline T apply_act(T v, Act act) {
    switch (act) {
        case Act::Relu: return v > T(0) ? v : T(0);
        case Act::Sigmoid: return T(1) / (T(1) + std::exp(-v));
        case Act::None: return v;
    }
    return v;
}

// Derivative of the activation expressed through its output value.
template <typename T>
inline T act_grad_from_output(T y, Act act) {
    switch (act) {
        case Act::Relu: return y > T(0) ? T(1) : T(0);
        case Act::Sigmoid: return y * (T(1) - y);
        case Act::None: return T(1);
    }
    return T(1);
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& layer) {
    // One cheap pass: |x| sums to NaN/Inf iff some entry is NaN/Inf (or the
    // magnitudes themselves have exploded, which deserves the same abort).
    double acc = 0.0;
    const T* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) acc += std::abs(static_cast<double>(p[i]));
    if (std::isfinite(acc)) return;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(p[i]))) {
            throw NumericError(layer, "non-finite value at flat index " + std::to_string(i));
        }
    }
    throw NumericError(layer, "activation magnitudes overflow");
}

namespace detail {

// Fills `patch` (rows x 9*C, row-major) with the zero-padded 3x3
// neighbourhoods of output rows [y0, y1) of image `n`.
template <typename T>
void im2col_rows(const Tensor<T>& x, int n, int y0, int y1, T* patch) {
    const int h = x.h(), w = x.w(), c = x.c();
    const std::size_t k = static_cast<std::size_t>(9) * c;
    std::memset(patch, 0, static_cast<std::size_t>(y1 - y0) * w * k * sizeof(T));
    for (int y = y0; y < y1; ++y) {
        T* row_base = patch + static_cast<std::size_t>(y - y0) * w * k;
        for (int ky = 0; ky < 3; ++ky) {
            const int yi = y + ky - 1;
            if (yi < 0 || yi >= h) continue;
            const T* src_row = x.data() + x.index(n, yi, 0, 0);
            for (int kx = 0; kx < 3; ++kx) {
                const int x_lo = std::max(0, 1 - kx);
                const int x_hi = std::min(w, w + 1 - kx);
                const std::size_t col = static_cast<std::size_t>(ky * 3 + kx) * c;
                for (int xo = x_lo; xo < x_hi; ++xo) {
                    std::memcpy(row_base + static_cast<std::size_t>(xo) * k + col,
                                src_row + static_cast<std::size_t>(xo + kx - 1) * c,
                                static_cast<std::size_t>(c) * sizeof(T));
                }
            }
        }
    }
}

inline int strip_rows(int w, int c, std::size_t elem_size) {
    // Keep the patch buffer around 8 MB.
    const std::size_t budget = std::size_t(8) << 20;
    const std::size_t per_row = static_cast<std::size_t>(w) * 9 * c * elem_size;
    return std::max<int>(1, static_cast<int>(budget / std::max<std::size_t>(per_row, 1)));
}

}  // namespace detail

// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved), with an
// optional fused activation. Kernel layout (ky, kx, cin, cout); bias (cout).
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias, Act act) {
    if (x.rank() != 4) throw std::invalid_argument("conv3x3: input must be rank 4");
    if (kernel.rank() != 4 || kernel.dim(0) != 3 || kernel.dim(1) != 3) {
        throw std::invalid_argument("conv3x3: kernel must be 3x3xCinxCout, got " + kernel.shape_str());
    }
    const int cin = kernel.dim(2), cout = kernel.dim(3);
    if (x.c() != cin) {
        throw std::invalid_argument("conv3x3: input channels " + std::to_string(x.c()) +
                                    " do not match kernel cin " + std::to_string(cin));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
        throw std::invalid_argument("conv3x3: bias shape mismatch");
    }

    const int n = x.n(), h = x.h(), w = x.w();
    Tensor<T> y(n, h, w, cout);
    const int k = 9 * cin;
    const int strip = detail::strip_rows(w, cin, sizeof(T));
    std::vector<T> patch(static_cast<std::size_t>(strip) * w * k);
    ConstMapRM<T> kmat(kernel.data(), k, cout);

    for (int img = 0; img < n; ++img) {
        for (int y0 = 0; y0 < h; y0 += strip) {
            const int y1 = std::min(h, y0 + strip);
            detail::im2col_rows(x, img, y0, y1, patch.data());
            ConstMapRM<T> pmat(patch.data(), (y1 - y0) * w, k);
            MapRM<T> ymat(y.data() + y.index(img, y0, 0, 0), (y1 - y0) * w, cout);
            ymat.noalias() = pmat * kmat;
        }
    }
    if (bias) {
        T* out = y.data();
        const T* b = bias->data();
        const std::size_t pixels = y.size() / cout;
        for (std::size_t p = 0; p < pixels; ++p) {
            T* row = out + p * cout;
            for (int c = 0; c < cout; ++c) row[c] += b[c];
        }
    }
    if (act != Act::None) {
        T* out = y.data();
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = apply_act(out[i], act);
    }
    return y;
}

template <typename T>
struct ConvGrads {
    Tensor<T> dx;       // empty when not requested
    Tensor<T> dkernel;  // (3,3,cin,cout)
    Tensor<T> dbias;    // (cout)
};

// Backward pass for conv3x3_forward. `y` is the post-activation output and
// `dy` the gradient with respect to it.
template <typename T>
ConvGrads<T> conv3x3_backward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& y,
                              const Tensor<T>& dy, Act act, bool need_dx) {
    const int cin = kernel.dim(2), cout = kernel.dim(3);
    const int n = x.n(), h = x.h(), w = x.w();
    if (!dy.same_shape(y)) throw std::invalid_argument("conv3x3 backward: dy shape mismatch");

    // Gradient at the pre-activation.
    Tensor<T> dpre = Tensor<T>::zeros_like(dy);
    {
        const T* yp = y.data();
        const T* dyp = dy.data();
        T* dp = dpre.data();
        for (std::size_t i = 0; i < dy.size(); ++i) dp[i] = dyp[i] * act_grad_from_output(yp[i], act);
    }

    ConvGrads<T> g;
    g.dkernel = Tensor<T>(3, 3, cin, cout);
    g.dkernel.fill(T(0));
    g.dbias = Tensor<T>(cout);
    g.dbias.fill(T(0));

    const int k = 9 * cin;
    const int strip = detail::strip_rows(w, cin, sizeof(T));
    std::vector<T> patch(static_cast<std::size_t>(strip) * w * k);
    MapRM<T> dkmat(g.dkernel.data(), k, cout);

    for (int img = 0; img < n; ++img) {
        for (int y0 = 0; y0 < h; y0 += strip) {
            const int y1 = std::min(h, y0 + strip);
            detail::im2col_rows(x, img, y0, y1, patch.data());
            ConstMapRM<T> pmat(patch.data(), (y1 - y0) * w, k);
            ConstMapRM<T> dymat(dpre.data() + dpre.index(img, y0, 0, 0), (y1 - y0) * w, cout);
            dkmat.noalias() += pmat.transpose() * dymat;
        }
    }
    {
        ConstMapRM<T> dymat(dpre.data(), static_cast<Eigen::Index>(dpre.size() / cout), cout);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbv(g.dbias.data(), cout);
        dbv.noalias() = dymat.colwise().sum().transpose();
    }

    if (need_dx) {
        // dx is a conv of dpre with the spatially flipped, channel-transposed
        // kernel (valid for stride 1 / pad 1).
        Tensor<T> flipped(3, 3, cout, cin);
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                for (int ci = 0; ci < cin; ++ci)
                    for (int co = 0; co < cout; ++co)
                        flipped.at(ky, kx, co, ci) = kernel.at(2 - ky, 2 - kx, ci, co);
        g.dx = conv3x3_forward<T>(dpre, flipped, nullptr, Act::None);
    }
    return g;
}

// 2x2 max pooling with stride 2. Requires even spatial dims.
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x) {
    if (x.rank() != 4) throw std::invalid_argument("maxpool2: input must be rank 4");
    if (x.h() % 2 != 0 || x.w() % 2 != 0) {
        throw std::invalid_argument("maxpool2: spatial size " + x.shape_str() + " not divisible by 2");
    }
    const int n = x.n(), h = x.h() / 2, w = x.w() / 2, c = x.c();
    Tensor<T> y(n, h, w, c);
    for (int img = 0; img < n; ++img) {
        for (int yo = 0; yo < h; ++yo) {
            const T* r0 = x.data() + x.index(img, 2 * yo, 0, 0);
            const T* r1 = x.data() + x.index(img, 2 * yo + 1, 0, 0);
            T* out = y.data() + y.index(img, yo, 0, 0);
            for (int xo = 0; xo < w; ++xo) {
                const T* a = r0 + static_cast<std::size_t>(2 * xo) * c;
                const T* b = r1 + static_cast<std::size_t>(2 * xo) * c;
                T* o = out + static_cast<std::size_t>(xo) * c;
                for (int ch = 0; ch < c; ++ch) {
                    o[ch] = std::max(std::max(a[ch], a[c + ch]), std::max(b[ch], b[c + ch]));
                }
            }
        }
    }
    return y;
}

// Routes each output gradient to the first-in-scan-order argmax of its window.
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    const int n = x.n(), h = x.h() / 2, w = x.w() / 2, c = x.c();
    if (dy.n() != n || dy.h() != h || dy.w() != w || dy.c() != c) {
        throw std::invalid_argument("maxpool2 backward: dy shape mismatch");
    }
    Tensor<T> dx = Tensor<T>::zeros_like(x);
    for (int img = 0; img < n; ++img) {
        for (int yo = 0; yo < h; ++yo) {
            for (int xo = 0; xo < w; ++xo) {
                for (int ch = 0; ch < c; ++ch) {
                    int by = 2 * yo, bx = 2 * xo;
                    T best = x.at(img, by, bx, ch);
                    int wy = by, wx = bx;
                    for (int dyy = 0; dyy < 2; ++dyy) {
                        for (int dxx = 0; dxx < 2; ++dxx) {
                            const T v = x.at(img, by + dyy, bx + dxx, ch);
                            if (v > best) {
                                best = v;
                                wy = by + dyy;
                                wx = bx + dxx;
                            }
                        }
                    }
                    dx.at(img, wy, wx, ch) += dy.at(img, yo, xo, ch);
                }
            }
        }
    }
    return dx;
}

namespace detail {

// Source indices and blend weight for each output coordinate, half-pixel
// centres convention: src = (dst + 0.5) / scale - 0.5, edges clamped.
template <typename T>
struct AxisTable {
    std::vector<int> lo, hi;
    std::vector<T> frac;
};

template <typename T>
AxisTable<T> upsample_axis(int in, int factor) {
    AxisTable<T> t;
    const int out = in * factor;
    t.lo.resize(out);
    t.hi.resize(out);
    t.frac.resize(out);
    for (int i = 0; i < out; ++i) {
        const double src = (i + 0.5) / factor - 0.5;
        double fl = std::floor(src);
        int lo = static_cast<int>(fl);
        double frac = src - fl;
        if (lo < 0) {
            lo = 0;
            frac = 0.0;
        }
        int hi = lo + 1;
        if (hi > in - 1) {
            hi = in - 1;
            lo = in - 1;
            frac = 0.0;
        }
        t.lo[i] = lo;
        t.hi[i] = hi;
        t.frac[i] = static_cast<T>(frac);
    }
    return t;
}

}  // namespace detail

// Bilinear up-sampling by an integer power-of-two factor.
template <typename T>
Tensor<T> upsample_bilinear_forward(const Tensor<T>& x, int factor) {
    if (factor < 1 || (factor & (factor - 1)) != 0 || factor > 16) {
        throw std::invalid_argument("upsample: factor must be in {1,2,4,8,16}, got " + std::to_string(factor));
    }
    if (x.rank() != 4) throw std::invalid_argument("upsample: input must be rank 4");
    if (factor == 1) return x;

    const int n = x.n(), hi = x.h(), wi = x.w(), c = x.c();
    const auto ty = detail::upsample_axis<T>(hi, factor);
    const auto tx = detail::upsample_axis<T>(wi, factor);
    Tensor<T> y(n, hi * factor, wi * factor, c);
    std::vector<T> top(static_cast<std::size_t>(c)), bot(static_cast<std::size_t>(c));
    for (int img = 0; img < n; ++img) {
        for (int yo = 0; yo < hi * factor; ++yo) {
            const T fy = ty.frac[yo];
            const T* row_lo = x.data() + x.index(img, ty.lo[yo], 0, 0);
            const T* row_hi = x.data() + x.index(img, ty.hi[yo], 0, 0);
            T* out_row = y.data() + y.index(img, yo, 0, 0);
            for (int xo = 0; xo < wi * factor; ++xo) {
                const T fx = tx.frac[xo];
                const T* a = row_lo + static_cast<std::size_t>(tx.lo[xo]) * c;
                const T* b = row_lo + static_cast<std::size_t>(tx.hi[xo]) * c;
                const T* d = row_hi + static_cast<std::size_t>(tx.lo[xo]) * c;
                const T* e = row_hi + static_cast<std::size_t>(tx.hi[xo]) * c;
                T* o = out_row + static_cast<std::size_t>(xo) * c;
                for (int ch = 0; ch < c; ++ch) {
                    const T t0 = a[ch] + fx * (b[ch] - a[ch]);
                    const T t1 = d[ch] + fx * (e[ch] - d[ch]);
                    o[ch] = t0 + fy * (t1 - t0);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample_bilinear_backward(int in_h, int in_w, const Tensor<T>& dy, int factor) {
    if (factor == 1) return dy;
    const int n = dy.n(), c = dy.c();
    if (dy.h() != in_h * factor || dy.w() != in_w * factor) {
        throw std::invalid_argument("upsample backward: dy shape mismatch");
    }
    const auto ty = detail::upsample_axis<T>(in_h, factor);
    const auto tx = detail::upsample_axis<T>(in_w, factor);
    Tensor<T> dx(n, in_h, in_w, c);
    dx.fill(T(0));
    for (int img = 0; img < n; ++img) {
        for (int yo = 0; yo < dy.h(); ++yo) {
            const T fy = ty.frac[yo];
            T* row_lo = dx.data() + dx.index(img, ty.lo[yo], 0, 0);
            T* row_hi = dx.data() + dx.index(img, ty.hi[yo], 0, 0);
            const T* g_row = dy.data() + dy.index(img, yo, 0, 0);
            for (int xo = 0; xo < dy.w(); ++xo) {
                const T fx = tx.frac[xo];
                T* a = row_lo + static_cast<std::size_t>(tx.lo[xo]) * c;
                T* b = row_lo + static_cast<std::size_t>(tx.hi[xo]) * c;
                T* d = row_hi + static_cast<std::size_t>(tx.lo[xo]) * c;
                T* e = row_hi + static_cast<std::size_t>(tx.hi[xo]) * c;
                const T* g = g_row + static_cast<std::size_t>(xo) * c;
                const T w00 = (T(1) - fy) * (T(1) - fx);
                const T w01 = (T(1) - fy) * fx;
                const T w10 = fy * (T(1) - fx);
                const T w11 = fy * fx;
                for (int ch = 0; ch < c; ++ch) {
                    a[ch] += w00 * g[ch];
                    b[ch] += w01 * g[ch];
                    d[ch] += w10 * g[ch];
                    e[ch] += w11 * g[ch];
                }
            }
        }
    }
    return dx;
}

// Channel concatenation in the given order. All inputs must share (N, H, W).
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    const Tensor<T>& first = *xs.front();
    int total_c = 0;
    for (const Tensor<T>* x : xs) {
        if (x->rank() != 4) throw std::invalid_argument("concat: inputs must be rank 4");
        if (x->n() != first.n() || !x->same_spatial(first)) {
            throw std::invalid_argument("concat: spatial mismatch " + first.shape_str() + " vs " + x->shape_str());
        }
        total_c += x->c();
    }
    Tensor<T> y(first.n(), first.h(), first.w(), total_c);
    const std::size_t pixels = static_cast<std::size_t>(first.n()) * first.h() * first.w();
    std::size_t offset = 0;
    for (const Tensor<T>* x : xs) {
        const int c = x->c();
        for (std::size_t p = 0; p < pixels; ++p) {
            std::memcpy(y.data() + p * total_c + offset, x->data() + p * c, static_cast<std::size_t>(c) * sizeof(T));
        }
        offset += static_cast<std::size_t>(c);
    }
    return y;
}

// Scatters the gradient of a concatenation back onto per-input gradients
// (accumulating, so buffers must be pre-zeroed or already hold partial grads).
template <typename T>
void concat_channels_backward(const Tensor<T>& dy, const std::vector<Tensor<T>*>& dxs) {
    const int total_c = dy.c();
    const std::size_t pixels = static_cast<std::size_t>(dy.n()) * dy.h() * dy.w();
    std::size_t offset = 0;
    for (Tensor<T>* dx : dxs) {
        const int c = dx->c();
        for (std::size_t p = 0; p < pixels; ++p) {
            const T* src = dy.data() + p * total_c + offset;
            T* dst = dx->data() + p * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
        offset += static_cast<std::size_t>(c);
    }
}

}  // namespace ops
}  // namespace pdfnet
