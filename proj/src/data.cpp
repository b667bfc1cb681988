#include "pdfnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <stdexcept>

#include "pdfnet/image_io.hpp"
#include "pdfnet/rng.hpp"

namespace fs = std::filesystem;

namespace pdfnet::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_sample(const Sample& s, const char* ctx) {
    if (s.image.rank() != 4 || s.image.n() != 1 || s.image.c() != 3) {
        throw std::invalid_argument(std::string(ctx) + ": image must be 1xHxWx3");
    }
    if (s.mask.rank() != 4 || s.mask.n() != 1 || s.mask.c() != 1 || !s.mask.same_spatial(s.image)) {
        throw std::invalid_argument(std::string(ctx) + ": mask must be 1xHxWx1 matching the image");
    }
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

Tensor<float> image_to_tensor(const img::Image8& im) {
    const img::Image8 rgb = img::to_rgb(im);
    Tensor<float> t(1, rgb.h, rgb.w, 3);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rgb.pixels[i] / 255.0f;
    return t;
}

Tensor<float> mask_to_tensor(const img::Image8& im) {
    const img::Image8 gray = img::to_gray(im);
    Tensor<float> t(1, gray.h, gray.w, 1);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = gray.pixels[i] >= 128 ? 1.0f : 0.0f;
    return t;
}

}  // namespace

void AugmentationSpec::validate() const {
    for (int r : rotations) {
        if (r != 90 && r != 180 && r != 270) {
            throw std::invalid_argument("augmentation rotations must be 90, 180 or 270 degrees");
        }
    }
}

std::vector<Sample> load_dataset(const std::string& root, const std::string& split) {
    const fs::path images_dir = fs::path(root) / split / "images";
    const fs::path gt_dir = fs::path(root) / split / "GT";
    if (!fs::is_directory(images_dir)) {
        throw std::runtime_error("missing image directory '" + images_dir.string() + "'");
    }
    if (!fs::is_directory(gt_dir)) {
        throw std::runtime_error("missing GT directory '" + gt_dir.string() + "'");
    }

    std::map<std::string, fs::path> images, masks;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower(entry.path().extension().string());
        if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
        const std::string stem = entry.path().stem().string();
        if (!images.emplace(stem, entry.path()).second) {
            std::cerr << "warning: duplicate image stem '" << stem << "', keeping the first\n";
        }
    }
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".png") {
            masks[entry.path().stem().string()] = entry.path();
        }
    }

    std::vector<Sample> samples;
    for (const auto& [stem, path] : images) {
        const auto it = masks.find(stem);
        if (it == masks.end()) {
            std::cerr << "warning: image '" << path.filename().string() << "' has no GT mask, skipping\n";
            continue;
        }
        Sample s;
        s.id = stem;
        s.image = image_to_tensor(img::read_image(path.string()));
        s.mask = mask_to_tensor(img::read_image(it->second.string()));
        if (!s.mask.same_spatial(s.image)) {
            std::cerr << "warning: '" << stem << "' image/mask sizes differ, skipping\n";
            continue;
        }
        samples.push_back(std::move(s));
    }
    for (const auto& [stem, path] : masks) {
        if (!images.count(stem)) {
            std::cerr << "warning: mask '" << path.filename().string() << "' has no image, skipping\n";
        }
    }
    if (samples.empty()) {
        throw std::runtime_error("no image/GT pairs found under '" + (fs::path(root) / split).string() + "'");
    }
    return samples;
}

Tensor<float> resize_image_bilinear(const Tensor<float>& t, int oh, int ow) {
    if (t.rank() != 4 || t.n() != 1 || oh < 1 || ow < 1) {
        throw std::invalid_argument("resize_image_bilinear: expects a 1xHxWxC tensor");
    }
    const int ih = t.h(), iw = t.w(), c = t.c();
    Tensor<float> out(1, oh, ow, c);
    for (int y = 0; y < oh; ++y) {
        const double sy = (y + 0.5) * ih / oh - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, ih - 1);
        const int y1 = std::min(y0 + 1, ih - 1);
        const float fy = static_cast<float>(std::max(0.0, sy - y0));
        for (int x = 0; x < ow; ++x) {
            const double sx = (x + 0.5) * iw / ow - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, iw - 1);
            const int x1 = std::min(x0 + 1, iw - 1);
            const float fx = static_cast<float>(std::max(0.0, sx - x0));
            for (int ch = 0; ch < c; ++ch) {
                const float a = t.at(0, y0, x0, ch), b = t.at(0, y0, x1, ch);
                const float d = t.at(0, y1, x0, ch), e = t.at(0, y1, x1, ch);
                const float top = a + fx * (b - a), bot = d + fx * (e - d);
                out.at(0, y, x, ch) = top + fy * (bot - top);
            }
        }
    }
    return out;
}

namespace {

Tensor<float> resize_nearest_binary(const Tensor<float>& t, int oh, int ow) {
    const int ih = t.h(), iw = t.w();
    Tensor<float> out(1, oh, ow, 1);
    for (int y = 0; y < oh; ++y) {
        const int sy = std::clamp(static_cast<int>(std::floor((y + 0.5) * ih / oh)), 0, ih - 1);
        for (int x = 0; x < ow; ++x) {
            const int sx = std::clamp(static_cast<int>(std::floor((x + 0.5) * iw / ow)), 0, iw - 1);
            out.at(0, y, x, 0) = t.at(0, sy, sx, 0) >= 0.5f ? 1.0f : 0.0f;
        }
    }
    return out;
}

}  // namespace

Sample resize_sample(const Sample& s, int out_h, int out_w) {
    check_sample(s, "resize_sample");
    if (out_h < 16 || out_w < 16 || out_h % 16 != 0 || out_w % 16 != 0) {
        throw std::invalid_argument("resize target must be divisible by 16");
    }
    Sample r;
    r.id = s.id;
    r.image = resize_image_bilinear(s.image, out_h, out_w);
    r.mask = resize_nearest_binary(s.mask, out_h, out_w);
    return r;
}

namespace {

enum class Transform { Identity, HFlip, VFlip, Rot90, Rot180, Rot270 };

Tensor<float> apply_transform(const Tensor<float>& t, Transform tr) {
    const int h = t.h(), w = t.w(), c = t.c();
    const bool swaps = tr == Transform::Rot90 || tr == Transform::Rot270;
    Tensor<float> out(1, swaps ? w : h, swaps ? h : w, c);
    for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) {
            int sy = y, sx = x;
            switch (tr) {
                case Transform::Identity: break;
                case Transform::HFlip: sx = w - 1 - x; break;
                case Transform::VFlip: sy = h - 1 - y; break;
                case Transform::Rot90: sy = x; sx = w - 1 - y; break;  // counter-clockwise
                case Transform::Rot180: sy = h - 1 - y; sx = w - 1 - x; break;
                case Transform::Rot270: sy = h - 1 - x; sx = y; break;
            }
            for (int ch = 0; ch < c; ++ch) out.at(0, y, x, ch) = t.at(0, sy, sx, ch);
        }
    }
    return out;
}

}  // namespace

Sample augment(const Sample& s, const AugmentationSpec& spec, std::uint64_t seed) {
    check_sample(s, "augment");
    spec.validate();
    std::vector<Transform> pool{Transform::Identity};
    if (spec.hflip) pool.push_back(Transform::HFlip);
    if (spec.vflip) pool.push_back(Transform::VFlip);
    for (int r : spec.rotations) {
        pool.push_back(r == 90 ? Transform::Rot90 : r == 180 ? Transform::Rot180 : Transform::Rot270);
    }
    Rng rng(Rng::mix(seed, 0x617567));
    const Transform tr = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    Sample out;
    out.id = s.id;
    out.image = apply_transform(s.image, tr);
    out.mask = apply_transform(s.mask, tr);
    return out;
}

std::vector<Sample> make_synthetic_corpus(int n, int size, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("synthetic corpus needs n >= 1");
    if (size < 16 || size % 16 != 0) throw std::invalid_argument("synthetic size must be divisible by 16");

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int idx = 0; idx < n; ++idx) {
        Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(idx)));
        Sample s;
        s.id = "synthetic_" + std::string(idx < 10 ? "000" : idx < 100 ? "00" : idx < 1000 ? "0" : "") +
               std::to_string(idx);
        s.image = Tensor<float>(1, size, size, 3);
        s.mask = Tensor<float>(1, size, size, 1);
        s.mask.fill(0.0f);

        // Low-intensity textured background.
        double base[3], phase[3];
        for (int c = 0; c < 3; ++c) {
            base[c] = rng.uniform(0.10, 0.40);
            phase[c] = rng.uniform(0.0, 2.0 * kPi);
        }
        const double fx = rng.uniform(1.0, 4.0), fy = rng.uniform(1.0, 4.0);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double wave = std::sin(2.0 * kPi * (fx * x + fy * y) / size + phase[0]);
                const double noise = rng.uniform(-0.02, 0.02);
                for (int c = 0; c < 3; ++c) {
                    const double v = base[c] + 0.06 * wave + noise;
                    s.image.at(0, y, x, c) = static_cast<float>(std::clamp(v, 0.0, 0.5));
                }
            }
        }

        // 1-3 bright shapes; sizes are bounded so foreground stays below half
        // the image and every shape covers its own center pixel.
        const int shapes = rng.uniform_int(1, 3);
        for (int sh = 0; sh < shapes; ++sh) {
            const bool ellipse = rng.uniform_int(0, 1) == 0;
            const double cx = rng.uniform(0.2, 0.8) * size;
            const double cy = rng.uniform(0.2, 0.8) * size;
            const double rx = rng.uniform(size / 16.0, size / 6.0);
            const double ry = rng.uniform(size / 16.0, size / 6.0);
            double color[3];
            for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.70, 0.95);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                    const bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                                                : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                    if (!inside) continue;
                    s.mask.at(0, y, x, 0) = 1.0f;
                    for (int c = 0; c < 3; ++c) {
                        const double v = color[c] + 0.04 * dx;
                        s.image.at(0, y, x, c) = static_cast<float>(std::clamp(v, 0.55, 1.0));
                    }
                }
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

BatchIter::BatchIter(std::vector<Sample> samples, int batch_size, std::uint64_t seed, bool shuffle)
    : samples_(std::move(samples)), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
    if (batch_size_ < 1) throw std::invalid_argument("batch size must be >= 1");
    if (samples_.empty()) throw std::invalid_argument("batch iterator needs at least one sample");
    for (const Sample& s : samples_) {
        check_sample(s, "batch_iter");
        if (!s.image.same_spatial(samples_.front().image)) {
            throw std::invalid_argument("batch iterator requires uniformly sized samples");
        }
    }
    reshuffle();
}

void BatchIter::reshuffle() {
    order_.resize(samples_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle_) {
        Rng rng(Rng::mix(seed_, static_cast<std::uint64_t>(epoch_)));
        for (std::size_t i = order_.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
            std::swap(order_[i], order_[j]);
        }
    }
}

Batch BatchIter::next() {
    if (pos_ >= order_.size()) {
        ++epoch_;
        reshuffle();
        pos_ = 0;
    }
    const std::size_t take = std::min(static_cast<std::size_t>(batch_size_), order_.size() - pos_);
    const Sample& first = samples_[order_[pos_]];
    Batch b;
    b.images = Tensor<float>(static_cast<int>(take), first.image.h(), first.image.w(), 3);
    b.masks = Tensor<float>(static_cast<int>(take), first.mask.h(), first.mask.w(), 1);
    for (std::size_t i = 0; i < take; ++i) {
        const Sample& s = samples_[order_[pos_ + i]];
        b.ids.push_back(s.id);
        std::copy(s.image.data(), s.image.data() + s.image.size(),
                  b.images.data() + i * s.image.size());
        std::copy(s.mask.data(), s.mask.data() + s.mask.size(), b.masks.data() + i * s.mask.size());
    }
    pos_ += take;
    return b;
}

}  // namespace pdfnet::data
