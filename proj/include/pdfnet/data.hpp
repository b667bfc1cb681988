#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdfnet/tensor.hpp"

namespace pdfnet::data {

// One image/mask pair; image is 1xHxWx3 in [0,1], mask 1xHxWx1 in {0,1}.
struct Sample {
    std::string id;
    Tensor<float> image;
    Tensor<float> mask;
};

struct AugmentationSpec {
    bool hflip = true;
    bool vflip = true;
    std::vector<int> rotations = {90, 180, 270};

    void validate() const;  // rotations restricted to {90, 180, 270}
};

// Loads `<root>/<split>/images/*.png|jpg` with masks from
// `<root>/<split>/GT/*.png`, matched by stem, ordered lexicographically.
// Orphans are skipped with a warning; zero pairs is an error.
std::vector<Sample> load_dataset(const std::string& root, const std::string& split);

// Bilinear image resize; nearest-neighbor mask resize with re-binarization.
Sample resize_sample(const Sample& s, int out_h, int out_w);

// Half-pixel-centers bilinear resize of a 1xHxWxC tensor.
Tensor<float> resize_image_bilinear(const Tensor<float>& image, int out_h, int out_w);

// Applies one seeded choice from {identity} plus the enabled transforms,
// identically to image and mask.
Sample augment(const Sample& s, const AugmentationSpec& spec, std::uint64_t seed);

// Deterministic corpus of high-contrast shapes on textured backgrounds.
std::vector<Sample> make_synthetic_corpus(int n, int size, std::uint64_t seed);

struct Batch {
    Tensor<float> images;  // BxHxWx3
    Tensor<float> masks;   // BxHxWx1
    std::vector<std::string> ids;
};

// Epoch iterator: seeded reshuffle per epoch, partial final batch emitted.
class BatchIter {
public:
    BatchIter(std::vector<Sample> samples, int batch_size, std::uint64_t seed, bool shuffle);

    Batch next();
    std::int64_t epoch() const { return epoch_; }
    std::size_t sample_count() const { return samples_.size(); }

private:
    std::vector<Sample> samples_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::int64_t epoch_ = 0;
    int batch_size_;
    std::uint64_t seed_;
    bool shuffle_;

    void reshuffle();
};

}  // namespace pdfnet::data
