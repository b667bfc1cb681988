#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "pdfnet/data.hpp"
#include "pdfnet/image_io.hpp"
#include "pdfnet/rng.hpp"

using namespace pdfnet;

namespace {

enum class Xf { Id, HFlip, VFlip, Rot90, Rot180, Rot270 };

// Scatter-style reference: writes each input pixel to where the transform
// sends it, the mirror image of the library's gather loops.
Tensor<float> xform(const Tensor<float>& t, Xf f) {
    const int h = t.h(), w = t.w(), c = t.c();
    const bool swaps = f == Xf::Rot90 || f == Xf::Rot270;
    Tensor<float> out(1, swaps ? w : h, swaps ? h : w, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int oy = y, ox = x;
            switch (f) {
                case Xf::Id: break;
                case Xf::HFlip: ox = w - 1 - x; break;
                case Xf::VFlip: oy = h - 1 - y; break;
                case Xf::Rot90: oy = w - 1 - x; ox = y; break;   // quarter turn, counter-clockwise
                case Xf::Rot180: oy = h - 1 - y; ox = w - 1 - x; break;
                case Xf::Rot270: oy = x; ox = h - 1 - y; break;  // quarter turn, clockwise
            }
            for (int ch = 0; ch < c; ++ch) out.at(0, oy, ox, ch) = t.at(0, y, x, ch);
        }
    }
    return out;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
    return a.h() == b.h() && a.w() == b.w() && a.c() == b.c() &&
           std::equal(a.data(), a.data() + a.size(), b.data());
}

data::Sample random_sample(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    data::Sample s;
    s.id = "s" + std::to_string(seed);
    s.image = Tensor<float>(1, h, w, 3);
    s.mask = Tensor<float>(1, h, w, 1);
    for (std::size_t i = 0; i < s.image.size(); ++i) s.image.data()[i] = static_cast<float>(rng.uniform());
    for (std::size_t i = 0; i < s.mask.size(); ++i) s.mask.data()[i] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
    return s;
}

// Identifies which transform produced `out`, and insists the mask moved the
// same way as the image.
Xf classify(const data::Sample& in, const data::Sample& out) {
    for (Xf f : {Xf::Id, Xf::HFlip, Xf::VFlip, Xf::Rot90, Xf::Rot180, Xf::Rot270}) {
        if (same(out.image, xform(in.image, f))) {
            REQUIRE(same(out.mask, xform(in.mask, f)));
            return f;
        }
    }
    REQUIRE_MESSAGE(false, "augmented output matches no known transform");
    return Xf::Id;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static inline int counter = 0;
};

img::Image8 solid_rgb(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    img::Image8 im;
    im.h = h;
    im.w = w;
    im.channels = 3;
    im.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t i = 0; i < im.pixels.size(); i += 3) {
        im.pixels[i] = r;
        im.pixels[i + 1] = g;
        im.pixels[i + 2] = b;
    }
    return im;
}

img::Image8 gray(int h, int w, std::uint8_t v) {
    img::Image8 im;
    im.h = h;
    im.w = w;
    im.channels = 1;
    im.pixels.assign(static_cast<std::size_t>(h) * w, v);
    return im;
}

}  // namespace

TEST_CASE("augmentation draws from identity plus every enabled transform") {
    const data::Sample s = random_sample(6, 9, 1);
    const data::AugmentationSpec all;
    std::map<Xf, int> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) ++seen[classify(s, data::augment(s, all, seed))];
    CHECK(seen.size() == 6);
    for (const auto& [f, n] : seen) CHECK(n > 10);
}

TEST_CASE("disabled transforms never fire") {
    const data::Sample s = random_sample(5, 7, 2);
    data::AugmentationSpec flips_only;
    flips_only.vflip = false;
    flips_only.rotations.clear();
    std::set<Xf> seen;
    for (std::uint64_t seed = 0; seed < 64; ++seed) seen.insert(classify(s, data::augment(s, flips_only, seed)));
    CHECK(seen == std::set<Xf>{Xf::Id, Xf::HFlip});

    data::AugmentationSpec half_turn;
    half_turn.hflip = false;
    half_turn.vflip = false;
    half_turn.rotations = {180};
    seen.clear();
    for (std::uint64_t seed = 0; seed < 64; ++seed) seen.insert(classify(s, data::augment(s, half_turn, seed)));
    CHECK(seen == std::set<Xf>{Xf::Id, Xf::Rot180});
}

TEST_CASE("augmentation is a pure function of sample and seed") {
    const data::Sample s = random_sample(6, 6, 3);
    const data::AugmentationSpec all;
    const data::Sample a = data::augment(s, all, 42);
    const data::Sample b = data::augment(s, all, 42);
    CHECK(same(a.image, b.image));
    CHECK(same(a.mask, b.mask));
    CHECK(a.id == s.id);
}

TEST_CASE("flips and the half turn are involutions, quarter turns have order four") {
    const data::Sample s = random_sample(6, 9, 4);

    auto seed_for = [&](const data::AugmentationSpec& spec, Xf want) {
        for (std::uint64_t seed = 0; seed < 64; ++seed) {
            if (classify(s, data::augment(s, spec, seed)) == want) return seed;
        }
        REQUIRE_MESSAGE(false, "no seed picked the requested transform");
        return std::uint64_t{0};
    };

    data::AugmentationSpec hflip;
    hflip.vflip = false;
    hflip.rotations.clear();
    const std::uint64_t sh = seed_for(hflip, Xf::HFlip);
    CHECK(same(data::augment(data::augment(s, hflip, sh), hflip, sh).image, s.image));

    data::AugmentationSpec vflip;
    vflip.hflip = false;
    vflip.rotations.clear();
    const std::uint64_t sv = seed_for(vflip, Xf::VFlip);
    CHECK(same(data::augment(data::augment(s, vflip, sv), vflip, sv).image, s.image));

    data::AugmentationSpec r180;
    r180.hflip = false;
    r180.vflip = false;
    r180.rotations = {180};
    const std::uint64_t s180 = seed_for(r180, Xf::Rot180);
    CHECK(same(data::augment(data::augment(s, r180, s180), r180, s180).mask, s.mask));

    data::AugmentationSpec r90;
    r90.hflip = false;
    r90.vflip = false;
    r90.rotations = {90};
    const std::uint64_t s90 = seed_for(r90, Xf::Rot90);
    data::Sample cur = s;
    for (int i = 0; i < 2; ++i) cur = data::augment(cur, r90, s90);
    // two quarter turns equal one half turn
    CHECK(same(cur.image, data::augment(s, r180, s180).image));
    for (int i = 0; i < 2; ++i) cur = data::augment(cur, r90, s90);
    CHECK(same(cur.image, s.image));
    CHECK(same(cur.mask, s.mask));
}

TEST_CASE("augmentation validates its inputs") {
    const data::Sample s = random_sample(4, 4, 5);
    data::AugmentationSpec bad;
    bad.rotations = {45};
    CHECK_THROWS_AS(data::augment(s, bad, 0), std::invalid_argument);

    data::Sample mismatched = s;
    mismatched.mask = Tensor<float>(1, 3, 4, 1);
    CHECK_THROWS_AS(data::augment(mismatched, data::AugmentationSpec{}, 0), std::invalid_argument);
}

TEST_CASE("resizing to the same shape is the identity") {
    const auto corpus = data::make_synthetic_corpus(1, 32, 11);
    const data::Sample r = data::resize_sample(corpus[0], 32, 32);
    CHECK(same(r.image, corpus[0].image));
    CHECK(same(r.mask, corpus[0].mask));
    CHECK(r.id == corpus[0].id);
}

TEST_CASE("resize targets must be multiples of sixteen") {
    const auto corpus = data::make_synthetic_corpus(1, 32, 12);
    CHECK_THROWS_AS(data::resize_sample(corpus[0], 40, 32), std::invalid_argument);
    CHECK_THROWS_AS(data::resize_sample(corpus[0], 32, 40), std::invalid_argument);
    CHECK_THROWS_AS(data::resize_sample(corpus[0], 0, 32), std::invalid_argument);
    CHECK_NOTHROW(data::resize_sample(corpus[0], 16, 64));
}

TEST_CASE("bilinear resize preserves constants, corners and monotone ramps") {
    Tensor<float> flat(1, 8, 8, 3);
    flat.fill(0.37f);
    const Tensor<float> up = data::resize_image_bilinear(flat, 24, 16);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(up.data()[i] == 0.37f);

    Tensor<float> rnd(1, 6, 5, 2);
    Rng rng(13);
    for (std::size_t i = 0; i < rnd.size(); ++i) rnd.data()[i] = static_cast<float>(rng.uniform());
    const Tensor<float> up2 = data::resize_image_bilinear(rnd, 12, 10);
    for (int ch = 0; ch < 2; ++ch) {
        CHECK(up2.at(0, 0, 0, ch) == rnd.at(0, 0, 0, ch));
        CHECK(up2.at(0, 0, 9, ch) == rnd.at(0, 0, 4, ch));
        CHECK(up2.at(0, 11, 0, ch) == rnd.at(0, 5, 0, ch));
        CHECK(up2.at(0, 11, 9, ch) == rnd.at(0, 5, 4, ch));
    }

    Tensor<float> ramp(1, 4, 16, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 16; ++x) ramp.at(0, y, x, 0) = static_cast<float>(x) / 15.0f;
    const Tensor<float> wide = data::resize_image_bilinear(ramp, 4, 48);
    for (int x = 1; x < 48; ++x) CHECK(wide.at(0, 2, x, 0) >= wide.at(0, 2, x - 1, 0));
    CHECK(wide.at(0, 0, 0, 0) == 0.0f);
    CHECK(wide.at(0, 0, 47, 0) == 1.0f);
}

TEST_CASE("mask resize picks nearest pixels and stays binary") {
    // 32x32 checkerboard of 2x2 blocks; the 16x16 nearest sampling lands on
    // pixel (2y+1, 2x+1), i.e. inside block (y, x).
    data::Sample s;
    s.id = "cb";
    s.image = Tensor<float>(1, 32, 32, 3);
    s.mask = Tensor<float>(1, 32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) s.mask.at(0, y, x, 0) = ((y / 2 + x / 2) % 2 == 0) ? 1.0f : 0.0f;
    const data::Sample down = data::resize_sample(s, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(down.mask.at(0, y, x, 0) == (((y + x) % 2 == 0) ? 1.0f : 0.0f));

    const auto corpus = data::make_synthetic_corpus(1, 32, 14);
    const data::Sample up = data::resize_sample(corpus[0], 48, 48);
    for (std::size_t i = 0; i < up.mask.size(); ++i) {
        const float v = up.mask.data()[i];
        CHECK((v == 0.0f || v == 1.0f));
    }
    for (std::size_t i = 0; i < up.image.size(); ++i) {
        CHECK(up.image.data()[i] >= 0.0f);
        CHECK(up.image.data()[i] <= 1.0f);
    }
}

TEST_CASE("dataset loader pairs images and masks by stem") {
    TempDir tmp("pdfnet_data");
    const auto images = tmp.path / "train" / "images";
    const auto gt = tmp.path / "train" / "GT";
    std::filesystem::create_directories(images);
    std::filesystem::create_directories(gt);

    img::write_png((images / "a.png").string(), solid_rgb(8, 10, 255, 0, 128));
    // extension says JPEG, payload is PNG — the decoder goes by signature
    img::write_png((images / "b.jpg").string(), solid_rgb(8, 10, 10, 20, 30));
    img::write_png((images / "orphan.png").string(), solid_rgb(8, 10, 1, 2, 3));
    img::write_png((images / "c.png").string(), solid_rgb(8, 10, 9, 9, 9));
    img::write_png((images / "notes.txt").string(), solid_rgb(4, 4, 0, 0, 0));  // ignored extension

    img::Image8 mask_a = gray(8, 10, 0);
    mask_a.pixels[0] = 200;  // >= 128 binarizes to foreground
    mask_a.pixels[1] = 100;  // < 128 binarizes to background
    img::write_png((gt / "a.png").string(), mask_a);
    img::write_png((gt / "b.png").string(), gray(8, 10, 255));
    img::write_png((gt / "c.png").string(), gray(4, 4, 255));  // size mismatch, skipped
    img::write_png((gt / "stray.png").string(), gray(8, 10, 0));

    const auto samples = data::load_dataset(tmp.path.string(), "train");
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].id == "a");
    CHECK(samples[1].id == "b");
    CHECK(samples[0].image.h() == 8);
    CHECK(samples[0].image.w() == 10);
    CHECK(samples[0].image.at(0, 0, 0, 0) == 1.0f);
    CHECK(samples[0].image.at(0, 0, 0, 1) == 0.0f);
    CHECK(samples[0].image.at(0, 0, 0, 2) == doctest::Approx(128.0f / 255.0f));
    CHECK(samples[0].mask.at(0, 0, 0, 0) == 1.0f);
    CHECK(samples[0].mask.at(0, 0, 1, 0) == 0.0f);
    CHECK(samples[0].mask.at(0, 3, 3, 0) == 0.0f);
    CHECK(samples[1].mask.at(0, 2, 2, 0) == 1.0f);

    CHECK_THROWS_AS(data::load_dataset(tmp.path.string(), "test"), std::runtime_error);

    const auto empty_split = tmp.path / "empty";
    std::filesystem::create_directories(empty_split / "images");
    std::filesystem::create_directories(empty_split / "GT");
    CHECK_THROWS_AS(data::load_dataset(tmp.path.string(), "empty"), std::runtime_error);
}

TEST_CASE("synthetic corpus holds its contract") {
    const auto corpus = data::make_synthetic_corpus(12, 32, 7);
    REQUIRE(corpus.size() == 12);
    CHECK(corpus[0].id == "synthetic_0000");
    CHECK(corpus[11].id == "synthetic_0011");
    for (const data::Sample& s : corpus) {
        REQUIRE(s.image.h() == 32);
        REQUIRE(s.image.w() == 32);
        REQUIRE(s.image.c() == 3);
        REQUIRE(s.mask.c() == 1);
        double fg = 0.0;
        for (std::size_t i = 0; i < s.mask.size(); ++i) {
            const float v = s.mask.data()[i];
            REQUIRE((v == 0.0f || v == 1.0f));
            fg += v;
        }
        fg /= static_cast<double>(s.mask.size());
        CHECK(fg > 0.0);
        CHECK(fg < 0.5);
        // shapes are bright, background is dim — separable by construction
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const float v = s.image.at(0, y, x, c);
                    REQUIRE(v >= 0.0f);
                    REQUIRE(v <= 1.0f);
                    if (s.mask.at(0, y, x, 0) == 1.0f) {
                        REQUIRE(v >= 0.55f);
                    } else {
                        REQUIRE(v <= 0.5f);
                    }
                }
            }
        }
    }
    CHECK_THROWS_AS(data::make_synthetic_corpus(0, 32, 7), std::invalid_argument);
    CHECK_THROWS_AS(data::make_synthetic_corpus(4, 20, 7), std::invalid_argument);
}

TEST_CASE("synthetic samples depend on their index, not the corpus size") {
    const auto big = data::make_synthetic_corpus(8, 32, 7);
    const auto small = data::make_synthetic_corpus(6, 32, 7);
    CHECK(same(big[5].image, small[5].image));
    CHECK(same(big[5].mask, small[5].mask));
    const auto other = data::make_synthetic_corpus(1, 32, 8);
    CHECK(!same(big[0].image, other[0].image));
}

TEST_CASE("batch iterator walks each epoch exactly once and reshuffles between them") {
    const auto corpus = data::make_synthetic_corpus(8, 16, 21);
    std::set<std::string> all_ids;
    for (const auto& s : corpus) all_ids.insert(s.id);

    data::BatchIter iter(corpus, 3, 99, true);
    CHECK(iter.sample_count() == 8);

    auto run_epoch = [&]() {
        std::vector<std::string> seq;
        data::Batch b = iter.next();
        CHECK(b.images.n() == 3);
        seq.insert(seq.end(), b.ids.begin(), b.ids.end());
        b = iter.next();
        CHECK(b.images.n() == 3);
        seq.insert(seq.end(), b.ids.begin(), b.ids.end());
        b = iter.next();
        CHECK(b.images.n() == 2);  // partial tail batch
        CHECK(b.masks.n() == 2);
        seq.insert(seq.end(), b.ids.begin(), b.ids.end());
        return seq;
    };

    const auto epoch0 = run_epoch();
    CHECK(iter.epoch() == 0);
    const auto epoch1 = run_epoch();
    CHECK(iter.epoch() == 1);
    CHECK(std::set<std::string>(epoch0.begin(), epoch0.end()) == all_ids);
    CHECK(std::set<std::string>(epoch1.begin(), epoch1.end()) == all_ids);
    CHECK(epoch0 != epoch1);  // reshuffled between epochs

    // same seed replays the identical order; a different seed diverges
    data::BatchIter again(corpus, 3, 99, true);
    data::BatchIter other(corpus, 3, 100, true);
    std::vector<std::string> replay, diverged;
    for (int i = 0; i < 6; ++i) {
        const auto b = again.next();
        replay.insert(replay.end(), b.ids.begin(), b.ids.end());
        const auto c = other.next();
        diverged.insert(diverged.end(), c.ids.begin(), c.ids.end());
    }
    std::vector<std::string> both = epoch0;
    both.insert(both.end(), epoch1.begin(), epoch1.end());
    CHECK(replay == both);
    CHECK(diverged != both);
}

TEST_CASE("unshuffled iteration keeps corpus order and copies the right tensors") {
    const auto corpus = data::make_synthetic_corpus(5, 16, 22);
    data::BatchIter iter(corpus, 2, 0, false);
    std::vector<std::string> seq;
    for (int i = 0; i < 3; ++i) {
        const data::Batch b = iter.next();
        for (std::size_t j = 0; j < b.ids.size(); ++j) {
            seq.push_back(b.ids[j]);
            const std::size_t idx = seq.size() - 1;
            const data::Sample& src = corpus[idx];
            CHECK(b.ids[j] == src.id);
            CHECK(std::equal(src.image.data(), src.image.data() + src.image.size(),
                             b.images.data() + j * src.image.size()));
            CHECK(std::equal(src.mask.data(), src.mask.data() + src.mask.size(),
                             b.masks.data() + j * src.mask.size()));
        }
    }
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(seq[i] == corpus[i].id);
}

TEST_CASE("batch iterator rejects bad construction") {
    const auto corpus = data::make_synthetic_corpus(2, 16, 23);
    CHECK_THROWS_AS(data::BatchIter(corpus, 0, 0, true), std::invalid_argument);
    CHECK_THROWS_AS(data::BatchIter({}, 2, 0, true), std::invalid_argument);
    auto mixed = corpus;
    mixed.push_back(data::make_synthetic_corpus(1, 32, 24)[0]);
    CHECK_THROWS_AS(data::BatchIter(mixed, 2, 0, true), std::invalid_argument);
}
