#include "pdfnet/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace pdfnet::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return f;
}

Image8 read_png(std::FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("corrupt PNG file '" + path + "'");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG channel count in '" + path + "'");
    }

    Image8 im;
    im.h = h;
    im.w = w;
    im.channels = channels;
    im.pixels.resize(static_cast<std::size_t>(h) * w * channels);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = im.pixels.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

Image8 read_jpeg(std::FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("corrupt JPEG file '" + path + "'");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    Image8 im;
    im.h = static_cast<int>(cinfo.output_height);
    im.w = static_cast<int>(cinfo.output_width);
    im.channels = cinfo.output_components;
    if (im.channels != 1 && im.channels != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("unsupported JPEG channel count in '" + path + "'");
    }
    im.pixels.resize(static_cast<std::size_t>(im.h) * im.w * im.channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = im.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * im.w * im.channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return im;
}

}  // namespace

Image8 read_image(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8] = {};
    const std::size_t got = std::fread(sig, 1, sizeof(sig), f.get());
    std::rewind(f.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(f.get(), path);
    if (got >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(f.get(), path);
    throw std::runtime_error("'" + path + "' is neither PNG nor JPEG");
}

Image8 to_gray(const Image8& im) {
    if (im.channels == 1) return im;
    Image8 g;
    g.h = im.h;
    g.w = im.w;
    g.channels = 1;
    g.pixels.resize(static_cast<std::size_t>(im.h) * im.w);
    for (std::size_t p = 0; p < g.pixels.size(); ++p) {
        const unsigned r = im.pixels[p * 3], gg = im.pixels[p * 3 + 1], b = im.pixels[p * 3 + 2];
        g.pixels[p] = static_cast<std::uint8_t>((299 * r + 587 * gg + 114 * b + 500) / 1000);
    }
    return g;
}

Image8 to_rgb(const Image8& im) {
    if (im.channels == 3) return im;
    Image8 rgb;
    rgb.h = im.h;
    rgb.w = im.w;
    rgb.channels = 3;
    rgb.pixels.resize(static_cast<std::size_t>(im.h) * im.w * 3);
    for (std::size_t p = 0; p < im.pixels.size(); ++p) {
        rgb.pixels[p * 3] = rgb.pixels[p * 3 + 1] = rgb.pixels[p * 3 + 2] = im.pixels[p];
    }
    return rgb;
}

void write_png(const std::string& path, const Image8& im) {
    if (im.channels != 1 && im.channels != 3) throw std::invalid_argument("write_png: 1 or 3 channels only");
    if (im.h < 1 || im.w < 1 ||
        im.pixels.size() != static_cast<std::size_t>(im.h) * im.w * im.channels) {
        throw std::invalid_argument("write_png: inconsistent image");
    }
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing PNG '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(im.w), static_cast<png_uint_32>(im.h), 8,
                 im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < im.h; ++y) {
        png_write_row(png, const_cast<png_bytep>(im.pixels.data() + static_cast<std::size_t>(y) * im.w * im.channels));
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

}  // namespace pdfnet::img
