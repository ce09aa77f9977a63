#include "adnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "adnet/errors.hpp"

namespace adnet {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw IoError("cannot open '" + path + "'");
    }
    return f;
}

ImageU8 decode_png(FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG '" + path + "'");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    // Normalize every variant to 8-bit RGB.
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    ImageU8 img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != img.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG layout in '" + path + "'");
    }
    pixels.resize(img.height * rowbytes);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        rows[y] = pixels.data() + y * rowbytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    img.rgb = std::move(pixels);
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

ImageU8 decode_jpeg(FILE* f, const std::string& path) {
    ImageU8 img;
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("corrupt JPEG '" + path + "'");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB; // libjpeg upsamples grayscale for us
    jpeg_start_decompress(&cinfo);

    img.width = cinfo.output_width;
    img.height = cinfo.output_height;
    img.rgb.resize(img.width * img.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.rgb.data() + std::size_t(cinfo.output_scanline) * img.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

} // namespace

ImageU8 decode_image(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    unsigned char magic[4] = {0, 0, 0, 0};
    const std::size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    std::rewind(f.get());
    if (got >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' &&
        magic[3] == 'G') {
        return decode_png(f.get(), path);
    }
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
        return decode_jpeg(f.get(), path);
    }
    throw DataError("'" + path + "' is neither PNG nor JPEG");
}

void write_png_rgb(const std::string& path, const ImageU8& image) {
    if (image.rgb.size() != image.width * image.height * 3) {
        throw DataError("write_png_rgb: buffer does not match extents");
    }
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed for '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.rgb.data() + y * image.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png_gray(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& gray) {
    if (gray.size() != width * height) {
        throw DataError("write_png_gray: buffer does not match extents");
    }
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed for '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(gray.data() + y * width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_jpeg_rgb(const std::string& path, const ImageU8& image, int quality) {
    if (image.rgb.size() != image.width * image.height * 3) {
        throw DataError("write_jpeg_rgb: buffer does not match extents");
    }
    FilePtr f = open_file(path, "wb");
    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw IoError("JPEG write failed for '" + path + "'");
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f.get());
    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(
            image.rgb.data() + std::size_t(cinfo.next_scanline) * image.width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

template <typename T>
Tensor<T> image_to_planes(const ImageU8& image) {
    Tensor<T> t(Shape{3, image.height, image.width});
    const T inv = T{1} / T{255};
    for (std::size_t c = 0; c < 3; ++c) {
        T* plane = t.data() + c * image.height * image.width;
        for (std::size_t y = 0; y < image.height; ++y) {
            for (std::size_t x = 0; x < image.width; ++x) {
                plane[y * image.width + x] =
                    static_cast<T>(image.rgb[(y * image.width + x) * 3 + c]) * inv;
            }
        }
    }
    return t;
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& chw, std::size_t out_h, std::size_t out_w) {
    if (chw.rank() != 3) {
        throw ShapeError("bilinear_resize: expects [c,h,w], got " + shape_str(chw.shape()));
    }
    const std::size_t c = chw.extent(0), h = chw.extent(1), w = chw.extent(2);
    Tensor<T> out(Shape{c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* src = chw.data() + ch * h * w;
        T* dst = out.data() + ch * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0,
                                         static_cast<double>(h - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0,
                                             static_cast<double>(w - 1));
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top = (1.0 - wx) * static_cast<double>(src[y0 * w + x0]) +
                                   wx * static_cast<double>(src[y0 * w + x1]);
                const double bot = (1.0 - wx) * static_cast<double>(src[y1 * w + x0]) +
                                   wx * static_cast<double>(src[y1 * w + x1]);
                dst[oy * out_w + ox] = static_cast<T>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

template Tensor<float> image_to_planes<float>(const ImageU8&);
template Tensor<double> image_to_planes<double>(const ImageU8&);
template Tensor<float> bilinear_resize<float>(const Tensor<float>&, std::size_t,
                                              std::size_t);
template Tensor<double> bilinear_resize<double>(const Tensor<double>&, std::size_t,
                                                std::size_t);

} // namespace adnet
