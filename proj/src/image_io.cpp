#include "rlms/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rlms/error.hpp"
#include "rlms/log.hpp"

namespace rlms {

namespace {

Tensor<float> from_interleaved(const std::vector<float>& px, std::size_t h, std::size_t w, std::size_t channels) {
    Tensor<float> t(Shape{1, 3, h, w});
    const std::size_t plane = h * w;
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) t.data()[c * plane + i] = px[i * channels + (channels == 1 ? 0 : c)];
    }
    return t;
}

Tensor<float> read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&img, path.c_str()) == 0) {
        throw DataError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
    if (png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr) == 0) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw DataError("cannot decode PNG " + path.string() + ": " + msg);
    }
    std::vector<float> px(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) px[i] = static_cast<float>(buf[i]) / 255.0f;
    return from_interleaved(px, img.height, img.width, 3);
}

// Binary P5/P6 with 8- or 16-bit samples.
Tensor<float> read_pnm(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::size_t pos = 2;
    const auto next_number = [&]() -> std::size_t {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::size_t v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any) throw DataError("malformed PNM header in " + path.string());
        return v;
    };
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    const std::size_t w = next_number();
    const std::size_t h = next_number();
    const std::size_t maxval = next_number();
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw DataError("bad PNM header in " + path.string());
    ++pos;  // single whitespace before the raster
    const std::size_t width = maxval > 255 ? 2 : 1;
    const std::size_t n = w * h * channels;
    if (bytes.size() < pos + n * width) throw DataError("truncated PNM raster in " + path.string());
    std::vector<float> px(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t v = width == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
        px[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
    return from_interleaved(px, h, w, channels);
}

void require_image(const Tensor<float>& image) {
    if (image.dim() != 4 || image.size(0) != 1 || image.size(1) != 3) {
        throw DimensionError("expected one RGB image [1,3,H,W], got " + shape_str(image.shape()));
    }
}

}  // namespace

Tensor<float> read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) return read_png(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return read_pnm(path, bytes);
    throw DataError("unsupported image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
    require_image(image);
    const std::size_t h = image.size(2);
    const std::size_t w = image.size(3);
    const std::size_t plane = h * w;
    std::vector<unsigned char> buf(plane * 3);
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::round(static_cast<double>(image.at(c * plane + i)) * 255.0);
            buf[i * 3 + c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
        }
    }
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = PNG_FORMAT_RGB;
    if (png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr) == 0) {
        throw DataError("cannot write PNG " + path.string() + ": " + img.message);
    }
}

Tensor<float> center_crop(const Tensor<float>& image, std::size_t h, std::size_t w) {
    require_image(image);
    const std::size_t ih = image.size(2);
    const std::size_t iw = image.size(3);
    if (h > ih || w > iw) throw DimensionError("crop larger than image " + shape_str(image.shape()));
    const std::size_t y0 = (ih - h) / 2;
    const std::size_t x0 = (iw - w) / 2;
    Tensor<float> out(Shape{1, 3, h, w});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            const float* src = image.ptr() + (c * ih + y0 + y) * iw + x0;
            std::copy(src, src + w, out.ptr() + (c * h + y) * w);
        }
    }
    return out;
}

Tensor<float> crop_to_multiple_of_4(const Tensor<float>& image, const std::string& label) {
    require_image(image);
    const std::size_t h = image.size(2) / 4 * 4;
    const std::size_t w = image.size(3) / 4 * 4;
    if (h == 0 || w == 0) throw DimensionError(label + " is smaller than 4x4");
    if (h == image.size(2) && w == image.size(3)) return image;
    log_warn(label + ": " + std::to_string(image.size(3)) + "x" + std::to_string(image.size(2)) +
             " is not divisible by 4, center-cropped to " + std::to_string(w) + "x" + std::to_string(h));
    return center_crop(image, h, w);
}

Tensor<float> resize_cover(const Tensor<float>& image, std::size_t h, std::size_t w) {
    require_image(image);
    const std::size_t ih = image.size(2);
    const std::size_t iw = image.size(3);
    if (ih == h && iw == w) return image;
    const double scale = std::max(static_cast<double>(h) / static_cast<double>(ih),
                                  static_cast<double>(w) / static_cast<double>(iw));
    const std::size_t rh = std::max(h, static_cast<std::size_t>(std::lround(static_cast<double>(ih) * scale)));
    const std::size_t rw = std::max(w, static_cast<std::size_t>(std::lround(static_cast<double>(iw) * scale)));
    Tensor<float> resized(Shape{1, 3, rh, rw});
    // Pixel-center aligned bilinear sampling.
    const auto coord = [](std::size_t o, std::size_t in, std::size_t out, std::size_t& i0, std::size_t& i1,
                          double& f) {
        double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        i0 = static_cast<std::size_t>(s);
        i1 = std::min(i0 + 1, in - 1);
        f = s - static_cast<double>(i0);
    };
    for (std::size_t y = 0; y < rh; ++y) {
        std::size_t y0, y1;
        double fy;
        coord(y, ih, rh, y0, y1, fy);
        for (std::size_t x = 0; x < rw; ++x) {
            std::size_t x0, x1;
            double fx;
            coord(x, iw, rw, x0, x1, fx);
            for (std::size_t c = 0; c < 3; ++c) {
                const float* p = image.ptr() + c * ih * iw;
                const double top = p[y0 * iw + x0] * (1 - fx) + p[y0 * iw + x1] * fx;
                const double bot = p[y1 * iw + x0] * (1 - fx) + p[y1 * iw + x1] * fx;
                resized.data()[(c * rh + y) * rw + x] = static_cast<float>(top * (1 - fy) + bot * fy);
            }
        }
    }
    return center_crop(resized, h, w);
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw DataError("not a readable directory: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace rlms
