#include "imtriage/image.hpp"

#include "imtriage/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>

namespace imtriage {

ImageRecord::ImageRecord(std::string id_, int w, int h)
    : id(std::move(id_)), width(w), height(h),
      rgb(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * 3, 0) {}

ImageRecord::ImageRecord(std::string id_, int w, int h, std::vector<std::uint8_t> pixels)
    : id(std::move(id_)), width(w), height(h), rgb(std::move(pixels)) {}

void ImageRecord::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    fill_rect(0, 0, width, height, r, g, b);
}

void ImageRecord::fill_rect(int x0, int y0, int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int x1 = std::min(width, x0 + w);
    const int y1 = std::min(height, y0 + h);
    for (int y = std::max(0, y0); y < y1; ++y) {
        for (int x = std::max(0, x0); x < x1; ++x) {
            auto* p = pixel(x, y);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    }
}

void validate(const ImageRecord& image) {
    if (image.width < 1 || image.height < 1)
        throw_invalid("image '" + image.id + "' has zero area");
    if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw_invalid("image '" + image.id + "' pixel buffer does not match its size");
}

namespace {

ImageRecord from_mat(const cv::Mat& bgr, std::string id) {
    ImageRecord out(std::move(id), bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            auto* p = out.pixel(x, y);
            p[0] = row[x][2];
            p[1] = row[x][1];
            p[2] = row[x][0];
        }
    }
    return out;
}

} // namespace

ImageRecord load_image(const std::filesystem::path& path, std::string id) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty())
        throw Error(ErrorCode::Io, "cannot decode image " + path.string());
    return from_mat(mat, std::move(id));
}

ImageRecord decode_image(const std::vector<std::uint8_t>& bytes, std::string id) {
    cv::Mat mat;
    if (!bytes.empty())
        mat = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (mat.empty())
        throw Error(ErrorCode::Io, "cannot decode uploaded image '" + id + "'");
    return from_mat(mat, std::move(id));
}

void save_png(const ImageRecord& image, const std::filesystem::path& path) {
    validate(image);
    cv::Mat mat(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            const auto* p = image.pixel(x, y);
            row[x] = cv::Vec3b(p[2], p[1], p[0]);
        }
    }
    if (!cv::imwrite(path.string(), mat))
        throw Error(ErrorCode::Io, "cannot write " + path.string());
}

bool is_image_file(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

} // namespace imtriage
