#pragma once

#include <opencv2/imgcodecs.hpp>

#include "safa/imaging/imaging.hpp"

namespace safa {

inline Frame read_png(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    SAFA_REQUIRE(!img.empty(), "read_png: cannot read " + path);
    Frame f = make_frame(img.rows, img.cols);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            const cv::Vec3b px = img.at<cv::Vec3b>(y, x);  // BGR
            float* dst = f.data() + (static_cast<int64_t>(y) * img.cols + x) * 3;
            dst[0] = px[2] / 255.f;
            dst[1] = px[1] / 255.f;
            dst[2] = px[0] / 255.f;
        }
    return f;
}

inline void write_png(const std::string& path, const Frame& frame) {
    const int H = frame.dim(0), W = frame.dim(1);
    cv::Mat img(H, W, CV_8UC3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float* src = frame.data() + (static_cast<int64_t>(y) * W + x) * 3;
            auto q = [](float v) {
                return static_cast<uchar>(std::lround(std::min(std::max(v, 0.f), 1.f) * 255.f));
            };
            img.at<cv::Vec3b>(y, x) = cv::Vec3b(q(src[2]), q(src[1]), q(src[0]));
        }
    SAFA_REQUIRE(cv::imwrite(path, img), "write_png: cannot write " + path);
}

// Grayscale helper for fusion-map / refinement-magnitude visualizations.
inline void write_png_gray(const std::string& path, const Tensor& plane) {
    SAFA_CHECK(plane.ndim() == 2, "write_png_gray: expected [H,W]");
    Frame f = make_frame(plane.dim(0), plane.dim(1));
    for (int64_t i = 0; i < plane.numel(); ++i) {
        f[i * 3] = f[i * 3 + 1] = f[i * 3 + 2] = plane[i];
    }
    write_png(path, f);
}

}  // namespace safa
