#include "attgan/image.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

namespace attgan {

namespace {

cv::Mat as_mat(const RgbImage& image) {
    const int type = image.channels == 1 ? CV_8UC1 : image.channels == 3 ? CV_8UC3 : CV_8UC4;
    return cv::Mat(image.height, image.width, type, const_cast<std::uint8_t*>(image.data.data()));
}

RgbImage from_mat(const cv::Mat& m) {
    RgbImage out(m.cols, m.rows, m.channels());
    cv::Mat dst(m.rows, m.cols, m.type(), out.data.data());
    m.copyTo(dst);
    return out;
}

}  // namespace

RgbImage decode_image(const std::string& bytes) {
    if (bytes.empty()) throw std::invalid_argument("empty image payload");
    std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
    cv::Mat m = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::invalid_argument("image payload is not a decodable PNG/JPEG");
    if (m.depth() != CV_8U) m.convertTo(m, CV_8U, 1.0 / 257.0);
    if (m.channels() == 3)
        cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    else if (m.channels() == 4)
        cv::cvtColor(m, m, cv::COLOR_BGRA2RGB);
    return from_mat(m);
}

RgbImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_image(ss.str());
}

std::string encode_png(const RgbImage& image) {
    if (image.channels != 3) throw std::invalid_argument("encode_png: expected RGB image");
    cv::Mat bgr;
    cv::cvtColor(as_mat(image), bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", bgr, buf)) throw std::runtime_error("PNG encoding failed");
    return {buf.begin(), buf.end()};
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

torch::Tensor preprocess_image(const RgbImage& image, int resolution) {
    if (image.channels != 3) throw std::invalid_argument("preprocess_image: expected 3-channel RGB input");
    if (image.width <= 0 || image.height <= 0) throw std::invalid_argument("preprocess_image: empty image");
    cv::Mat m = as_mat(image);
    const int side = std::min(m.cols, m.rows);
    cv::Mat crop = m(cv::Rect((m.cols - side) / 2, (m.rows - side) / 2, side, side));
    cv::Mat resized;
    if (side == resolution)
        resized = crop.clone();
    else
        cv::resize(crop, resized, cv::Size(resolution, resolution), 0, 0,
                   side > resolution ? cv::INTER_AREA : cv::INTER_LINEAR);
    auto t = torch::from_blob(resized.data, {resolution, resolution, 3}, torch::kUInt8)
                 .to(torch::kFloat32)
                 .permute({2, 0, 1})
                 .contiguous();
    return t / 127.5 - 1.0;
}

RgbImage tensor_to_image(const torch::Tensor& chw) {
    if (chw.dim() != 3 || chw.size(0) != 3) throw std::invalid_argument("tensor_to_image: expected [3,H,W]");
    auto hwc = ((chw.detach().to(torch::kFloat32).clamp(-1, 1) + 1.0) * 127.5)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
    RgbImage out(static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(0)));
    std::memcpy(out.data.data(), hwc.data_ptr<std::uint8_t>(), out.data.size());
    return out;
}

}  // namespace attgan
