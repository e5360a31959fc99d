#include "image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

#include "errors.hpp"

namespace mulgan {

std::uint8_t to_byte(float v) {
  const double scaled = (static_cast<double>(v) + 1.0) * 127.5;
  const double r = std::round(scaled);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ShapeError("write_png expects a (3,H,W) image");
  auto img = image.detach().to(torch::kFloat32).contiguous();
  const int h = static_cast<int>(img.size(1)), w = static_cast<int>(img.size(2));
  cv::Mat out(h, w, CV_8UC3);
  auto acc = img.accessor<float, 3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto& px = out.at<cv::Vec3b>(y, x);
      px[0] = to_byte(acc[2][y][x]);  // OpenCV stores BGR
      px[1] = to_byte(acc[1][y][x]);
      px[2] = to_byte(acc[0][y][x]);
    }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write image " + path.string());
}

torch::Tensor read_image(const std::filesystem::path& path, int size) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("cannot read image " + path.string());
  const int side = std::min(m.rows, m.cols);
  cv::Mat crop = m(cv::Rect((m.cols - side) / 2, (m.rows - side) / 2, side, side));
  cv::Mat resized;
  if (side != size)
    cv::resize(crop, resized, cv::Size(size, size), 0, 0, side > size ? cv::INTER_AREA : cv::INTER_LINEAR);
  else
    resized = crop;
  auto t = torch::empty({3, size, size});
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const auto& px = resized.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) acc[c][y][x] = static_cast<float>(px[2 - c]) / 127.5f - 1.0f;
    }
  return t;
}

torch::Tensor make_montage(const std::vector<std::vector<torch::Tensor>>& grid, int pad) {
  int64_t h = 0, w = 0;
  size_t cols = 0;
  for (const auto& row : grid) {
    cols = std::max(cols, row.size());
    for (const auto& t : row)
      if (t.defined()) {
        h = std::max(h, t.size(1));
        w = std::max(w, t.size(2));
      }
  }
  if (grid.empty() || cols == 0 || h == 0) throw ValidationError("montage has no images");
  const auto rows = static_cast<int64_t>(grid.size());
  const auto ncols = static_cast<int64_t>(cols);
  auto out = torch::ones({3, rows * h + (rows + 1) * pad, ncols * w + (ncols + 1) * pad});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < static_cast<int64_t>(grid[static_cast<size_t>(r)].size()); ++c) {
      const auto& t = grid[static_cast<size_t>(r)][static_cast<size_t>(c)];
      if (!t.defined()) continue;
      const int64_t y0 = pad + r * (h + pad), x0 = pad + c * (w + pad);
      out.slice(1, y0, y0 + t.size(1)).slice(2, x0, x0 + t.size(2)).copy_(t.detach().to(torch::kFloat32));
    }
  return out;
}

}  // namespace mulgan
