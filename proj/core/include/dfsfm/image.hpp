#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace dfsfm {

/// Single-channel float image, row-major, values nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int Width() const { return width_; }
  int Height() const { return height_; }
  bool Empty() const { return data_.empty(); }

  float& At(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float At(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  const std::vector<float>& Data() const { return data_; }
  std::vector<float>& Data() { return data_; }

  /// Bilinear sample with border clamping.
  float Bilinear(double x, double y) const;

  /// Central-difference gradient images (borders use one-sided differences).
  Image GradientX() const;
  Image GradientY() const;

  bool Contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// 8-bit binary PGM (P5). Float values are clamped to [0,1] and scaled to 0..255.
void WritePgm(const Image& image, const std::string& path);
Image ReadPgm(const std::string& path);

/// Depth map: float32 row-major binary with a one-line ASCII header.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float At(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& At(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  /// Bilinear depth lookup; returns 0 outside the image or on invalid depth.
  float Bilinear(double x, double y) const;
};

void WriteDepthMap(const DepthMap& depth, const std::string& path);
DepthMap ReadDepthMap(const std::string& path);

}  // namespace dfsfm
