#include "dfsfm/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dfsfm {

namespace {

int ClampIndex(int v, int hi) { return std::clamp(v, 0, hi); }

}  // namespace

float Image::Bilinear(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = ClampIndex(x0 + 1, width_ - 1);
  const int y1 = ClampIndex(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = At(x0, y0);
  const double v10 = At(x1, y0);
  const double v01 = At(x0, y1);
  const double v11 = At(x1, y1);
  return static_cast<float>((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                            fy * ((1.0 - fx) * v01 + fx * v11));
}

Image Image::GradientX() const {
  Image g(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const int xm = ClampIndex(x - 1, width_ - 1);
      const int xp = ClampIndex(x + 1, width_ - 1);
      const float scale = (xp - xm) > 0 ? 1.0f / static_cast<float>(xp - xm) : 0.0f;
      g.At(x, y) = (At(xp, y) - At(xm, y)) * scale;
    }
  }
  return g;
}

Image Image::GradientY() const {
  Image g(width_, height_);
  for (int y = 0; y < height_; ++y) {
    const int ym = ClampIndex(y - 1, height_ - 1);
    const int yp = ClampIndex(y + 1, height_ - 1);
    const float scale = (yp - ym) > 0 ? 1.0f / static_cast<float>(yp - ym) : 0.0f;
    for (int x = 0; x < width_; ++x) {
      g.At(x, y) = (At(x, yp) - At(x, ym)) * scale;
    }
  }
  return g;
}

void WritePgm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << image.Width() << " " << image.Height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.Width()));
  for (int y = 0; y < image.Height(); ++y) {
    for (int x = 0; x < image.Width(); ++x) {
      const float v = std::clamp(image.At(x, y), 0.0f, 1.0f);
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// Skips PGM whitespace and '#' comment lines between header tokens.
int NextPgmInt(std::istream& in) {
  int c = in.get();
  while (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') {
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    }
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw std::runtime_error("malformed PGM header");
  return value;
}

}  // namespace

Image ReadPgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') throw std::runtime_error("not a binary PGM: " + path);
  const int width = NextPgmInt(in);
  const int height = NextPgmInt(in);
  const int maxval = NextPgmInt(in);
  if (maxval <= 0 || maxval > 255) throw std::runtime_error("unsupported PGM maxval: " + path);
  Image image(width, height);
  std::vector<unsigned char> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw std::runtime_error("truncated PGM: " + path);
    for (int x = 0; x < width; ++x) {
      image.At(x, y) = static_cast<float>(row[static_cast<std::size_t>(x)]) / static_cast<float>(maxval);
    }
  }
  return image;
}

float DepthMap::Bilinear(double x, double y) const {
  if (width <= 0 || height <= 0) return 0.0f;
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = ClampIndex(x0 + 1, width - 1);
  const int y1 = ClampIndex(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = At(x0, y0);
  const double v10 = At(x1, y0);
  const double v01 = At(x0, y1);
  const double v11 = At(x1, y1);
  // Interpolating across a depth discontinuity is meaningless; fall back to
  // the nearest sample when any corner is invalid.
  if (v00 <= 0.0 || v10 <= 0.0 || v01 <= 0.0 || v11 <= 0.0) {
    return At(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
  }
  return static_cast<float>((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                            fy * ((1.0 - fx) * v01 + fx * v11));
}

void WriteDepthMap(const DepthMap& depth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "DMAP " << depth.width << " " << depth.height << "\n";
  out.write(reinterpret_cast<const char*>(depth.data.data()),
            static_cast<std::streamsize>(depth.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

DepthMap ReadDepthMap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string magic;
  in >> magic;
  if (magic != "DMAP") throw std::runtime_error("not a depth map: " + path);
  DepthMap depth;
  in >> depth.width >> depth.height;
  in.get();  // newline after the header
  if (depth.width <= 0 || depth.height <= 0) throw std::runtime_error("bad depth map size: " + path);
  depth.data.resize(static_cast<std::size_t>(depth.width) * depth.height);
  in.read(reinterpret_cast<char*>(depth.data.data()),
          static_cast<std::streamsize>(depth.data.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated depth map: " + path);
  return depth;
}

}  // namespace dfsfm
