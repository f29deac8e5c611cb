#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipe::render {

/// Row-major grayscale raster with values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill)
  {
    if (w <= 0 || h <= 0)
      throw std::invalid_argument("Image: dimensions must be positive");
  }

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const Image&) const = default;
};

/// Binary portable graymap (P5, maxval 255).
inline void write_pgm(const Image& image, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

inline Image read_pgm(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported graymap: " + path);
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in)
    throw std::runtime_error("truncated graymap: " + path);
  Image image(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    image.pixels[i] = bytes[i] / 255.0;
  return image;
}

/// Separable Gaussian blur, stddev = width pixels, kernel truncated at
/// ceil(3 * stddev) and renormalized, borders clamped.
inline Image gaussian_blur(const Image& image, double width = 2.0)
{
  if (!(width > 0.0))
    throw std::invalid_argument("gaussian_blur: width must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * width));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * k * k / (width * width));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : kernel)
    w /= sum;

  const int W = image.width;
  const int H = image.height;
  Image tmp(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * image.at(std::clamp(x + k, 0, W - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  Image out(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(x, std::clamp(y + k, 0, H - 1));
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace ipe::render
