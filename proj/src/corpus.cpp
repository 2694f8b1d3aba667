#include "pollisim/corpus.hpp"

#include <filesystem>
#include <fstream>

#include "pollisim/image.hpp"
#include "pollisim/rng.hpp"

namespace pollisim {

namespace {

constexpr int kPatchSize = 48;

void paint_foliage(Image& img, Rng& rng) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int g = rng.uniform_int(70, 150);
      const int r = rng.uniform_int(15, g - 30);
      const int b = rng.uniform_int(10, 55);
      img.set(x, y, static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
              static_cast<std::uint8_t>(b));
    }
  }
}

void paint_disc(Image& img, Rng& rng, double cx, double cy, double radius, int r_lo,
                int r_hi, int g_lo, int g_hi, int b_lo, int b_hi) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d > radius) continue;
      img.set(x, y, static_cast<std::uint8_t>(rng.uniform_int(r_lo, r_hi)),
              static_cast<std::uint8_t>(rng.uniform_int(g_lo, g_hi)),
              static_cast<std::uint8_t>(rng.uniform_int(b_lo, b_hi)));
    }
  }
}

Image flower_patch(Rng& rng) {
  Image img(kPatchSize, kPatchSize);
  paint_foliage(img, rng);
  const double cx = rng.uniform(18.0, 30.0);
  const double cy = rng.uniform(18.0, 30.0);
  const double radius = rng.uniform(8.0, 14.0);
  // whitish-pink petals with a yellow center
  paint_disc(img, rng, cx, cy, radius, 205, 255, 165, 225, 175, 235);
  paint_disc(img, rng, cx, cy, radius * 0.25, 215, 245, 185, 215, 40, 90);
  return img;
}

Image non_flower_patch(Rng& rng, bool distractor) {
  Image img(kPatchSize, kPatchSize);
  paint_foliage(img, rng);
  if (distractor) {
    // pale gray blob: stones and dry leaves share colors with petals
    const double cx = rng.uniform(16.0, 32.0);
    const double cy = rng.uniform(16.0, 32.0);
    const double radius = rng.uniform(6.0, 12.0);
    const int base = rng.uniform_int(165, 215);
    paint_disc(img, rng, cx, cy, radius, base - 8, base + 18, base - 12, base + 14,
               base - 14, base + 16);
  }
  return img;
}

}  // namespace

void generate_vision_corpus(const CorpusOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir);
  Rng rng(options.seed);

  std::ofstream labels(fs::path(options.out_dir) / "labels.csv");
  labels << "filename,label,split\n";

  const auto emit = [&](const std::string& split, bool flower, int count) {
    for (int i = 0; i < count; ++i) {
      const std::string name = std::string(flower ? "flower" : "other") + "_" + split +
                               "_" + std::to_string(i) + ".ppm";
      const bool distractor = !flower && i % 3 == 0;
      const Image img = flower ? flower_patch(rng) : non_flower_patch(rng, distractor);
      write_ppm((fs::path(options.out_dir) / name).string(), img);
      labels << name << "," << (flower ? "flower" : "non_flower") << "," << split << "\n";
    }
  };
  emit("train", true, options.train_per_class);
  emit("train", false, options.train_per_class);
  emit("test", true, options.test_per_class);
  emit("test", false, options.test_per_class);
}

}  // namespace pollisim
