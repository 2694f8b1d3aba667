#include "pollisim/vision.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace pollisim {

ColorModel train_color_model(std::span<const LabeledPixel> pixels) {
  std::array<std::array<std::array<long, 256>, 3>, 2> counts{};
  std::array<long, 2> totals{0, 0};
  for (const LabeledPixel& p : pixels) {
    const int c = p.flower ? 1 : 0;
    ++counts[c][0][p.r];
    ++counts[c][1][p.g];
    ++counts[c][2][p.b];
    ++totals[c];
  }
  if (totals[0] == 0 || totals[1] == 0)
    throw MissingClassError("training pixels must cover both classes");

  ColorModel model;
  for (int c = 0; c < 2; ++c) {
    for (int ch = 0; ch < 3; ++ch)
      for (int v = 0; v < 256; ++v)
        model.hist[c][ch][v] = static_cast<double>(counts[c][ch][v] + 1) / (totals[c] + 256);
    model.prior[c] = static_cast<double>(totals[c]) / (totals[0] + totals[1]);
  }
  return model;
}

bool classify_rgb(const ColorModel& model, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  double score[2];
  for (int c = 0; c < 2; ++c) {
    score[c] = std::log(model.prior[c]) + std::log(model.hist[c][0][r]) +
               std::log(model.hist[c][1][g]) + std::log(model.hist[c][2][b]);
  }
  return score[1] > score[0];  // ties fall to non-flower
}

SegmentationLUT build_lut(const ColorModel& model) {
  SegmentationLUT lut;
  lut.table.resize(std::size_t{1} << 24);

  std::array<std::array<std::array<double, 256>, 3>, 2> lg;
  for (int c = 0; c < 2; ++c)
    for (int ch = 0; ch < 3; ++ch)
      for (int v = 0; v < 256; ++v) lg[c][ch][v] = std::log(model.hist[c][ch][v]);
  const double p0 = std::log(model.prior[0]);
  const double p1 = std::log(model.prior[1]);

  std::size_t idx = 0;
  for (int r = 0; r < 256; ++r) {
    for (int g = 0; g < 256; ++g) {
      const double base0 = p0 + lg[0][0][r] + lg[0][1][g];
      const double base1 = p1 + lg[1][0][r] + lg[1][1][g];
      for (int b = 0; b < 256; ++b, ++idx)
        lut.table[idx] = (base1 + lg[1][2][b] > base0 + lg[0][2][b]) ? 1 : 0;
    }
  }
  return lut;
}

std::vector<ImagePatch> segment_image(const Image& image, const SegmentationLUT& lut,
                                      int min_blob) {
  const int w = image.width, h = image.height;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = image.pixel(0, y);
    for (int x = 0; x < w; ++x, row += 3)
      mask[static_cast<std::size_t>(y) * w + x] = lut.flower(row[0], row[1], row[2]) ? 1 : 0;
  }

  std::vector<ImagePatch> patches;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * w + x;
      if (!mask[at] || seen[at]) continue;
      // 4-connected flood fill.
      ImagePatch patch{x, y, x, y, 0, 0.0, {0, 0}};
      double cx = 0.0, cy = 0.0;
      queue.clear();
      queue.emplace_back(x, y);
      seen[at] = 1;
      while (!queue.empty()) {
        const auto [px, py] = queue.front();
        queue.pop_front();
        ++patch.pixel_count;
        cx += px;
        cy += py;
        patch.x0 = std::min(patch.x0, px);
        patch.y0 = std::min(patch.y0, py);
        patch.x1 = std::max(patch.x1, px);
        patch.y1 = std::max(patch.y1, py);
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = px + dx[k], ny = py + dy[k];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const std::size_t nat = static_cast<std::size_t>(ny) * w + nx;
          if (mask[nat] && !seen[nat]) {
            seen[nat] = 1;
            queue.emplace_back(nx, ny);
          }
        }
      }
      if (patch.pixel_count < min_blob) continue;
      patch.centroid = {cx / patch.pixel_count, cy / patch.pixel_count};
      patch.flower_fraction = static_cast<double>(patch.pixel_count) /
                              (static_cast<double>(patch.bbox_width()) * patch.bbox_height());
      patches.push_back(patch);
    }
  }
  std::sort(patches.begin(), patches.end(), [](const ImagePatch& a, const ImagePatch& b) {
    return std::tie(a.y0, a.x0) < std::tie(b.y0, b.x0);
  });
  return patches;
}

PrecisionRecall precision_recall(const ConfusionCounts& c) {
  PrecisionRecall pr;
  if (c.tp + c.fp > 0) pr.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) pr.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  return pr;
}

std::optional<GridCellRef> bearing_to_cell(const Pose2& camera_pose, double /*camera_height*/,
                                           const Vec3& bearing,
                                           const std::vector<PlantRow>& rows,
                                           double max_range) {
  const Vec2 flat{bearing.x, bearing.y};
  if (flat.norm() < 1e-9) return std::nullopt;  // looking straight up/down
  const Vec2 dir = flat.normalized().rotated(camera_pose.theta);
  const Vec2 origin = camera_pose.position();

  double best_t = std::numeric_limits<double>::infinity();
  std::optional<GridCellRef> best;
  for (const PlantRow& row : rows) {
    for (Side side : {Side::kLeft, Side::kRight}) {
      const Segment face = row.face(side);
      const auto t = ray_segment_intersection(origin, dir, face);
      if (!t || *t > max_range || *t >= best_t) continue;
      const Vec2 hit = origin + dir * *t;
      const double along = std::clamp((hit - face.a).dot(row.axis()), 0.0, row.length());
      best_t = *t;
      best = GridCellRef{row.id, side, grid_cell_of(row, side, along)};
    }
  }
  return best;
}

void CellFlowerMap::begin_pass() {
  for (auto& [cell, obs] : cells) obs.observed_count = 0;
}

void update_cell_map(CellFlowerMap& map, const GridCellRef& cell, int detected_count,
                     double time) {
  CellObservation& obs = map.cells[cell];
  if (time < obs.last_observed)
    throw StaleObservationError("observation time regressed for a cell");
  obs.observed_count = std::max(obs.observed_count, detected_count);
  obs.last_observed = time;
  if (detected_count > 0) obs.ready = true;
}

}  // namespace pollisim
