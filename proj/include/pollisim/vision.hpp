#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pollisim/geometry.hpp"
#include "pollisim/image.hpp"
#include "pollisim/world.hpp"

namespace pollisim {

struct MissingClassError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StaleObservationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-class, per-channel 256-bin color histograms with add-one smoothing,
/// plus class priors. Class 1 is flower, class 0 is non-flower.
struct ColorModel {
  // [class][channel][value]; channels r, g, b.
  std::array<std::array<std::array<double, 256>, 3>, 2> hist{};
  std::array<double, 2> prior{0.5, 0.5};
};

struct LabeledPixel {
  std::uint8_t r, g, b;
  bool flower;
};

ColorModel train_color_model(std::span<const LabeledPixel> pixels);

/// Per-pixel classification rule: argmax over classes of
/// P(c) P(r|c) P(g|c) P(b|c), evaluated in log space; ties go to non-flower.
bool classify_rgb(const ColorModel& model, std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Precomputed classification table over all 2^24 RGB triples.
struct SegmentationLUT {
  std::vector<std::uint8_t> table;  // 1 = flower

  bool flower(std::uint8_t r, std::uint8_t g, std::uint8_t b) const {
    return table[(static_cast<std::size_t>(r) << 16) | (static_cast<std::size_t>(g) << 8) | b] != 0;
  }
};

SegmentationLUT build_lut(const ColorModel& model);

struct ImagePatch {
  int x0{0}, y0{0}, x1{0}, y1{0};  // bbox, inclusive
  int pixel_count{0};
  double flower_fraction{0.0};  // pixel_count / bbox area
  Vec2 centroid;                // pixel coordinates

  int bbox_width() const { return x1 - x0 + 1; }
  int bbox_height() const { return y1 - y0 + 1; }
};

/// LUT segmentation followed by 4-connected component extraction; components
/// smaller than min_blob are discarded. Patches are ordered by the scanline
/// position of their bbox top-left corner.
std::vector<ImagePatch> segment_image(const Image& image, const SegmentationLUT& lut,
                                      int min_blob = 25);

/// Second-stage patch classification interface. The production system behind
/// this used a learned model; the simulator ships a threshold rule.
class PatchClassifier {
 public:
  virtual ~PatchClassifier() = default;
  virtual bool is_flower(const ImagePatch& patch) const = 0;
};

class ThresholdPatchClassifier : public PatchClassifier {
 public:
  ThresholdPatchClassifier(double tau = 0.6, int min_area = 25, int max_area = 1000000)
      : tau_(tau), min_area_(min_area), max_area_(max_area) {}

  bool is_flower(const ImagePatch& patch) const override {
    return patch.flower_fraction >= tau_ && patch.pixel_count >= min_area_ &&
           patch.pixel_count <= max_area_;
  }

 private:
  double tau_;
  int min_area_;
  int max_area_;
};

inline bool classify_patch(const ImagePatch& patch, const PatchClassifier& classifier) {
  return classifier.is_flower(patch);
}

struct ConfusionCounts {
  long tp{0}, fp{0}, tn{0}, fn{0};
};

struct PrecisionRecall {
  double precision{0.0};
  double recall{0.0};
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn); 0 when a denominator is 0.
PrecisionRecall precision_recall(const ConfusionCounts& counts);

/// Ray-cast a camera-frame bearing into the row grid; returns the cell of the
/// nearest row-face intersection within max_range.
std::optional<GridCellRef> bearing_to_cell(const Pose2& camera_pose, double camera_height,
                                           const Vec3& bearing,
                                           const std::vector<PlantRow>& rows,
                                           double max_range);

/// Per-cell observation record kept by the executive.
struct CellObservation {
  int observed_count{0};
  double last_observed{-1.0};
  int pollinated_count{0};
  bool ready{false};
};

struct CellFlowerMap {
  std::map<GridCellRef, CellObservation> cells;

  /// Start a new inspection pass: stored counts reset, timestamps kept.
  void begin_pass();
};

/// Record a detection count for a cell. Within a pass the stored count is the
/// max over observations. Throws StaleObservationError if time regresses.
void update_cell_map(CellFlowerMap& map, const GridCellRef& cell, int detected_count,
                     double time);

}  // namespace pollisim
