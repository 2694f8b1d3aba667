#pragma once

#include <cstdint>
#include <string>

namespace pollisim {

struct CorpusOptions {
  std::string out_dir;
  int train_per_class{60};
  int test_per_class{40};
  std::uint64_t seed{1};
};

/// Writes a synthetic patch corpus (flower discs on foliage texture vs
/// foliage and pale distractors) as P6 pixmaps plus a labels.csv with
/// filename,label,split rows.
void generate_vision_corpus(const CorpusOptions& options);

}  // namespace pollisim
