#pragma once

#include <cstdint>

#include "rclab/data/dataset.hpp"

namespace rclab::data {

struct GlyphOptions {
  std::size_t size = 16;
};

// Procedurally rasterized digit glyphs in [-1,1], shape [1,size,size].
// Style s selects a rotation bucket (s % 4) and a stroke-thickness bucket
// ((s / 4) % 2), with a glyph-scale bucket for s >= 8; every sample adds
// small jitter. Conditions are Composite(class, style). At most 10 classes.
PairedDataset render_glyphs(std::size_t class_count, std::size_t styles_per_class, std::size_t per_cell_count,
                            std::uint64_t seed, const GlyphOptions& options = {});

}  // namespace rclab::data
