#pragma once

#include "fashion/core_types.hpp"
#include "fashion/networks.hpp"

namespace fashion {

enum class OneStepVariant { k87, k84 };

// Single generator from an 8 x 8 prior: the unmerged 7-label map for 8-7, the
// merged constraint for 8-4. Throws PriorShapeMismatch when the prior does
// not fit the variant and StageMismatch when the generator does not either.
ImageRGB one_step_generate(const LatentNoise& z, const Grid3f& prior, const DesignCoding& d,
                           const ConditionalGenerator<float>& generator, OneStepVariant variant);

// Second stage with a single RGB head and no composition.
ImageRGB noncomp_generate(const LatentNoise& z, const SegMap& map, const DesignCoding& d,
                          const ConditionalGenerator<float>& generator);

}  // namespace fashion
