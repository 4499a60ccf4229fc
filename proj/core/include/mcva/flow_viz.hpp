#pragma once

#include "mcva/flow_io.hpp"
#include "mcva/image_io.hpp"

namespace mcva {

// Renders a flow field with the standard HSV color wheel (hue = direction,
// saturation = magnitude relative to max_mag; max_mag <= 0 autoscales).
Image flow_to_color(const Flow& flow, float max_mag = 0.f);

} // namespace mcva
