#pragma once

#include <string>
#include <vector>

#include "pdfnet/metrics.hpp"

namespace pdfnet::metrics {

// Renders a recall-vs-precision curve as a PNG: white canvas, gray grid at
// 0.1 steps, axes with tick labels, curve drawn as connected segments.
void render_pr_plot(const std::vector<PRPoint>& curve, const std::string& path);

}  // namespace pdfnet::metrics
