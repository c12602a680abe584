#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rlms/trainer.hpp"

namespace rlms {

inline constexpr std::size_t kSsimWindow = 8;

// Grayscale SSIM (0.299R + 0.587G + 0.114B on the 0..255 scale) averaged over
// non-overlapping 8x8 windows; trailing rows/columns that do not fill a window
// are ignored. Images are [1, 3, H, W] or [3, H, W] in [0, 1].
double ssim(const Tensor<float>& a, const Tensor<float>& b);

// The per-window formula on raw luma samples, exposed for testing.
double ssim_window(const double* a, const double* b, std::size_t n);

struct NamedImage {
    std::string name;
    Tensor<float> image;  // [1, 3, H, W]
};

struct EvalRow {
    std::string content;
    std::string style;
    std::size_t index = 0;  // sequence index, 1-based
    double content_loss = 0.0;
    double style_loss = 0.0;
    double ssim = 0.0;
    double seconds_per_image = 0.0;
};

struct EvalSummary {
    std::size_t index = 0;
    double content_loss = 0.0;
    double style_loss = 0.0;
    double ssim = 0.0;
    double seconds_per_image = 0.0;
    std::size_t pairs = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<EvalSummary> summary;  // arithmetic means per sequence index
    double params_millions = 0.0;      // actor + builder
    double storage_mb = 0.0;
};

// Indices reported by default: 1, 5 and 10, restricted to [1, steps].
std::vector<std::size_t> default_indices(std::size_t steps);

// Every content x style pair, in input order. `clock` (seconds) is read only
// immediately around inference.
EvalReport evaluate(const Agent<float>& agent, const FeatureBackbone<float>& backbone,
                    const std::vector<NamedImage>& content, const std::vector<NamedImage>& style, std::size_t steps,
                    const std::vector<std::size_t>& indices, const std::function<double()>& clock = {});

void write_report(std::ostream& out, const EvalReport& report);

}  // namespace rlms
