#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rlms/trainer.hpp"

namespace rlms::fixtures {

// Procedural stand-in corpus: smooth shape scenes as content, strongly textured
// patterns as style. Fully determined by the size.
struct Corpus {
    Dataset train;  // 8 content, 4 style
    std::vector<Tensor<float>> held_content;
    // Pattern variants not seen in training, paired with held_content by index.
    std::vector<Tensor<float>> held_style;
};

Tensor<float> content_image(std::size_t index, std::size_t size);
Tensor<float> style_image(std::size_t family, std::size_t variant, std::size_t size);

Corpus make_corpus(std::size_t size = 64);

}  // namespace rlms::fixtures
