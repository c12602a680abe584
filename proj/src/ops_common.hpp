#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rlms/error.hpp"
#include "rlms/tensor.hpp"

namespace rlms::detail {

inline std::vector<std::size_t> contiguous_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
    return strides;
}

// Strides of `shape` right-aligned into `out`, zero on broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    const auto own = contiguous_strides(shape);
    const std::size_t offset = out.size() - shape.size();
    for (std::size_t d = 0; d < shape.size(); ++d) {
        strides[offset + d] = shape[d] == 1 ? 0 : own[d];
    }
    return strides;
}

// Visits every flat output index together with the matching offsets into two
// operands laid out with the given strides.
template <class F>
void broadcast_loop(const Shape& out, const std::vector<std::size_t>& sa,
                    const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t nd = out.size();
    const std::size_t total = shape_numel(out);
    if (total == 0) return;
    if (nd == 0) {
        f(std::size_t{0}, std::size_t{0}, std::size_t{0});
        return;
    }
    std::vector<std::size_t> idx(nd, 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    const std::size_t inner = out[nd - 1];
    const std::size_t ia_step = sa[nd - 1];
    const std::size_t ib_step = sb[nd - 1];
    for (std::size_t o = 0; o < total; o += inner) {
        for (std::size_t j = 0; j < inner; ++j) f(o + j, ia + j * ia_step, ib + j * ib_step);
        for (std::size_t d = nd - 1; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out[d]) break;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

inline void require_rank(const Shape& shape, std::size_t rank, const char* op) {
    if (shape.size() != rank) {
        throw DimensionError(std::string(op) + " expects a rank-" + std::to_string(rank) +
                             " tensor, got " + shape_str(shape));
    }
}

}  // namespace rlms::detail
