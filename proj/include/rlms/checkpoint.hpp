#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rlms/layers.hpp"

namespace rlms {

// Named-array container:
//   "RLMS" | u32 version | u32 count | count x [u16 name_len | name | u8 ndim | ndim x u32 dim | f32 payload]
// All integers and floats little-endian.
inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(std::ostream& out, const ParamList<float>& arrays);
ParamList<float> read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const ParamList<float>& arrays);
ParamList<float> load_container(const std::filesystem::path& path);

// Copies `loaded` into `target` by name. Every target entry must be present with
// the same shape; the first offending entry is named in the FormatError.
void assign_by_name(const ParamList<float>& loaded, const ParamList<float>& target);

const Tensor<float>* find_array(const ParamList<float>& arrays, const std::string& name);

namespace detail {

// Byte-order plumbing, parameterized on the host order so the opposite-endian
// path can be exercised on any machine. `mem` is the in-memory representation
// of one scalar of `width` bytes as it would sit on a `host`-ordered machine.
void append_le(std::vector<unsigned char>& out, const unsigned char* mem, std::size_t width,
               std::endian host);
void load_le(const unsigned char* in, unsigned char* mem, std::size_t width, std::endian host);

std::vector<unsigned char> encode_container(const ParamList<float>& arrays, std::endian host);
ParamList<float> decode_container(const std::vector<unsigned char>& bytes, std::endian host);

// Raw in-memory bytes of `arrays[i]` payloads as a `host`-ordered machine would hold them.
std::vector<unsigned char> memory_image(const std::vector<float>& values, std::endian host);

}  // namespace detail

}  // namespace rlms
