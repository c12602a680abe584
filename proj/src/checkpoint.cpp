#include "rlms/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "rlms/error.hpp"

namespace rlms {

namespace detail {

void append_le(std::vector<unsigned char>& out, const unsigned char* mem, std::size_t width,
               std::endian host) {
    if (host == std::endian::little) {
        out.insert(out.end(), mem, mem + width);
    } else {
        for (std::size_t i = width; i-- > 0;) out.push_back(mem[i]);
    }
}

void load_le(const unsigned char* in, unsigned char* mem, std::size_t width, std::endian host) {
    for (std::size_t i = 0; i < width; ++i) mem[host == std::endian::little ? i : width - 1 - i] = in[i];
}

namespace {

template <typename U>
std::vector<unsigned char> native_bytes(U value, std::endian host) {
    std::vector<unsigned char> mem(sizeof(U));
    std::memcpy(mem.data(), &value, sizeof(U));
    if (host != std::endian::native) std::reverse(mem.begin(), mem.end());
    return mem;
}

template <typename U>
void put(std::vector<unsigned char>& out, U value, std::endian host) {
    const auto mem = native_bytes(value, host);
    append_le(out, mem.data(), sizeof(U), host);
}

class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::endian host) : bytes_(bytes), host_(host) {}

    template <typename U>
    U get(const char* what) {
        need(sizeof(U), what);
        unsigned char mem[sizeof(U)];
        load_le(bytes_.data() + pos_, mem, sizeof(U), host_);
        pos_ += sizeof(U);
        if (host_ != std::endian::native) std::reverse(mem, mem + sizeof(U));
        U value;
        std::memcpy(&value, mem, sizeof(U));
        return value;
    }

    std::string text(std::size_t n) {
        need(n, "entry name");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("container truncated while reading ") + what);
    }

    const std::vector<unsigned char>& bytes_;
    std::endian host_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> memory_image(const std::vector<float>& values, std::endian host) {
    std::vector<unsigned char> out;
    out.reserve(values.size() * 4);
    for (float v : values) {
        const auto mem = native_bytes(v, host);
        out.insert(out.end(), mem.begin(), mem.end());
    }
    return out;
}

std::vector<unsigned char> encode_container(const ParamList<float>& arrays, std::endian host) {
    std::vector<unsigned char> out{'R', 'L', 'M', 'S'};
    put<std::uint32_t>(out, kContainerVersion, host);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()), host);
    std::set<std::string> seen;
    for (const auto& entry : arrays) {
        if (!seen.insert(entry.name).second) throw FormatError("duplicate container entry " + entry.name);
        if (entry.name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw FormatError("container entry name too long: " + entry.name.substr(0, 32));
        }
        const Shape& shape = entry.tensor.shape();
        if (shape.size() > std::numeric_limits<std::uint8_t>::max()) {
            throw FormatError("too many dimensions in " + entry.name);
        }
        put<std::uint16_t>(out, static_cast<std::uint16_t>(entry.name.size()), host);
        out.insert(out.end(), entry.name.begin(), entry.name.end());
        out.push_back(static_cast<unsigned char>(shape.size()));
        for (std::size_t d : shape) {
            if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("dimension overflow in " + entry.name);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(d), host);
        }
        for (float v : entry.tensor.data()) put<float>(out, v, host);
    }
    return out;
}

ParamList<float> decode_container(const std::vector<unsigned char>& bytes, std::endian host) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "RLMS", 4) != 0) {
        throw FormatError("not an RLMS container (bad magic)");
    }
    const std::vector<unsigned char> body(bytes.begin() + 4, bytes.end());
    Reader r(body, host);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kContainerVersion) {
        throw FormatError("unsupported container version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>("entry count");
    ParamList<float> arrays;
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint16_t>("name length");
        std::string name = r.text(len);
        if (!seen.insert(name).second) throw FormatError("duplicate container entry " + name);
        const auto ndim = r.get<std::uint8_t>("ndim");
        Shape shape(ndim);
        for (auto& d : shape) d = r.get<std::uint32_t>("dims");
        Tensor<float> t(shape);
        for (float& v : t.data()) v = r.get<float>("payload");
        arrays.push_back({std::move(name), std::move(t)});
    }
    if (!r.done()) throw FormatError("trailing bytes after container entries");
    return arrays;
}

}  // namespace detail

void write_container(std::ostream& out, const ParamList<float>& arrays) {
    const auto bytes = detail::encode_container(arrays, std::endian::native);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing container");
}

ParamList<float> read_container(std::istream& in) {
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return detail::decode_container(bytes, std::endian::native);
}

void save_container(const std::filesystem::path& path, const ParamList<float>& arrays) {
    // Write-then-rename so an interrupted save never clobbers the previous file.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        write_container(out, arrays);
    }
    std::filesystem::rename(tmp, path);
}

ParamList<float> load_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return read_container(in);
}

const Tensor<float>* find_array(const ParamList<float>& arrays, const std::string& name) {
    for (const auto& e : arrays) {
        if (e.name == name) return &e.tensor;
    }
    return nullptr;
}

void assign_by_name(const ParamList<float>& loaded, const ParamList<float>& target) {
    for (const auto& t : target) {
        const Tensor<float>* src = find_array(loaded, t.name);
        if (src == nullptr) throw FormatError("checkpoint is missing array " + t.name);
        if (src->shape() != t.tensor.shape()) {
            throw FormatError("checkpoint array " + t.name + " has shape " + shape_str(src->shape()) +
                              ", expected " + shape_str(t.tensor.shape()));
        }
    }
    for (const auto& t : target) {
        const auto src = find_array(loaded, t.name)->data();
        auto dst = Tensor<float>(t.tensor).data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

}  // namespace rlms
