#include "binary_io.hpp"

#include <fstream>
#include <iterator>

#include "dovf/errors.hpp"

namespace dovf::detail {

void ByteReader::need(std::size_t n) const {
    if (remaining() < n) {
        fail("truncated: needed " + std::to_string(n) + " more bytes at offset " + std::to_string(pos_) +
             ", have " + std::to_string(remaining()));
    }
}

void ByteReader::fail(const std::string& message) const { throw FormatError(what_ + ": " + message); }

void ByteReader::expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::string_view(data_.data() + pos_, magic.size()) != magic) {
        fail("bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
}

std::uint8_t ByteReader::u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

std::string ByteReader::str() {
    const auto n = u32();
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
}

void ByteReader::expect_end() const {
    if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

}  // namespace dovf::detail
