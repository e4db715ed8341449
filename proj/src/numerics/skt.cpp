#include "skipclip/numerics/skt.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace skipclip::numerics {

namespace {

constexpr std::string_view kMagic = "SKT1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

struct Header {
  Shape shape;
  std::size_t payload_offset = 0;
};

Header parse_header(std::string_view bytes, std::optional<std::size_t> expected_rank) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic)
    throw SktError(SktErrorCode::kBadMagic, "bad magic: not an SKT1 tensor");
  if (bytes.size() < 5) throw SktError(SktErrorCode::kTruncatedPayload, "truncated payload: missing rank");
  const std::size_t rank = static_cast<unsigned char>(bytes[4]);
  if (expected_rank && rank != *expected_rank)
    throw SktError(SktErrorCode::kBadRank, "rank " + std::to_string(rank) + " where " +
                                               std::to_string(*expected_rank) + " is required");
  Header h;
  h.payload_offset = 5 + 4 * rank;
  if (bytes.size() < h.payload_offset)
    throw SktError(SktErrorCode::kTruncatedPayload, "truncated payload: header dims cut short");
  for (std::size_t i = 0; i < rank; ++i) {
    const auto d = get_u32(bytes, 5 + 4 * i);
    if (d == 0) throw SktError(SktErrorCode::kSizeMismatch, "size mismatch: zero extent on axis " + std::to_string(i));
    h.shape.push_back(d);
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SktError(SktErrorCode::kOpen, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

std::string encode_skt(const Tensor& tensor) {
  if (tensor.rank() > 255) throw ShapeError("SKT1 supports rank <= 255");
  std::string out(kMagic);
  out.push_back(static_cast<char>(tensor.rank()));
  for (auto d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + 4 * tensor.size());
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_skt(std::string_view bytes, std::optional<std::size_t> expected_rank) {
  const Header h = parse_header(bytes, expected_rank);
  const std::size_t count = shape_size(h.shape);
  const std::size_t available = bytes.size() - h.payload_offset;
  if (available < 4 * count)
    throw SktError(SktErrorCode::kTruncatedPayload,
                   "truncated payload: expected " + std::to_string(4 * count) + " bytes, found " +
                       std::to_string(available));
  if (available > 4 * count)
    throw SktError(SktErrorCode::kSizeMismatch,
                   "size mismatch: header dims " + shape_string(h.shape) + " need " +
                       std::to_string(4 * count) + " payload bytes, found " + std::to_string(available));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i)
    data[i] = std::bit_cast<float>(get_u32(bytes, h.payload_offset + 4 * i));
  return Tensor(h.shape, std::move(data));
}

void save_skt(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SktError(SktErrorCode::kOpen, "cannot write " + path.string());
  const std::string bytes = encode_skt(tensor);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SktError(SktErrorCode::kOpen, "write failed for " + path.string());
}

Tensor load_skt(const std::filesystem::path& path, std::optional<std::size_t> expected_rank) {
  return decode_skt(read_file(path), expected_rank);
}

Shape peek_skt_shape(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SktError(SktErrorCode::kOpen, "cannot open " + path.string());
  std::string head(5 + 4 * 255, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return parse_header(head, std::nullopt).shape;
}

}  // namespace skipclip::numerics
