#pragma once

// SKT1 tensor files: magic "SKT1", u8 rank, rank x u32 LE dims, f32 LE payload.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "skipclip/errors.hpp"
#include "skipclip/numerics/tensor.hpp"

namespace skipclip::numerics {

enum class SktErrorCode { kOpen, kBadMagic, kTruncatedPayload, kSizeMismatch, kBadRank };

class SktError : public DataError {
 public:
  SktError(SktErrorCode code, const std::string& what) : DataError(what), code_(code) {}
  SktErrorCode code() const noexcept { return code_; }

 private:
  SktErrorCode code_;
};

std::string encode_skt(const Tensor& tensor);
/// Decodes exactly one tensor occupying all of `bytes`.
Tensor decode_skt(std::string_view bytes, std::optional<std::size_t> expected_rank = std::nullopt);

void save_skt(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_skt(const std::filesystem::path& path,
                std::optional<std::size_t> expected_rank = std::nullopt);

/// Reads only the header dims (for manifest cross-checks).
Shape peek_skt_shape(const std::filesystem::path& path);

}  // namespace skipclip::numerics
