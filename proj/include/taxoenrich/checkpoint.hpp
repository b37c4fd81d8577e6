#pragma once

#include <iosfwd>
#include <string>

#include "taxoenrich/matcher.hpp"

namespace taxoenrich {

// TXM1 layout (little-endian): magic, u32 version, u32 scalar bytes (4 or 8),
// u32 d, u32 h, u32 k, u32 variant, string hyperparameters, u32 tensor count,
// then per tensor: string name, u32 rows, u32 cols, column-major values.
// Strings are a u32 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
struct Checkpoint {
    ModelParams<Scalar> params;
    std::string hyper;  // JSON object, opaque to the format
    int stored_scalar_bytes = static_cast<int>(sizeof(Scalar));
};

template <typename Scalar>
void write_checkpoint(const ModelParams<Scalar>& params, const std::string& hyper, std::ostream& out);
template <typename Scalar>
void write_checkpoint_file(const ModelParams<Scalar>& params, const std::string& hyper, const std::string& path);

// Values are converted when the stored precision differs from Scalar. Throws
// FormatError on bad magic, truncation, unknown or missing tensors and shape
// mismatches.
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(std::istream& in);
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint_file(const std::string& path);

// Stored precision in bytes, read from the header only.
int checkpoint_scalar_bytes(const std::string& path);

}  // namespace taxoenrich
