#ifndef AFBC_NUMKIT_CHECKPOINT_HPP
#define AFBC_NUMKIT_CHECKPOINT_HPP

#include <filesystem>
#include <map>
#include <string>

#include "afbc/numkit/mlp.hpp"

namespace afbc::numkit {

// Parameter checkpoint: a text header terminated by an "end_header" line,
// followed by parameter_count little-endian IEEE-754 binary32 values in
// MlpNet::flat_parameters() order. Layout is documented in docs/formats.md.
struct Checkpoint {
  MlpNet net;
  std::map<std::string, std::string> metadata;  // free-form key/value pairs
};

void save_checkpoint(const std::filesystem::path& path, const MlpNet& net,
                     const std::map<std::string, std::string>& metadata = {});

/// Throws DataError on malformed headers, unsupported float width/byte order,
/// or truncated payloads.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace afbc::numkit

#endif  // AFBC_NUMKIT_CHECKPOINT_HPP
