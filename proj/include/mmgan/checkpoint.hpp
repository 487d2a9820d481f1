#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmgan/config.hpp"
#include "mmgan/encoders.hpp"
#include "mmgan/nn.hpp"

namespace mmgan {

/// Parameter-set names inside a bundle.
namespace net {
inline constexpr const char* kGenerator = "G";
inline constexpr const char* kDiscriminator = "D";
inline constexpr const char* kText = "text";
inline constexpr const char* kImage = "image";
inline constexpr const char* kStyleHead = "style_head";
inline constexpr const char* kStyleNet = "style_net";
inline constexpr const char* kClassifier = "classifier";
inline constexpr const char* kFidNet = "fid_net";
}  // namespace net

/// Complete training state: everything a resumed run needs.
struct ModelBundle {
  TrainConfig config;
  enc::Vocabulary vocab{{}, 1};
  std::map<std::string, nn::ParamSet> params;
  std::map<std::string, nn::AdamState> adam;  // one per optimizable set
  std::uint64_t step = 0;

  /// Fresh parameters from substreams of config.seed; config.arch.vocab_size
  /// is taken from the vocabulary.
  static ModelBundle create(TrainConfig config, enc::Vocabulary vocab);

  const nn::ParamSet& at(const std::string& name) const;
  nn::ParamSet& at(const std::string& name);

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Names of the sets that carry optimizer state.
const std::vector<std::string>& optimizable_sets();

// Container: "MMG1", u32 version, u32 section count, then per section
// u32 name length, name bytes, u64 payload length, payload. Little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelBundle& b);
ModelBundle deserialize_checkpoint(const std::string& bytes);
/// Writes to a temporary sibling and renames, so a crash never leaves a torn file.
void save_checkpoint(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace mmgan
