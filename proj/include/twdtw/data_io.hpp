#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "twdtw/model_state.hpp"
#include "twdtw/tse.hpp"

namespace twdtw {

// ---------------------------------------------------------------------------
// TSE sample files
//
// 20-byte little-endian header followed by a row-major, time-major payload:
//   magic "TSE1" | u16 version | u32 T | u32 Nf | u8 dtype | 5 zero bytes
// dtype 0 = float64, 1 = float32. The payload length must match exactly.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kTseVersion = 1;
inline constexpr std::size_t kTseHeaderSize = 20;

enum class Dtype : std::uint8_t { Float64 = 0, Float32 = 1 };

struct TseFileHeader {
  std::uint16_t version = kTseVersion;
  std::uint32_t length = 0;
  std::uint32_t features = 0;
  Dtype dtype = Dtype::Float64;
};

void write_tse(const std::filesystem::path& path, const Tse& t,
               Dtype dtype = Dtype::Float64);
/// Reads a sample file. The returned Tse has no label; its id is the file stem.
Tse read_tse(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifest: tab-separated text with a header line
//   sample_id <TAB> path <TAB> label <TAB> split
// Lines starting with '#' are comments. Class indices follow first appearance.
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestName = "manifest.tsv";

enum class Split { Train, Val };

struct ManifestRecord {
  std::string sample_id;
  std::string relative_path;
  std::string label;
  Split split = Split::Train;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> class_names;

  int class_index(const std::string& name) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Tse> train;
  std::vector<Tse> val;
  std::size_t n_features = 0;

  std::size_t n_classes() const { return class_names.size(); }
};

/// Loads and validates every sample listed in `dir`/manifest.tsv. All
/// per-file failures are collected into one error that names each path.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes samples under dir/{train,val}/ plus the manifest.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t n_classes = 5;
  std::size_t n_features = 64;
  std::size_t centroid_len = kDefaultCentroidLength;
  std::size_t samples_per_class = 60;  ///< training samples per class
  std::size_t val_per_class = 40;
  std::size_t min_len = 12;
  std::size_t max_len = 40;
  double warp_strength = 0.5;
  double noise_sigma = 0.1;
  std::size_t distractor_features = 8;
  /// Scale of the class-specific part of each template.
  double class_separation = 1.0;
  /// Height of the per-class spike carried by one distractor slot.
  double spike_amplitude = 1.0;
  /// Noise level of the distractor dimensions; negative means noise_sigma.
  double distractor_sigma = -1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Preset where the templates share one trajectory, the class signal lives
/// only in the distractor spikes and the distractor dimensions are noisy, so
/// learned weights matter.
SynthSpec weight_sensitive_spec(std::uint64_t seed);

Dataset generate_synthetic(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Checkpoints: magic "TSCK", little-endian
//   u16 version | u32 epoch | u64 step | u64 config_hash | u32 Nc | u32 Tc |
//   u32 Nf | f64 tensors C, logU, mC, vC, mU, vU (each Nc*Tc*Nf)
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelState state;
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     std::uint64_t config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Loads and throws HashMismatch unless the stored hash equals `expected_hash`.
ModelState load_checkpoint_for_resume(const std::filesystem::path& path,
                                      std::uint64_t expected_hash);

}  // namespace twdtw
