#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "convreg/groundtruth.hpp"
#include "convreg/network.hpp"
#include "convreg/tensor.hpp"

namespace convreg {

// Binary PGM (P5) or PPM (P6), 8-bit, scaled to [0,1] as v/255.
Tensor read_image(const std::filesystem::path& path);

// 8-bit PGM preview, v -> round(255*v) half-up. Returns true when any value
// had to be clamped into [0,1].
bool write_pgm(const Tensor& map, const std::filesystem::path& path);

// Loss-free map interchange: height and width as unsigned 32-bit
// little-endian, then height*width IEEE-754 doubles, little-endian.
void write_raw_map(const Tensor& map, const std::filesystem::path& path);
Tensor read_raw_map(const std::filesystem::path& path);

// Checkpoint layout (all little-endian):
//   magic "HCNR" | u32 version=1 | u32 input_channels | u32 target_factor |
//   u32 combiner_mode | u32 num_blocks |
//   per block: u32 filters, u32 size, u32 pool, u32 lrn, u32 upsample |
//   u64 init_seed | u64 param_count | f64 params[param_count]
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

enum class RecordKind { kWindows, kMap, kFixations };

// One tab-separated manifest line: image path, kind, payload.
struct ManifestRecord {
  std::filesystem::path image_path;
  RecordKind kind = RecordKind::kWindows;
  std::vector<Window> windows;
  std::filesystem::path map_path;
  std::vector<std::pair<int, int>> fixations;  // image-pixel coordinates
};

struct Manifest {
  std::vector<ManifestRecord> records;
};

// Relative paths resolve against the manifest's directory; referenced files
// must exist at load time.
Manifest load_manifest(const std::filesystem::path& path);

struct SynthConfig {
  int count = 0;
  int canvas = 64;
  int factor = 4;
  int min_windows = 1;
  int max_windows = 2;
  double min_extent_frac = 0.28;  // window w,h as a fraction of the canvas
  double max_extent_frac = 0.55;
  std::uint64_t seed = 0;
};

// Deterministic synthetic detection set: noisy dark backgrounds with one
// bright elliptical blob per window. Writes PGM images plus manifest.tsv
// into out_dir and returns the manifest path.
std::filesystem::path synth_dataset(const SynthConfig& cfg,
                                    const std::filesystem::path& out_dir);

// Line-oriented network description: one block per line
// ("<filters> <size> [pool] [lrn] [upsample]"), then a final line naming the
// combiner ("linear" or "channel_max"). '#' starts a comment. The net
// downsampling factor follows from the block layout.
NetworkSpec load_network_spec(const std::filesystem::path& path,
                              int input_channels);

}  // namespace convreg
