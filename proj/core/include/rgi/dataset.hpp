#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rgi/ism.hpp"

namespace rgi {

inline constexpr uint32_t kDatasetMagic = 0x31494752;  // "RGI1"
inline constexpr uint32_t kDatasetVersion = 1;
inline constexpr uint32_t kSlotCount = 8;     // wall slots in the target matrix
inline constexpr uint32_t kWallParams = 4;    // [nx, ny, nz, d] per slot
inline constexpr size_t kRecordBytes = 131244;
inline constexpr size_t kHeaderBytes = 28;

// One training example: the multichannel RIR of a room plus the padded wall
// parameter matrix and slot occupancy vector it should map to.
struct Sample {
  uint8_t shape_id = 0;   // ShapeFamily value
  uint8_t num_walls = 0;
  uint64_t seed = 0;      // room sampling seed, for provenance
  std::array<std::array<float, kWallParams>, kSlotCount> a{};  // zero-padded rows
  std::array<float, kSlotCount> p{};                           // 1 = slot occupied
  std::vector<float> rir;                                      // channels * taps, mic-major
};

inline constexpr double kCoeffLo = 0.7;   // reflection-coefficient range,
inline constexpr double kCoeffHi = 0.95;  // drawn once per wall per room

struct GenerateConfig {
  std::string out_path;
  std::array<uint32_t, 4> counts{500, 500, 500, 500};  // per ShapeFamily
  uint64_t seed = 1;
  uint32_t first_index = 0;  // global index of the first sample; splits use
                             // disjoint index ranges over one seed
  int threads = 1;
  SimConfig sim;
};

// Deterministic sample construction: everything random derives from
// mix_seed(seed, index), so a (seed, index, family) triple regenerates the
// identical record bytes.
Sample make_sample(uint64_t seed, uint32_t index, ShapeFamily family, const SimConfig& sim);

// Interleaved family order for a generation run: cycles shoebox, pentagonal,
// hexagonal, l_shaped, skipping exhausted families.
std::vector<ShapeFamily> family_schedule(const std::array<uint32_t, 4>& counts);

// Writes the scheduled records (global indices first_index, first_index+1,
// ...) plus a JSON manifest sidecar at out_path + ".manifest.json". Output
// bytes do not depend on the thread count.
void generate_dataset(const GenerateConfig& cfg);

// Scales in place so the largest magnitude across all channels is exactly 1.
// Idempotent; throws AllZeroInput when there is no signal to scale.
void normalize_input(std::span<float> rir);

void write_dataset(const std::string& path, const std::vector<Sample>& samples);

std::vector<Sample> read_dataset(const std::string& path);

// Random access over a dataset file without loading it whole.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);
  ~DatasetReader();
  DatasetReader(const DatasetReader&) = delete;
  DatasetReader& operator=(const DatasetReader&) = delete;

  size_t size() const { return count_; }
  uint32_t channels() const { return channels_; }
  uint32_t taps() const { return taps_; }
  Sample read(size_t index);

 private:
  struct Impl;
  Impl* impl_;
  size_t count_ = 0;
  uint32_t channels_ = 0;
  uint32_t taps_ = 0;
};

}  // namespace rgi
