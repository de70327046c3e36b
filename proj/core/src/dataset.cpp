#include "rgi/dataset.hpp"

#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "rgi/rng.hpp"
#include "rgi/serial.hpp"

namespace rgi {

namespace {

// Seed-space tag for the reflection-coefficient stream; must stay clear of
// the room-resampling attempt indices (0..9999).
constexpr uint64_t kCoeffStream = 0xC0EFF;

void write_record(std::ostream& os, const Sample& s) {
  serial::write_u8(os, s.shape_id);
  serial::write_u8(os, s.num_walls);
  serial::write_u16(os, 0);
  serial::write_u64(os, s.seed);
  for (const auto& row : s.a)
    for (float v : row) serial::write_f32(os, v);
  for (float v : s.p) serial::write_f32(os, v);
  for (float v : s.rir) serial::write_f32(os, v);
}

Sample read_record(std::istream& is, uint32_t channels, uint32_t taps) {
  Sample s;
  s.shape_id = serial::read_u8(is);
  s.num_walls = serial::read_u8(is);
  serial::read_u16(is);
  s.seed = serial::read_u64(is);
  for (auto& row : s.a)
    for (float& v : row) v = serial::read_f32(is);
  for (float& v : s.p) v = serial::read_f32(is);
  s.rir.resize(static_cast<size_t>(channels) * taps);
  for (float& v : s.rir) v = serial::read_f32(is);
  return s;
}

struct Header {
  uint32_t count = 0;
  uint32_t channels = 0;
  uint32_t taps = 0;
  uint32_t wprime = 0;
  uint32_t fs_hz = 0;
};

void write_header(std::ostream& os, const Header& h) {
  serial::write_u32(os, kDatasetMagic);
  serial::write_u32(os, kDatasetVersion);
  serial::write_u32(os, h.count);
  serial::write_u32(os, h.channels);
  serial::write_u32(os, h.taps);
  serial::write_u32(os, h.wprime);
  serial::write_u32(os, h.fs_hz);
}

Header read_header(std::istream& is, const std::string& path) {
  if (serial::read_u32(is) != kDatasetMagic)
    throw BadMagic("not a dataset file: " + path);
  const uint32_t version = serial::read_u32(is);
  if (version != kDatasetVersion)
    throw VersionMismatch("dataset format version " + std::to_string(version) +
                          " unsupported, expected " + std::to_string(kDatasetVersion));
  Header h;
  h.count = serial::read_u32(is);
  h.channels = serial::read_u32(is);
  h.taps = serial::read_u32(is);
  h.wprime = serial::read_u32(is);
  h.fs_hz = serial::read_u32(is);
  if (h.wprime != kSlotCount)
    throw VersionMismatch("dataset slot count " + std::to_string(h.wprime) + " unsupported");
  return h;
}

void check_file_size(const std::string& path, const Header& h) {
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw IoFailure("cannot stat " + path);
  const size_t record =
      4 + 8 + static_cast<size_t>(kSlotCount) * (kWallParams + 1) * 4 +
      static_cast<size_t>(h.channels) * h.taps * 4;
  const size_t expected = kHeaderBytes + static_cast<size_t>(h.count) * record;
  if (actual != expected)
    throw TruncatedFile(path + ": expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(actual));
}

void write_manifest(const GenerateConfig& cfg, uint32_t total) {
  nlohmann::json j;
  j["format_version"] = kDatasetVersion;
  j["sample_count"] = total;
  j["seed"] = cfg.seed;
  j["first_index"] = cfg.first_index;
  j["channels"] = kMicCount;
  j["taps"] = cfg.sim.taps;
  j["fs_hz"] = static_cast<uint32_t>(cfg.sim.fs);
  j["max_order"] = cfg.sim.max_order;
  j["reflection_coeff_range"] = {kCoeffLo, kCoeffHi};
  nlohmann::json fams;
  for (int f = 0; f < 4; ++f)
    fams[shape_family_name(static_cast<ShapeFamily>(f))] = cfg.counts[static_cast<size_t>(f)];
  j["families"] = fams;
  std::ofstream os(cfg.out_path + ".manifest.json");
  if (!os) throw IoFailure("cannot open " + cfg.out_path + ".manifest.json for writing");
  os << j.dump(2) << "\n";
  if (!os) throw IoFailure("write failed on " + cfg.out_path + ".manifest.json");
}

}  // namespace

Sample make_sample(uint64_t seed, uint32_t index, ShapeFamily family, const SimConfig& sim) {
  const uint64_t rs = mix_seed(seed, index);
  const RoomModel room = sample_room(family, rs);

  Rng rng(mix_seed(rs, kCoeffStream));
  std::vector<double> coeffs(room.walls.size());
  for (double& c : coeffs) c = rng.uniform(kCoeffLo, kCoeffHi);

  Sample s;
  s.shape_id = static_cast<uint8_t>(family);
  s.num_walls = static_cast<uint8_t>(room.walls.size());
  s.seed = rs;
  const WallMatrix wm = room_to_wall_matrix(room);
  for (size_t w = 0; w < kSlotCount; ++w) {
    for (size_t k = 0; k < kWallParams; ++k)
      s.a[w][k] = static_cast<float>(w < static_cast<size_t>(wm.wall_count) ? wm.a[w][k] : 0.0);
    s.p[w] = w < static_cast<size_t>(wm.wall_count) ? 1.0f : 0.0f;
  }
  s.rir = simulate_rir(room, coeffs, sim);
  return s;
}

std::vector<ShapeFamily> family_schedule(const std::array<uint32_t, 4>& counts) {
  std::vector<ShapeFamily> out;
  out.reserve(counts[0] + counts[1] + counts[2] + counts[3]);
  std::array<uint32_t, 4> left = counts;
  for (bool any = true; any;) {
    any = false;
    for (int f = 0; f < 4; ++f) {
      if (left[static_cast<size_t>(f)] == 0) continue;
      left[static_cast<size_t>(f)]--;
      out.push_back(static_cast<ShapeFamily>(f));
      any = true;
    }
  }
  return out;
}

void generate_dataset(const GenerateConfig& cfg) {
  const std::vector<ShapeFamily> schedule = family_schedule(cfg.counts);
  const auto total = static_cast<uint32_t>(schedule.size());
  if (total == 0) throw InvalidConfig("generate_dataset: all family counts are zero");
  const int threads = std::max(1, cfg.threads);

  std::ofstream os(cfg.out_path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + cfg.out_path + " for writing");
  Header h;
  h.count = total;
  h.channels = kMicCount;
  h.taps = static_cast<uint32_t>(cfg.sim.taps);
  h.wprime = kSlotCount;
  h.fs_hz = static_cast<uint32_t>(cfg.sim.fs);
  write_header(os, h);

  if (threads == 1) {
    for (uint32_t i = 0; i < total; ++i)
      write_record(os, make_sample(cfg.seed, cfg.first_index + i, schedule[i], cfg.sim));
  } else {
    // Workers fill a bounded reorder buffer; the writer drains it in index
    // order so the file bytes match the single-threaded output.
    std::mutex mu;
    std::condition_variable cv_produce, cv_consume;
    std::map<uint32_t, Sample> ready;
    uint32_t next_claim = 0;
    uint32_t next_write = 0;
    const size_t max_pending = static_cast<size_t>(2 * threads);

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          uint32_t i;
          {
            std::unique_lock lk(mu);
            if (next_claim >= total) return;
            cv_produce.wait(lk, [&] {
              return next_claim >= total || ready.size() < max_pending;
            });
            if (next_claim >= total) return;
            i = next_claim++;
          }
          Sample s = make_sample(cfg.seed, cfg.first_index + i, schedule[i], cfg.sim);
          {
            std::lock_guard lk(mu);
            ready.emplace(i, std::move(s));
          }
          cv_consume.notify_one();
        }
      });
    }
    {
      std::unique_lock lk(mu);
      while (next_write < total) {
        cv_consume.wait(lk, [&] { return ready.count(next_write) > 0; });
        Sample s = std::move(ready.at(next_write));
        ready.erase(next_write);
        ++next_write;
        cv_produce.notify_all();
        lk.unlock();
        write_record(os, s);
        lk.lock();
      }
    }
    for (auto& th : pool) th.join();
  }

  os.flush();
  if (!os) throw IoFailure("write failed on " + cfg.out_path);
  os.close();
  write_manifest(cfg, total);
}

void normalize_input(std::span<float> rir) {
  float peak = 0.0f;
  for (float v : rir) peak = std::max(peak, std::abs(v));
  if (peak == 0.0f) throw AllZeroInput("normalize_input: signal is all zero");
  for (float& v : rir) v /= peak;
}

void write_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  Header h;
  h.count = static_cast<uint32_t>(samples.size());
  h.channels = kMicCount;
  h.taps = samples.empty() ? 1024 : static_cast<uint32_t>(samples[0].rir.size() / kMicCount);
  h.wprime = kSlotCount;
  h.fs_hz = static_cast<uint32_t>(SimConfig{}.fs);
  write_header(os, h);
  for (const Sample& s : samples) write_record(os, s);
  os.flush();
  if (!os) throw IoFailure("write failed on " + path);
}

std::vector<Sample> read_dataset(const std::string& path) {
  DatasetReader reader(path);
  std::vector<Sample> out;
  out.reserve(reader.size());
  for (size_t i = 0; i < reader.size(); ++i) out.push_back(reader.read(i));
  return out;
}

struct DatasetReader::Impl {
  std::ifstream is;
  size_t record_bytes = 0;
};

DatasetReader::DatasetReader(const std::string& path) : impl_(new Impl) {
  impl_->is.open(path, std::ios::binary);
  if (!impl_->is) {
    delete impl_;
    throw IoFailure("cannot open " + path);
  }
  try {
    const Header h = read_header(impl_->is, path);
    check_file_size(path, h);
    count_ = h.count;
    channels_ = h.channels;
    taps_ = h.taps;
    impl_->record_bytes = 4 + 8 + static_cast<size_t>(kSlotCount) * (kWallParams + 1) * 4 +
                          static_cast<size_t>(channels_) * taps_ * 4;
  } catch (...) {
    delete impl_;
    throw;
  }
}

DatasetReader::~DatasetReader() { delete impl_; }

Sample DatasetReader::read(size_t index) {
  if (index >= count_) throw InvalidConfig("DatasetReader: index out of range");
  impl_->is.clear();
  impl_->is.seekg(static_cast<std::streamoff>(kHeaderBytes + index * impl_->record_bytes));
  return read_record(impl_->is, channels_, taps_);
}

}  // namespace rgi
