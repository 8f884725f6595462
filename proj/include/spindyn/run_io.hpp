#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spindyn {

// Hash of a file's raw bytes (FNV-1a), as 16 hex digits.
std::string hash_file(const std::string& path);

// Monotonic wall clock, for manifest timings.
inline double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Minimal CSV writer: fixed column order, 17-significant-digit floats, '\n'
// line endings.  Output is byte-identical across runs and thread counts.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void field(long v);
  void field(double v);
  void field(const std::string& v);
  void end_row();
  void close();

 private:
  std::string path_;
  std::string buf_;
  bool row_open_ = false;
  std::size_t ncols_, col_ = 0;
  bool closed_ = false;
};

// Run manifest (run.json): inputs, parameters, outputs, and the versioned
// tolerance set, so results are attributable and reproducible.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::string model_path,
              std::uint64_t seed);
  void set_param(const std::string& key, const std::string& value);
  void set_param(const std::string& key, double value);
  void set_param(const std::string& key, long value);
  void add_output(const std::string& file);
  void write(const std::string& out_dir, double wall_seconds) const;

 private:
  std::string subcommand_, model_path_, model_hash_;
  std::uint64_t seed_;
  std::map<std::string, std::string> params_;
  std::vector<std::string> outputs_;
};

} // namespace spindyn
