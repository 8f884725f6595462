#include "spindyn/run_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spindyn/defaults.hpp"
#include "spindyn/errors.hpp"
#include "spindyn/model_file.hpp"
#include "spindyn/rng.hpp"

namespace spindyn {

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open file for hashing: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns)
    : path_(path), ncols_(columns.size()) {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (k) buf_ += ',';
    buf_ += columns[k];
  }
  buf_ += '\n';
}

CsvWriter::~CsvWriter() {
  if (!closed_) close();
}

void CsvWriter::field(long v) { field(std::to_string(v)); }
void CsvWriter::field(double v) { field(fmt17(v)); }

void CsvWriter::field(const std::string& v) {
  if (col_ > 0) buf_ += ',';
  buf_ += v;
  ++col_;
  row_open_ = true;
}

void CsvWriter::end_row() {
  if (col_ != ncols_)
    throw error("csv row has " + std::to_string(col_) + " fields, expected " +
                std::to_string(ncols_));
  buf_ += '\n';
  col_ = 0;
  row_open_ = false;
}

void CsvWriter::close() {
  closed_ = true;
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw error("cannot write " + path_);
  out << buf_;
}

RunManifest::RunManifest(std::string subcommand, std::string model_path,
                         std::uint64_t seed)
    : subcommand_(std::move(subcommand)), model_path_(std::move(model_path)),
      seed_(seed) {
  model_hash_ = hash_file(model_path_);
}

void RunManifest::set_param(const std::string& key, const std::string& value) {
  params_[key] = value;
}
void RunManifest::set_param(const std::string& key, double value) {
  params_[key] = fmt17(value);
}
void RunManifest::set_param(const std::string& key, long value) {
  params_[key] = std::to_string(value);
}
void RunManifest::add_output(const std::string& file) {
  outputs_.push_back(file);
}

void RunManifest::write(const std::string& out_dir, double wall_seconds) const {
  nlohmann::json j;
  j["subcommand"] = subcommand_;
  j["model_file"] = model_path_;
  j["model_hash"] = model_hash_;
  j["seed"] = seed_;
  j["defaults_version"] = defaults::version;
  j["wall_time_s"] = wall_seconds;
  j["parameters"] = params_;
  j["outputs"] = outputs_;
  std::ofstream out(out_dir + "/run.json", std::ios::binary);
  if (!out) throw error("cannot write run manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

} // namespace spindyn
