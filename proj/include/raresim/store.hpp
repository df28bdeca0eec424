#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raresim/dynamics.hpp"
#include "raresim/potentials.hpp"

namespace raresim {

// One persisted trajectory. Noises are optional: externally produced paths
// carry positions only and noises can be reconstructed from the manifest's
// potential via recover_noises.
struct TrajectoryRecord {
  int schema_version = 1;
  std::uint64_t seed = 0;
  bool success = false;
  Channel channel = Channel::none;
  std::vector<Position2> positions;
  std::optional<std::vector<Vec2>> noises;

  static TrajectoryRecord from_trajectory(const Trajectory& traj, bool keep_noises = true);
  Trajectory to_trajectory() const;
  std::uint64_t content_hash() const;
  void validate() const;
};

// Dataset-level metadata; merges refuse files whose values differ.
struct DatasetHeader {
  int schema_version = 1;
  double dt = 0.0;
  int horizon = 0;  // N
  std::uint64_t potential_hash = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<TrajectoryRecord> records;

  std::map<Channel, long> channel_counts() const;
};

// Newline-delimited text: one self-describing header line, then one record
// per line. Floats use shortest round-trip decimals; the round trip is
// bit-exact. Writes are atomic (temp file + rename).
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

struct MergeResult {
  Dataset dataset;
  long duplicates_removed = 0;
};

// Concatenates datasets with identical (dt, horizon, potential hash),
// deduplicating by (seed, content hash). Incompatible headers raise
// MergeConflict naming the mismatched fields.
MergeResult merge_datasets(const std::vector<std::filesystem::path>& paths);

// Reproducibility envelope for one CLI run: flat key=value text file.
// `created_unix` is informational and excluded from reproducibility
// comparisons; everything else pins the run.
struct RunManifest {
  int schema_version = 1;
  std::string command;
  std::map<std::string, std::string> fields;

  void set(const std::string& key, const std::string& value) { fields[key] = value; }
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_u64(const std::string& key, std::uint64_t value);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool has(const std::string& key) const { return fields.count(key) != 0; }
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

// Embeds/extracts the simulation config; load re-derives epsilon and fails
// if the stored value disagrees beyond 1e-15 relative.
void manifest_put_sim_config(RunManifest& manifest, const SimConfig& cfg);
SimConfig manifest_get_sim_config(const RunManifest& manifest);
void manifest_put_potential(RunManifest& manifest, const PotentialSpec& spec);
PotentialSpec manifest_get_potential(const RunManifest& manifest);

std::uint64_t file_content_hash(const std::filesystem::path& path);

}  // namespace raresim
