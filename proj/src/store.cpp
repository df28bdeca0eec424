#include "raresim/store.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "raresim/text_io.hpp"

namespace raresim {

TrajectoryRecord TrajectoryRecord::from_trajectory(const Trajectory& traj, bool keep_noises) {
  TrajectoryRecord rec;
  rec.seed = traj.seed;
  rec.success = traj.success;
  rec.channel = classify_channel(traj);
  rec.positions = traj.positions;
  if (keep_noises) rec.noises = traj.noises;
  return rec;
}

Trajectory TrajectoryRecord::to_trajectory() const {
  Trajectory traj;
  traj.seed = seed;
  traj.success = success;
  traj.positions = positions;
  if (noises) traj.noises = *noises;
  return traj;
}

std::uint64_t TrajectoryRecord::content_hash() const {
  std::uint64_t h = fnv1a(positions.data(), positions.size() * sizeof(Position2));
  if (noises) h = fnv1a(noises->data(), noises->size() * sizeof(Vec2), h);
  return h;
}

void TrajectoryRecord::validate() const {
  if (positions.empty()) throw ContractViolation("trajectory record needs at least one position");
  if (noises && noises->size() != positions.size() - 1)
    throw ContractViolation("noises must be exactly one shorter than positions");
}

std::map<Channel, long> Dataset::channel_counts() const {
  std::map<Channel, long> counts;
  for (const TrajectoryRecord& rec : records) ++counts[rec.channel];
  return counts;
}

namespace {

std::string channel_code(Channel c) {
  switch (c) {
    case Channel::upper: return "U";
    case Channel::lower: return "L";
    case Channel::none: return "-";
  }
  return "-";
}

void append_pairs(std::string& out, const std::vector<Vec2>& pairs) {
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (k > 0) out += ';';
    out += format_double(pairs[k].x);
    out += ',';
    out += format_double(pairs[k].y);
  }
}

std::vector<Vec2> parse_pairs(std::string_view text, long line_no) {
  std::vector<Vec2> out;
  if (text.empty()) return out;
  for (auto pair : split(text, ';')) {
    const auto xy = split(pair, ',');
    if (xy.size() != 2) throw ParseError("expected x,y pair", line_no);
    out.push_back({parse_double(xy[0], line_no), parse_double(xy[1], line_no)});
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::string out = "#raresim-trajset v" + std::to_string(dataset.header.schema_version);
  out += " dt=" + format_double(dataset.header.dt);
  out += " horizon=" + std::to_string(dataset.header.horizon);
  out += " potential=" + hash_hex(dataset.header.potential_hash);
  out += '\n';
  for (const TrajectoryRecord& rec : dataset.records) {
    rec.validate();
    out += "seed=" + std::to_string(rec.seed);
    out += " success=" + std::string(rec.success ? "1" : "0");
    out += " channel=" + channel_code(rec.channel);
    out += " pos=";
    append_pairs(out, rec.positions);
    if (rec.noises) {
      out += " noises=";
      append_pairs(out, *rec.noises);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = split(text, '\n');
  if (lines.empty()) throw ParseError("empty dataset file", 1);

  Dataset dataset;
  {
    const auto fields = split(lines[0], ' ');
    if (fields.empty() || fields[0].substr(0, 18) != "#raresim-trajset v")
      throw ParseError("not a raresim trajectory dataset", 1);
    const long version = parse_int(fields[0].substr(18), 1);
    if (version != 1)
      throw ParseError("unsupported dataset version " + std::to_string(version), 1);
    dataset.header.schema_version = static_cast<int>(version);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto eq = fields[k].find('=');
      if (eq == std::string_view::npos) throw ParseError("bad header field", 1);
      const auto key = fields[k].substr(0, eq);
      const auto value = fields[k].substr(eq + 1);
      if (key == "dt")
        dataset.header.dt = parse_double(value, 1);
      else if (key == "horizon")
        dataset.header.horizon = static_cast<int>(parse_int(value, 1));
      else if (key == "potential")
        dataset.header.potential_hash = parse_u64("0", 1),
        dataset.header.potential_hash = [&] {
          std::uint64_t h = 0;
          for (char ch : value) {
            h <<= 4;
            if (ch >= '0' && ch <= '9')
              h |= static_cast<std::uint64_t>(ch - '0');
            else if (ch >= 'a' && ch <= 'f')
              h |= static_cast<std::uint64_t>(ch - 'a' + 10);
            else
              throw ParseError("bad potential hash", 1);
          }
          return h;
        }();
    }
  }

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto line = lines[li];
    const long line_no = static_cast<long>(li + 1);
    if (line.empty()) continue;
    TrajectoryRecord rec;
    bool have_pos = false;
    for (auto field : split(line, ' ')) {
      if (field.empty()) continue;
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key=value field", line_no);
      const auto key = field.substr(0, eq);
      const auto value = field.substr(eq + 1);
      if (key == "seed")
        rec.seed = parse_u64(value, line_no);
      else if (key == "success")
        rec.success = parse_int(value, line_no) != 0;
      else if (key == "channel")
        rec.channel = channel_from_string(std::string(value));
      else if (key == "pos") {
        rec.positions = parse_pairs(value, line_no);
        have_pos = true;
      } else if (key == "noises")
        rec.noises = parse_pairs(value, line_no);
      else
        throw ParseError("unknown field '" + std::string(key) + "'", line_no);
    }
    if (!have_pos || rec.positions.empty())
      throw ParseError("record has no positions", line_no);
    try {
      rec.validate();
    } catch (const ContractViolation& err) {
      throw ParseError(err.what(), line_no);
    }
    dataset.records.push_back(std::move(rec));
  }
  return dataset;
}

MergeResult merge_datasets(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ContractViolation("merge_datasets: no input files");
  MergeResult result;
  bool first = true;
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  for (const auto& path : paths) {
    Dataset dataset = read_dataset(path);
    if (first) {
      result.dataset.header = dataset.header;
      first = false;
    } else {
      std::string mismatches;
      const DatasetHeader& a = result.dataset.header;
      const DatasetHeader& b = dataset.header;
      if (a.dt != b.dt) mismatches += " dt";
      if (a.horizon != b.horizon) mismatches += " horizon";
      if (a.potential_hash != b.potential_hash) mismatches += " potential";
      if (!mismatches.empty())
        throw MergeConflict("dataset '" + path.string() +
                            "' is incompatible; mismatched fields:" + mismatches);
    }
    for (TrajectoryRecord& rec : dataset.records) {
      const auto key = std::make_pair(rec.seed, rec.content_hash());
      if (!seen.insert(key).second) {
        ++result.duplicates_removed;
        continue;
      }
      result.dataset.records.push_back(std::move(rec));
    }
  }
  return result;
}

void RunManifest::set_double(const std::string& key, double value) {
  fields[key] = format_double(value);
}
void RunManifest::set_int(const std::string& key, long long value) {
  fields[key] = std::to_string(value);
}
void RunManifest::set_u64(const std::string& key, std::uint64_t value) {
  fields[key] = std::to_string(value);
}
const std::string& RunManifest::get(const std::string& key) const {
  const auto it = fields.find(key);
  if (it == fields.end()) throw ParseError("manifest missing key '" + key + "'");
  return it->second;
}
double RunManifest::get_double(const std::string& key) const { return parse_double(get(key)); }
long long RunManifest::get_int(const std::string& key) const { return parse_int(get(key)); }
std::uint64_t RunManifest::get_u64(const std::string& key) const { return parse_u64(get(key)); }

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::string out = "#raresim-manifest v" + std::to_string(manifest.schema_version) + "\n";
  out += "command=" + manifest.command + "\n";
  for (const auto& [key, value] : manifest.fields) out += key + "=" + value + "\n";
  write_file_atomic(path, out);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0].substr(0, 19) != "#raresim-manifest v")
    throw ParseError("not a raresim manifest", 1);
  RunManifest manifest;
  manifest.schema_version = static_cast<int>(parse_int(lines[0].substr(19), 1));
  if (manifest.schema_version != 1)
    throw ParseError("unsupported manifest version", 1);
  long line_no = 1;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    ++line_no;
    const auto line = lines[li];
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    const std::string key(line.substr(0, eq));
    const std::string value(line.substr(eq + 1));
    if (key == "command")
      manifest.command = value;
    else
      manifest.fields[key] = value;
  }
  return manifest;
}

void manifest_put_sim_config(RunManifest& manifest, const SimConfig& cfg) {
  manifest.set_double("sim.temperature", cfg.temperature);
  manifest.set_double("sim.mass", cfg.mass);
  manifest.set_double("sim.damping", cfg.damping);
  manifest.set_double("sim.dt", cfg.dt);
  manifest.set_int("sim.horizon", cfg.max_steps);
  manifest.set_double("sim.delta", cfg.capture_radius);
  manifest.set_double("sim.start_radius", cfg.start_radius);
  manifest.set_int("sim.stop_at_capture", cfg.stop_at_capture ? 1 : 0);
  manifest.set_double("sim.a.x", cfg.start_center.x);
  manifest.set_double("sim.a.y", cfg.start_center.y);
  manifest.set_double("sim.b.x", cfg.target.x);
  manifest.set_double("sim.b.y", cfg.target.y);
  manifest.set_u64("sim.seed", cfg.seed);
  manifest.set_double("sim.epsilon", cfg.epsilon());
}

SimConfig manifest_get_sim_config(const RunManifest& manifest) {
  SimConfig cfg;
  cfg.temperature = manifest.get_double("sim.temperature");
  cfg.mass = manifest.get_double("sim.mass");
  cfg.damping = manifest.get_double("sim.damping");
  cfg.dt = manifest.get_double("sim.dt");
  cfg.max_steps = static_cast<int>(manifest.get_int("sim.horizon"));
  cfg.capture_radius = manifest.get_double("sim.delta");
  cfg.start_radius = manifest.get_double("sim.start_radius");
  cfg.stop_at_capture = manifest.get_int("sim.stop_at_capture") != 0;
  cfg.start_center = {manifest.get_double("sim.a.x"), manifest.get_double("sim.a.y")};
  cfg.target = {manifest.get_double("sim.b.x"), manifest.get_double("sim.b.y")};
  cfg.seed = manifest.get_u64("sim.seed");

  const double stored_eps = manifest.get_double("sim.epsilon");
  const double derived = cfg.epsilon();
  if (std::abs(stored_eps - derived) > 1e-15 * std::max(std::abs(stored_eps), std::abs(derived)))
    throw ConfigError("manifest epsilon is inconsistent with T, m, gamma");
  return cfg;
}

void manifest_put_potential(RunManifest& manifest, const PotentialSpec& spec) {
  manifest.set("potential.kind", to_string(spec.kind));
  for (const auto& [key, value] : spec.params) manifest.set_double("potential.p." + key, value);
  manifest.set("potential.hash", hash_hex(spec.content_hash()));
  if (spec.grid) manifest.set("potential.grid", "external");
}

PotentialSpec manifest_get_potential(const RunManifest& manifest) {
  PotentialSpec spec;
  spec.kind = potential_kind_from_string(manifest.get("potential.kind"));
  const std::string prefix = "potential.p.";
  for (const auto& [key, value] : manifest.fields)
    if (key.rfind(prefix, 0) == 0) spec.params[key.substr(prefix.size())] = parse_double(value);
  if (spec.kind == PotentialKind::grid_interpolated)
    throw ConfigError("grid-interpolated potentials cannot be rebuilt from a manifest alone");
  return spec;
}

std::uint64_t file_content_hash(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return fnv1a(text.data(), text.size());
}

}  // namespace raresim
