#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedstone/corruption/kinds.hpp"
#include "fedstone/data/dataset.hpp"
#include "fedstone/data/partition.hpp"
#include "fedstone/errors.hpp"

// Dataset manifest, one record per sample:
//   # fedstone dataset manifest v1
//   # height=32 width=32 channels=3
//   id,source,class_name,split,seed[,kind,severity]
// Pixels are not stored; they regenerate from (seed, id).

namespace fedstone {

struct ManifestRecord {
  std::uint64_t id = 0;
  Source source = Source::kA;
  std::string class_name;
  std::string split;
  std::uint64_t seed = 0;
  std::optional<CorruptionSpec> corruption;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  ImageGeometry geometry;
  std::vector<ManifestRecord> records;
  std::optional<std::uint64_t> corruption_seed;
  std::string tables_version;

  bool has_corruption_columns() const {
    for (const auto& r : records)
      if (r.corruption) return true;
    return false;
  }
};

inline void append_records(DatasetManifest& m, const std::vector<LabeledSample>& samples,
                           std::string_view split, std::uint64_t seed) {
  for (const auto& s : samples)
    m.records.push_back({s.id, s.source, s.class_name, std::string(split), seed, s.corruption});
}

inline DatasetManifest manifest_for(const DatasetPartition& part, std::uint64_t generation_seed,
                                    const ImageGeometry& geom) {
  DatasetManifest m{geom, {}, std::nullopt, {}};
  append_records(m, part.train, "train", generation_seed);
  append_records(m, part.validation, "validation", generation_seed);
  append_records(m, part.test, "test", generation_seed);
  return m;
}

inline std::string format_manifest(const DatasetManifest& m) {
  const bool corrupt = m.has_corruption_columns();
  std::ostringstream out;
  out << "# fedstone dataset manifest v1\n";
  out << "# height=" << m.geometry.height << " width=" << m.geometry.width
      << " channels=" << m.geometry.channels << "\n";
  if (m.corruption_seed)
    out << "# corruption_seed=" << *m.corruption_seed << " tables=" << m.tables_version << "\n";
  out << "id,source,class_name,split,seed" << (corrupt ? ",kind,severity" : "") << "\n";
  for (const auto& r : m.records) {
    out << r.id << ',' << to_string(r.source) << ',' << r.class_name << ',' << r.split << ','
        << r.seed;
    if (corrupt) {
      if (r.corruption)
        out << ',' << to_string(r.corruption->kind) << ',' << r.corruption->severity;
      else
        out << ",none,0";
    }
    out << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line_no) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw InputError("manifest line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  return std::stoull(s);
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  DatasetManifest m;
  std::size_t line_no = 0;
  bool magic = false, header = false, corrupt = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "# fedstone dataset manifest v1")
        throw InputError("not a fedstone dataset manifest");
      magic = true;
      continue;
    }
    if (line[0] == '#') {
      std::istringstream kv(line.substr(1));
      std::string tok;
      while (kv >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        if (key == "height") m.geometry.height = detail::parse_u64(value, line_no);
        else if (key == "width") m.geometry.width = detail::parse_u64(value, line_no);
        else if (key == "channels") m.geometry.channels = detail::parse_u64(value, line_no);
        else if (key == "corruption_seed") m.corruption_seed = detail::parse_u64(value, line_no);
        else if (key == "tables") m.tables_version = value;
      }
      continue;
    }
    if (!header) {
      if (line == "id,source,class_name,split,seed") corrupt = false;
      else if (line == "id,source,class_name,split,seed,kind,severity") corrupt = true;
      else throw InputError("manifest line " + std::to_string(line_no) + ": bad column header");
      header = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != (corrupt ? 7u : 5u))
      throw InputError("manifest line " + std::to_string(line_no) + ": wrong field count");
    ManifestRecord r;
    r.id = detail::parse_u64(f[0], line_no);
    r.source = parse_source(f[1]);
    r.class_name = f[2];
    r.split = f[3];
    r.seed = detail::parse_u64(f[4], line_no);
    if (id_source(r.id) != r.source ||
        class_label(r.source, r.class_name) != id_label(r.id))
      throw InputError("manifest line " + std::to_string(line_no) +
                       ": id does not match source/class");
    if (corrupt && f[5] != "none") {
      CorruptionSpec spec{parse_corruption_kind(f[5]),
                          static_cast<int>(detail::parse_u64(f[6], line_no))};
      spec.validate();
      r.corruption = spec;
    }
    m.records.push_back(std::move(r));
  }
  if (!magic || !header) throw InputError("manifest is missing its header");
  return m;
}

/// Regenerates the clean pixels of every record.
inline std::vector<LabeledSample> materialize(const DatasetManifest& m) {
  std::vector<LabeledSample> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) out.push_back(make_sample(r.seed, r.id, m.geometry));
  return out;
}

}  // namespace fedstone
