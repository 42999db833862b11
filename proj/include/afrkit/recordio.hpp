#pragma once

// Multi-lead ECG recording container, the two on-disk recording formats, and
// the cohort manifest.
//
// Flat-binary format: little-endian int32 amplitude counts, lead-interleaved
// (frame = one sample per lead in lead order), with a JSON sidecar
// `<file>.json` declaring fs, quant, leads and per-lead sample count.
// Microvolt amplitude = count * quant.
//
// CSV format: optional leading "# fs=<hz> quant=<uv>" comment, a header row
// of the 12 lead names, then one row per sample with amplitudes already in
// microvolts.

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/csv.hpp"

namespace afrkit {

static_assert(std::endian::native == std::endian::little,
              "flat-binary recording IO assumes a little-endian host");

inline const std::vector<std::string>& standard_leads() {
  static const std::vector<std::string> leads = {"I",   "II",  "III", "aVR",
                                                 "aVL", "aVF", "V1",  "V2",
                                                 "V3",  "V4",  "V5",  "V6"};
  return leads;
}

inline constexpr std::size_t kNumLeads = 12;

struct Recording {
  std::string patient_id;
  double fs = 0.0;        // Hz
  double quant = 0.03;    // microvolts per count
  std::vector<std::string> leads = standard_leads();
  std::vector<std::vector<double>> samples;  // [lead][sample], microvolts

  std::size_t sample_count() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_s() const { return static_cast<double>(sample_count()) / fs; }

  void validate() const {
    if (fs <= 0) throw MalformedHeader("fs must be positive");
    if (leads != standard_leads())
      throw LeadCountMismatch("expected the standard 12-lead set in fixed order");
    if (samples.size() != kNumLeads)
      throw LeadCountMismatch("expected 12 sample arrays, found " +
                              std::to_string(samples.size()));
    for (const auto& lead : samples)
      if (lead.size() != sample_count())
        throw TruncatedData("leads have unequal sample counts");
  }
};

enum class RecordingFormat { FlatBinary, Csv };

inline RecordingFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return RecordingFormat::Csv;
  return RecordingFormat::FlatBinary;
}

// --- flat-binary sidecar -----------------------------------------------------

namespace detail {

// The sidecar is plain JSON with a fixed flat layout; parsed with a small
// scanner instead of a full JSON parser.
inline std::string sidecar_field(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  auto pos = text.find(needle);
  if (pos == std::string::npos) throw MalformedHeader("sidecar missing field " + key);
  pos = text.find(':', pos);
  if (pos == std::string::npos) throw MalformedHeader("sidecar field " + key + " malformed");
  ++pos;
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos >= text.size()) throw MalformedHeader("sidecar field " + key + " malformed");
  if (text[pos] == '"') {
    const auto end = text.find('"', pos + 1);
    if (end == std::string::npos) throw MalformedHeader("sidecar field " + key + " malformed");
    return text.substr(pos + 1, end - pos - 1);
  }
  if (text[pos] == '[') {
    const auto end = text.find(']', pos);
    if (end == std::string::npos) throw MalformedHeader("sidecar field " + key + " malformed");
    return text.substr(pos, end - pos + 1);
  }
  std::size_t end = pos;
  while (end < text.size() && text[end] != ',' && text[end] != '}' && text[end] != '\n') ++end;
  return trim(text.substr(pos, end - pos));
}

inline std::vector<std::string> sidecar_string_array(const std::string& raw) {
  std::vector<std::string> out;
  std::string cur;
  bool in_string = false;
  for (char c : raw) {
    if (c == '"') {
      if (in_string) out.push_back(cur);
      cur.clear();
      in_string = !in_string;
    } else if (in_string) {
      cur.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

inline void save_recording(const Recording& rec, const std::string& path,
                           RecordingFormat format) {
  rec.validate();
  if (format == RecordingFormat::Csv) {
    CsvWriter w(path);
    w.comment("fs=" + format_double(rec.fs) + " quant=" + format_double(rec.quant));
    w.row(rec.leads);
    const std::size_t n = rec.sample_count();
    std::vector<std::string> row(kNumLeads);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < kNumLeads; ++l) row[l] = format_double(rec.samples[l][i]);
      w.row(row);
    }
    return;
  }
  // flat binary: counts are amplitudes divided by quant, rounded to nearest.
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::size_t n = rec.sample_count();
  std::vector<std::int32_t> frame(kNumLeads);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < kNumLeads; ++l)
      frame[l] = static_cast<std::int32_t>(std::llround(rec.samples[l][i] / rec.quant));
    out.write(reinterpret_cast<const char*>(frame.data()),
              static_cast<std::streamsize>(sizeof(std::int32_t) * kNumLeads));
  }
  out.close();
  std::ofstream sc(path + ".json", std::ios::binary);
  if (!sc) throw IoError("cannot write " + path + ".json");
  sc << "{\n";
  sc << "  \"patient_id\": \"" << rec.patient_id << "\",\n";
  sc << "  \"fs\": " << format_double(rec.fs) << ",\n";
  sc << "  \"quant\": " << format_double(rec.quant) << ",\n";
  sc << "  \"n_samples\": " << n << ",\n";
  sc << "  \"leads\": [";
  for (std::size_t l = 0; l < kNumLeads; ++l)
    sc << (l ? ", " : "") << "\"" << rec.leads[l] << "\"";
  sc << "]\n}\n";
}

inline Recording load_recording(const std::string& path, RecordingFormat format) {
  Recording rec;
  if (format == RecordingFormat::Csv) {
    const CsvTable table = read_csv(path);
    rec.fs = 0.0;
    rec.quant = 0.03;
    for (const auto& comment : table.comments) {
      for (const auto& token : split(comment, ' ')) {
        const auto kv = split(token, '=');
        if (kv.size() != 2) continue;
        if (kv[0] == "fs") rec.fs = parse_double_or_missing(kv[1]);
        if (kv[0] == "quant") rec.quant = parse_double_or_missing(kv[1]);
      }
    }
    if (rec.fs <= 0) throw MalformedHeader(path + ": missing '# fs=<hz>' comment");
    if (table.header.size() != kNumLeads)
      throw LeadCountMismatch(path + ": expected 12 lead columns, found " +
                              std::to_string(table.header.size()));
    if (table.header != standard_leads())
      throw MalformedHeader(path + ": lead names must be the standard 12-lead order");
    rec.samples.assign(kNumLeads, {});
    for (auto& lead : rec.samples) lead.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      if (row.size() != kNumLeads)
        throw TruncatedData(path + ": row with " + std::to_string(row.size()) + " cells");
      for (std::size_t l = 0; l < kNumLeads; ++l) {
        const double v = parse_double_or_missing(row[l]);
        if (is_missing(v)) throw TruncatedData(path + ": empty sample cell");
        rec.samples[l].push_back(v);
      }
    }
    rec.validate();
    return rec;
  }

  std::ifstream sc(path + ".json");
  if (!sc) throw MalformedHeader(path + ": missing sidecar " + path + ".json");
  std::string sidecar((std::istreambuf_iterator<char>(sc)), std::istreambuf_iterator<char>());
  rec.patient_id = detail::sidecar_field(sidecar, "patient_id");
  rec.fs = parse_double_or_missing(detail::sidecar_field(sidecar, "fs"));
  rec.quant = parse_double_or_missing(detail::sidecar_field(sidecar, "quant"));
  const double n_decl_raw = parse_double_or_missing(detail::sidecar_field(sidecar, "n_samples"));
  const auto n_declared = static_cast<std::size_t>(n_decl_raw);
  const auto leads = detail::sidecar_string_array(detail::sidecar_field(sidecar, "leads"));
  if (rec.fs <= 0 || rec.quant <= 0) throw MalformedHeader(path + ": bad fs/quant in sidecar");
  if (leads.size() != kNumLeads)
    throw LeadCountMismatch(path + ": sidecar declares " + std::to_string(leads.size()) +
                            " leads");
  if (leads != standard_leads())
    throw MalformedHeader(path + ": sidecar lead order is not the standard 12-lead set");

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  const std::size_t frame_bytes = sizeof(std::int32_t) * kNumLeads;
  if (bytes != n_declared * frame_bytes)
    throw TruncatedData(path + ": declared " + std::to_string(n_declared) +
                        " samples, file holds " + std::to_string(bytes / frame_bytes));
  in.seekg(0);
  rec.samples.assign(kNumLeads, std::vector<double>(n_declared));
  std::vector<std::int32_t> frame(kNumLeads);
  for (std::size_t i = 0; i < n_declared; ++i) {
    in.read(reinterpret_cast<char*>(frame.data()), static_cast<std::streamsize>(frame_bytes));
    if (!in) throw TruncatedData(path + ": short read");
    for (std::size_t l = 0; l < kNumLeads; ++l)
      rec.samples[l][i] = static_cast<double>(frame[l]) * rec.quant;
  }
  rec.validate();
  return rec;
}

inline Recording load_recording(const std::string& path) {
  return load_recording(path, format_from_path(path));
}

// Slice [start_s, start_s + dur_s) identically across all leads.
inline Recording window(const Recording& rec, double start_s, double dur_s) {
  if (start_s < 0 || dur_s <= 0)
    throw OutOfBounds("window start/duration must be non-negative");
  const auto begin = static_cast<std::size_t>(std::llround(start_s * rec.fs));
  const auto count = static_cast<std::size_t>(std::llround(dur_s * rec.fs));
  if (begin + count > rec.sample_count())
    throw OutOfBounds("window [" + format_double_short(start_s) + ", " +
                      format_double_short(start_s + dur_s) + ") exceeds recording of " +
                      format_double_short(rec.duration_s()) + " s");
  Recording out;
  out.patient_id = rec.patient_id;
  out.fs = rec.fs;
  out.quant = rec.quant;
  out.leads = rec.leads;
  out.samples.reserve(kNumLeads);
  for (const auto& lead : rec.samples)
    out.samples.emplace_back(lead.begin() + static_cast<long>(begin),
                             lead.begin() + static_cast<long>(begin + count));
  return out;
}

// --- cohort manifest ---------------------------------------------------------

struct ManifestEntry {
  std::string patient_id;
  std::string recording_path;
  std::optional<int> afr_label;       // 0 or 1
  std::optional<double> age;          // years
  std::optional<char> sex;            // 'M' or 'F'
  std::optional<double> followup_days;
};

struct CohortManifest {
  std::vector<ManifestEntry> entries;

  std::size_t labeled_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.afr_label.has_value();
    return n;
  }
};

inline CohortManifest load_manifest(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_id = table.column("patient_id");
  const int c_path = table.column("recording_path");
  if (c_id < 0 || c_path < 0)
    throw MalformedHeader(path + ": manifest needs patient_id and recording_path columns");
  const int c_label = table.column("afr_label");
  const int c_age = table.column("age");
  const int c_sex = table.column("sex");
  const int c_follow = table.column("followup_days");

  CohortManifest manifest;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    ManifestEntry e;
    e.patient_id = trim(row.at(static_cast<std::size_t>(c_id)));
    e.recording_path = trim(row.at(static_cast<std::size_t>(c_path)));
    if (e.patient_id.empty()) throw MalformedHeader(path + ": empty patient_id");
    if (!seen.insert(e.patient_id).second)
      throw DuplicatePatient(e.patient_id + " appears more than once");
    auto cell = [&](int col) -> std::string {
      if (col < 0 || static_cast<std::size_t>(col) >= row.size()) return "";
      return trim(row[static_cast<std::size_t>(col)]);
    };
    const std::string label = cell(c_label);
    if (!label.empty()) {
      if (label != "0" && label != "1")
        throw BadLabel("afr_label for " + e.patient_id + " is '" + label + "'");
      e.afr_label = (label == "1") ? 1 : 0;
    }
    const std::string age = cell(c_age);
    if (!age.empty()) e.age = parse_double_or_missing(age);
    const std::string sex = cell(c_sex);
    if (!sex.empty()) {
      if (sex != "M" && sex != "F")
        throw BadLabel("sex for " + e.patient_id + " is '" + sex + "'");
      e.sex = sex[0];
    }
    const std::string follow = cell(c_follow);
    if (!follow.empty()) e.followup_days = parse_double_or_missing(follow);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

inline void save_manifest(const CohortManifest& manifest, const std::string& path) {
  CsvWriter w(path);
  w.row({"patient_id", "recording_path", "afr_label", "age", "sex", "followup_days"});
  for (const auto& e : manifest.entries) {
    w.row({e.patient_id, e.recording_path,
           e.afr_label ? std::to_string(*e.afr_label) : "",
           e.age ? format_double_short(*e.age) : "",
           e.sex ? std::string(1, *e.sex) : "",
           e.followup_days ? format_double_short(*e.followup_days) : ""});
  }
}

}  // namespace afrkit
