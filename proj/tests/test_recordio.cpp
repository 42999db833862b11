#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "afrkit/recordio.hpp"
#include "afrkit/synth.hpp"
#include "support/oracles.hpp"

using namespace afrkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("afrkit_recordio_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Recording small_recording(double fs = 500.0, double duration_s = 4.0,
                          std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.fs = fs;
  spec.duration_s = duration_s;
  spec.seed = seed;
  spec.noise_uv = 8.0;
  return generate(spec).first;
}

}  // namespace

TEST_CASE("window slices all leads and preserves metadata") {
  const Recording rec = small_recording();
  const Recording w = window(rec, 1.0, 2.0);
  REQUIRE(w.sample_count() == 1000);
  REQUIRE(w.fs == rec.fs);
  REQUIRE(w.quant == rec.quant);
  REQUIRE(w.duration_s() == Catch::Approx(2.0));
  for (std::size_t l = 0; l < kNumLeads; ++l)
    for (std::size_t i = 0; i < 100; ++i)
      REQUIRE(w.samples[l][i] == rec.samples[l][500 + i]);
}

TEST_CASE("window count/fs arithmetic: 600000 samples at 2 kHz is 300 s") {
  Recording rec;
  rec.fs = 2000.0;
  rec.samples.assign(kNumLeads, std::vector<double>(600000, 0.0));
  REQUIRE(rec.duration_s() == Catch::Approx(300.0));
}

TEST_CASE("window rejects out-of-bounds requests") {
  const Recording rec = small_recording(500.0, 4.0);
  REQUIRE_THROWS_AS(window(rec, 0.0, 300.0), OutOfBounds);
  REQUIRE_THROWS_AS(window(rec, 3.5, 1.0), OutOfBounds);
}

TEST_CASE("windowing twice with zero offset is the identity") {
  const Recording rec = small_recording();
  const Recording once = window(rec, 0.8, 2.0);
  const Recording twice = window(once, 0.0, 2.0);
  REQUIRE(twice.samples == once.samples);
}

TEST_CASE("flat-binary round trip is bit exact") {
  TempDir tmp;
  const Recording rec = small_recording(500.0, 3.0, 11);
  save_recording(rec, tmp.file("r.bin"), RecordingFormat::FlatBinary);
  const Recording back = load_recording(tmp.file("r.bin"), RecordingFormat::FlatBinary);
  REQUIRE(back.fs == rec.fs);
  REQUIRE(back.quant == rec.quant);
  REQUIRE(back.patient_id == rec.patient_id);
  REQUIRE(back.samples == rec.samples);
}

TEST_CASE("csv round trip is bit exact") {
  TempDir tmp;
  const Recording rec = small_recording(500.0, 2.5, 13);
  save_recording(rec, tmp.file("r.csv"), RecordingFormat::Csv);
  const Recording back = load_recording(tmp.file("r.csv"), RecordingFormat::Csv);
  REQUIRE(back.fs == rec.fs);
  REQUIRE(back.samples == rec.samples);
}

TEST_CASE("quantization: raw count 100 at 0.03 uV per count is 3 uV") {
  TempDir tmp;
  Recording rec;
  rec.patient_id = "q";
  rec.fs = 500.0;
  rec.quant = 0.03;
  rec.samples.assign(kNumLeads, std::vector<double>(500, 3.0));  // 100 counts
  save_recording(rec, tmp.file("q.bin"), RecordingFormat::FlatBinary);

  std::ifstream in(tmp.file("q.bin"), std::ios::binary);
  std::int32_t first = 0;
  in.read(reinterpret_cast<char*>(&first), sizeof(first));
  REQUIRE(first == 100);

  const Recording back = load_recording(tmp.file("q.bin"));
  REQUIRE(back.samples[0][0] == Catch::Approx(3.0));
}

TEST_CASE("csv with wrong lead count is rejected") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "# fs=500 quant=0.03\n";
    out << "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5\n";  // 11 leads
    out << "0,0,0,0,0,0,0,0,0,0,0\n";
  }
  REQUIRE_THROWS_AS(load_recording(tmp.file("bad.csv"), RecordingFormat::Csv),
                    LeadCountMismatch);
}

TEST_CASE("truncated binary data is rejected") {
  TempDir tmp;
  const Recording rec = small_recording(500.0, 2.0, 5);
  save_recording(rec, tmp.file("t.bin"), RecordingFormat::FlatBinary);
  fs::resize_file(tmp.file("t.bin"), fs::file_size(tmp.file("t.bin")) - 48);
  REQUIRE_THROWS_AS(load_recording(tmp.file("t.bin")), TruncatedData);
}

TEST_CASE("missing sidecar is a malformed header") {
  TempDir tmp;
  { std::ofstream out(tmp.file("nohdr.bin"), std::ios::binary); out << "xx"; }
  REQUIRE_THROWS_AS(load_recording(tmp.file("nohdr.bin")), MalformedHeader);
}

TEST_CASE("manifest loads labels and demographics, missing cells stay missing") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("manifest.csv"));
    out << "patient_id,recording_path,afr_label,age,sex,followup_days\n";
    for (int i = 0; i < 43; ++i)
      out << "P" << i << ",rec" << i << ".bin," << (i % 2) << "," << (50 + i) << ","
          << (i % 2 ? "M" : "F") << "," << (300 + i) << "\n";
    out << "U0,recu.bin,,,,\n";  // unlabeled, no demographics
  }
  const CohortManifest m = load_manifest(tmp.file("manifest.csv"));
  REQUIRE(m.entries.size() == 44);
  REQUIRE(m.labeled_count() == 43);
  REQUIRE_FALSE(m.entries.back().afr_label.has_value());
  REQUIRE_FALSE(m.entries.back().age.has_value());
  REQUIRE(m.entries[1].afr_label.value() == 1);
  REQUIRE(m.entries[2].age.value() == Catch::Approx(52));
  REQUIRE(m.entries[3].sex.value() == 'M');
}

TEST_CASE("manifest rejects duplicate patients and bad labels") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("dup.csv"));
    out << "patient_id,recording_path\nP1,a.bin\nP1,b.bin\n";
  }
  REQUIRE_THROWS_AS(load_manifest(tmp.file("dup.csv")), DuplicatePatient);
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "patient_id,recording_path,afr_label\nP1,a.bin,2\n";
  }
  REQUIRE_THROWS_AS(load_manifest(tmp.file("bad.csv")), BadLabel);
}

TEST_CASE("manifest round trip preserves entries") {
  TempDir tmp;
  CohortManifest m;
  m.entries.push_back({"A", "a.bin", 1, 63.0, 'F', 320.0});
  m.entries.push_back({"B", "b.bin", std::nullopt, std::nullopt, std::nullopt, std::nullopt});
  save_manifest(m, tmp.file("m.csv"));
  const CohortManifest back = load_manifest(tmp.file("m.csv"));
  REQUIRE(back.entries.size() == 2);
  REQUIRE(back.entries[0].afr_label.value() == 1);
  REQUIRE(back.entries[0].sex.value() == 'F');
  REQUIRE_FALSE(back.entries[1].age.has_value());
}
