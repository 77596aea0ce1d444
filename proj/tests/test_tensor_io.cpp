#include <doctest.h>

#include <cstring>
#include <fstream>

#include "segcal/tensor_io.hpp"
#include "support/oracles.hpp"

using namespace segcal;
using segcal::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a segcal::Error");
  return errc::io_failure;
}

}  // namespace

TEST_CASE("probmap: uniform 2x2x2 fixture reads back") {
  TempDir dir("segp");
  ProbMap map;
  map.height = 2;
  map.width = 2;
  map.classes = 2;
  map.data.assign(8, 0.5f);
  write_probmap(map, dir.file("u.segp"));

  const ProbMap back = read_probmap(dir.file("u.segp"));
  CHECK(back == map);
  for (float v : back.data) CHECK(v == 0.5f);
}

TEST_CASE("probmap: header is 20 bytes, payload 4*H*W*C") {
  TempDir dir("segp");
  ProbMap map;
  map.height = 1;
  map.width = 1;
  map.classes = 3;
  map.data = {0.2f, 0.3f, 0.5f};
  write_probmap(map, dir.file("p.segp"));

  const std::string bytes = slurp(dir.file("p.segp"));
  CHECK(bytes.size() == 20 + 12);
  CHECK(bytes.substr(0, 4) == "SEGP");
}

TEST_CASE("probmap: writer rejects invalid maps before touching disk") {
  TempDir dir("segp");
  ProbMap empty;
  empty.height = 0;
  empty.width = 2;
  empty.classes = 2;
  CHECK(code_of([&] { write_probmap(empty, dir.file("x.segp")); }) == errc::empty_input);

  ProbMap bad;
  bad.height = 1;
  bad.width = 1;
  bad.classes = 2;
  bad.data = {0.9f, 0.9f};
  CHECK(code_of([&] { write_probmap(bad, dir.file("x.segp")); }) == errc::not_normalized);
  CHECK(!std::filesystem::exists(dir.file("x.segp")));
}

TEST_CASE("probmap: each malformed input maps to its own error") {
  TempDir dir("segp");
  ProbMap map;
  map.height = 2;
  map.width = 3;
  map.classes = 4;
  Rng rng(7);
  map = testing::random_probmap(rng, 2, 3, 4);
  write_probmap(map, dir.file("ok.segp"));
  const std::string good = slurp(dir.file("ok.segp"));

  SUBCASE("bad magic") {
    std::string bytes = good;
    bytes[0] = 'X';
    spit(dir.file("bad.segp"), bytes);
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::bad_magic);
  }
  SUBCASE("unknown version") {
    std::string bytes = good;
    bytes[4] = 9;
    spit(dir.file("bad.segp"), bytes);
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::bad_header);
  }
  SUBCASE("truncated payload") {
    spit(dir.file("bad.segp"), good.substr(0, good.size() - 5));
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::truncated);
  }
  SUBCASE("trailing bytes rejected under strict only") {
    spit(dir.file("bad.segp"), good + "zz");
    CHECK_NOTHROW(read_probmap(dir.file("bad.segp")));
    ReadOptions strict;
    strict.strict = true;
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp"), strict); }) == errc::trailing_data);
  }
  SUBCASE("dimension overflow") {
    std::string bytes = good.substr(0, 20);
    for (int i = 8; i < 20; ++i) bytes[static_cast<std::size_t>(i)] = '\xFF';
    spit(dir.file("bad.segp"), bytes);
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::dimension_overflow);
  }
  SUBCASE("NaN entry") {
    std::string bytes = good;
    const std::uint32_t nan_bits = 0x7FC00000u;
    std::memcpy(bytes.data() + 20, &nan_bits, 4);
    spit(dir.file("bad.segp"), bytes);
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::nan_entry);
  }
  SUBCASE("normalization violation, unless permissive") {
    std::string bytes = good;
    const float half = 0.25f;
    std::memcpy(bytes.data() + 20, &half, 4);
    spit(dir.file("bad.segp"), bytes);
    CHECK(code_of([&] { read_probmap(dir.file("bad.segp")); }) == errc::not_normalized);
    ReadOptions permissive;
    permissive.allow_unnormalized = true;
    CHECK_NOTHROW(read_probmap(dir.file("bad.segp"), permissive));
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_probmap(dir.file("nope.segp")); }) == errc::missing_file);
  }
}

TEST_CASE("probmap: write/read round-trip is bitwise on random maps") {
  TempDir dir("segp");
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = static_cast<std::uint32_t>(1 + rng.below(6));
    const auto w = static_cast<std::uint32_t>(1 + rng.below(6));
    const auto c = static_cast<std::uint32_t>(1 + rng.below(5));
    const ProbMap map = testing::random_probmap(rng, h, w, c);
    write_probmap(map, dir.file("t.segp"));
    const ProbMap back = read_probmap(dir.file("t.segp"));
    CHECK(back == map);
    // Serialized bytes are identical too: write the read-back and compare.
    write_probmap(back, dir.file("t2.segp"));
    CHECK(slurp(dir.file("t.segp")) == slurp(dir.file("t2.segp")));
  }
}

TEST_CASE("labelmap: P5 fixture with ignore pixels") {
  TempDir dir("pgm");
  spit(dir.file("a.pgm"), std::string("P5 2 2 255\n") + '\x00' + '\x01' + '\xFF' + '\x01');
  const LabelMap map = read_labelmap(dir.file("a.pgm"));
  CHECK(map.height == 2);
  CHECK(map.width == 2);
  CHECK(map.data == std::vector<std::uint8_t>{0, 1, 255, 1});
}

TEST_CASE("labelmap: ASCII PGM is rejected as unsupported") {
  TempDir dir("pgm");
  spit(dir.file("a.pgm"), "P2 2 2 255\n0 1 2 3\n");
  CHECK(code_of([&] { read_labelmap(dir.file("a.pgm")); }) == errc::unsupported_format);
}

TEST_CASE("labelmap: maxval other than 255 is rejected") {
  TempDir dir("pgm");
  spit(dir.file("a.pgm"), std::string("P5 1 1 65535\n") + '\x00' + '\x00');
  CHECK(code_of([&] { read_labelmap(dir.file("a.pgm")); }) == errc::bad_maxval);
}

TEST_CASE("labelmap: PGM reader accepts comments and newline separators") {
  TempDir dir("pgm");
  spit(dir.file("a.pgm"), std::string("P5\n# comment\n2 1\n255\n") + '\x05' + '\x06');
  const LabelMap map = read_labelmap(dir.file("a.pgm"));
  CHECK(map.data == std::vector<std::uint8_t>{5, 6});
}

TEST_CASE("labelmap: all-ignore 3x3 writes 9 bytes of 0xFF after the header") {
  TempDir dir("pgm");
  LabelMap map;
  map.height = 3;
  map.width = 3;
  map.data.assign(9, kIgnoreId);
  write_labelmap(map, dir.file("i.pgm"));
  const std::string bytes = slurp(dir.file("i.pgm"));
  CHECK(bytes == std::string("P5 3 3 255\n") + std::string(9, '\xFF'));
}

TEST_CASE("labelmap: degenerate 0x0 map is rejected") {
  TempDir dir("pgm");
  LabelMap map;
  CHECK(code_of([&] { write_labelmap(map, dir.file("z.pgm")); }) == errc::empty_input);
}

TEST_CASE("labelmap: round-trip equality for both formats") {
  TempDir dir("lbl");
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = static_cast<std::uint32_t>(1 + rng.below(8));
    const auto w = static_cast<std::uint32_t>(1 + rng.below(8));
    const LabelMap map = testing::random_labelmap(rng, h, w, 5, 0.2);

    write_labelmap(map, dir.file("a.pgm"), LabelFormat::pgm);
    CHECK(read_labelmap(dir.file("a.pgm")) == map);

    write_labelmap(map, dir.file("a.segl"), LabelFormat::segl);
    CHECK(read_labelmap(dir.file("a.segl")) == map);
  }
}

TEST_CASE("labelmap: SEGL truncation and magic errors") {
  TempDir dir("segl");
  LabelMap map;
  map.height = 2;
  map.width = 2;
  map.data = {0, 1, 2, 3};
  write_labelmap(map, dir.file("a.segl"), LabelFormat::segl);
  const std::string good = slurp(dir.file("a.segl"));

  spit(dir.file("bad.segl"), good.substr(0, good.size() - 1));
  CHECK(code_of([&] { read_labelmap(dir.file("bad.segl")); }) == errc::truncated);

  spit(dir.file("bad2.segl"), "QQQQwhatever");
  CHECK(code_of([&] { read_labelmap(dir.file("bad2.segl")); }) == errc::bad_magic);
}

TEST_CASE("featuremap: round-trip preserves non-probability payloads") {
  TempDir dir("feat");
  Rng rng(11);
  const FeatureMap map = testing::random_featuremap(rng, 3, 4, 6);
  write_featuremap(map, dir.file("f.segp"));
  CHECK(read_featuremap(dir.file("f.segp")) == map);
  // The same bytes fail probability validation.
  CHECK(code_of([&] { read_probmap(dir.file("f.segp")); }) != errc::io_failure);
}

TEST_CASE("manifest: one-entry happy path") {
  TempDir dir("man");
  Rng rng(3);
  const ProbMap probs = testing::random_probmap(rng, 2, 2, 3);
  write_probmap(probs, dir.file("p.segp"));
  const LabelMap labels = testing::random_labelmap(rng, 2, 2, 3);
  write_labelmap(labels, dir.file("l.pgm"));
  spit(dir.file("m.json"),
       R"({"classes": 3, "entries": [{"id": "a", "label": "l.pgm", "probs": ["p.segp"]}]})");

  const Manifest manifest = load_manifest(dir.file("m.json"));
  CHECK(manifest.classes == 3);
  REQUIRE(manifest.entries.size() == 1);
  CHECK(manifest.entries[0].id == "a");
  CHECK_NOTHROW(validate_manifest(manifest, true));
}

TEST_CASE("manifest: duplicate ids are rejected") {
  TempDir dir("man");
  spit(dir.file("m.json"),
       R"({"classes": 3, "entries": [
            {"id": "a", "label": "l.pgm", "probs": []},
            {"id": "a", "label": "l2.pgm", "probs": []}]})");
  CHECK(code_of([&] { load_manifest(dir.file("m.json")); }) == errc::duplicate_id);
}

TEST_CASE("manifest: strict validation catches inconsistent class counts") {
  TempDir dir("man");
  Rng rng(5);
  write_probmap(testing::random_probmap(rng, 2, 2, 3), dir.file("c3.segp"));
  write_probmap(testing::random_probmap(rng, 2, 2, 4), dir.file("c4.segp"));
  write_labelmap(testing::random_labelmap(rng, 2, 2, 3), dir.file("l.pgm"));
  spit(dir.file("m.json"),
       R"({"classes": 3, "entries": [
            {"id": "a", "label": "l.pgm", "probs": ["c3.segp"]},
            {"id": "b", "label": "l.pgm", "probs": ["c4.segp"]}]})");

  const Manifest manifest = load_manifest(dir.file("m.json"));
  CHECK_NOTHROW(validate_manifest(manifest, false));  // lazy: only existence
  CHECK(code_of([&] { validate_manifest(manifest, true); }) == errc::inconsistent_classes);
}

TEST_CASE("manifest: missing files surface as missing_file") {
  TempDir dir("man");
  spit(dir.file("m.json"),
       R"({"classes": 3, "entries": [{"id": "a", "label": "l.pgm", "probs": []}]})");
  const Manifest manifest = load_manifest(dir.file("m.json"));
  CHECK(code_of([&] { validate_manifest(manifest, false); }) == errc::missing_file);
}
