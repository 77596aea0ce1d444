#include "segcal/tensor_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace segcal {

namespace {

constexpr char kSegpMagic[4] = {'S', 'E', 'G', 'P'};
constexpr char kSeglMagic[4] = {'S', 'E', 'G', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec))
    fail(errc::missing_file, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_failure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(errc::io_failure, "read failed on " + path.string());
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::span<const std::string> chunks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
  for (const auto& chunk : chunks) out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  out.flush();
  if (!out) fail(errc::io_failure, "write failed on " + path.string());
}

std::size_t checked_elements(std::uint64_t h, std::uint64_t w, std::uint64_t c,
                             const std::filesystem::path& path) {
  // Guard h*w*c*sizeof(float) against overflow before any allocation.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 4;
  if (h != 0 && w > limit / h) fail(errc::dimension_overflow, path.string());
  const std::uint64_t hw = h * w;
  if (hw != 0 && c > limit / hw) fail(errc::dimension_overflow, path.string());
  const std::uint64_t n = hw * c;
  if (n > std::numeric_limits<std::size_t>::max() / sizeof(float))
    fail(errc::dimension_overflow, path.string());
  return static_cast<std::size_t>(n);
}

std::vector<float> decode_f32_payload(const std::string& bytes, std::size_t offset,
                                      std::size_t count, bool strict,
                                      const std::filesystem::path& path) {
  const std::size_t need = count * sizeof(float);
  if (bytes.size() - offset < need)
    fail(errc::truncated, path.string() + ": payload shorter than header promises");
  if (strict && bytes.size() - offset > need)
    fail(errc::trailing_data, path.string() + ": trailing bytes after payload");
  std::vector<float> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(values.data(), bytes.data() + offset, need);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset + i * 4);
      values[i] = std::bit_cast<float>(get_u32le(p));
    }
  }
  return values;
}

std::string encode_f32_payload(std::span<const float> values) {
  std::string bytes;
  bytes.resize(values.size() * sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(bytes.data(), values.data(), bytes.size());
  } else {
    bytes.clear();
    bytes.reserve(values.size() * sizeof(float));
    for (float v : values) put_u32le(bytes, std::bit_cast<std::uint32_t>(v));
  }
  return bytes;
}

struct RawSegp {
  SegpHeader header;
  std::vector<float> values;
};

SegpHeader parse_segp_header(const std::string& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSegpMagic, 4) != 0)
    fail(errc::bad_magic, path.string() + ": not a SEGP file");
  if (bytes.size() < 20) fail(errc::truncated, path.string() + ": incomplete SEGP header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  SegpHeader h;
  h.version = get_u32le(p + 4);
  h.height = get_u32le(p + 8);
  h.width = get_u32le(p + 12);
  h.channels = get_u32le(p + 16);
  if (h.version != kFormatVersion)
    fail(errc::bad_header, path.string() + ": unknown SEGP version " + std::to_string(h.version));
  return h;
}

RawSegp read_segp(const std::filesystem::path& path, bool strict) {
  const std::string bytes = read_file(path);
  RawSegp raw;
  raw.header = parse_segp_header(bytes, path);
  const std::size_t n =
      checked_elements(raw.header.height, raw.header.width, raw.header.channels, path);
  raw.values = decode_f32_payload(bytes, 20, n, strict, path);
  return raw;
}

void write_segp(std::uint32_t h, std::uint32_t w, std::uint32_t c,
                std::span<const float> values, const std::filesystem::path& path) {
  std::string header;
  header.append(kSegpMagic, 4);
  put_u32le(header, kFormatVersion);
  put_u32le(header, h);
  put_u32le(header, w);
  put_u32le(header, c);
  const std::string payload = encode_f32_payload(values);
  const std::string chunks[] = {header, payload};
  write_file(path, chunks);
}

void check_finite(std::span<const float> values, const std::filesystem::path& path) {
  for (float v : values)
    if (!std::isfinite(v)) fail(errc::nan_entry, path.string() + ": non-finite entry");
}

void validate_probabilities(const ProbMap& map, const std::string& what) {
  for (float v : map.data) {
    if (!std::isfinite(v)) fail(errc::nan_entry, what + ": non-finite entry");
    if (v < 0.0f || v > 1.0f) fail(errc::value_out_of_range, what + ": entry outside [0, 1]");
  }
  const std::size_t pixels = map.pixel_count();
  for (std::size_t i = 0; i < pixels; ++i) {
    double sum = 0.0;
    for (float v : map.pixel(i)) sum += v;
    if (std::abs(sum - 1.0) > kNormalizationTolerance)
      fail(errc::not_normalized,
           what + ": pixel " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

// PGM header scanner: whitespace-separated tokens with '#' comments.
struct PgmScanner {
  const std::string& bytes;
  std::size_t pos;

  void skip_space() {
    while (pos < bytes.size()) {
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::uint64_t next_uint(const std::filesystem::path& path) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      fail(errc::bad_header, path.string() + ": malformed PGM header");
    std::uint64_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
      if (value > std::numeric_limits<std::uint32_t>::max())
        fail(errc::dimension_overflow, path.string());
      ++pos;
    }
    return value;
  }
};

LabelMap read_pgm(const std::string& bytes, const std::filesystem::path& path, bool strict) {
  PgmScanner scan{bytes, 2};  // past "P5"
  const std::uint64_t width = scan.next_uint(path);
  const std::uint64_t height = scan.next_uint(path);
  const std::uint64_t maxval = scan.next_uint(path);
  if (maxval != 255)
    fail(errc::bad_maxval, path.string() + ": PGM maxval " + std::to_string(maxval));
  // Exactly one whitespace byte separates the maxval from the payload.
  if (scan.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[scan.pos])))
    fail(errc::bad_header, path.string() + ": malformed PGM header");
  ++scan.pos;

  LabelMap map;
  map.height = static_cast<std::uint32_t>(height);
  map.width = static_cast<std::uint32_t>(width);
  const std::size_t n = checked_elements(height, width, 1, path);
  if (bytes.size() - scan.pos < n)
    fail(errc::truncated, path.string() + ": PGM payload shorter than header promises");
  if (strict && bytes.size() - scan.pos > n)
    fail(errc::trailing_data, path.string() + ": trailing bytes after PGM payload");
  map.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(scan.pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(scan.pos + n));
  return map;
}

LabelMap read_segl(const std::string& bytes, const std::filesystem::path& path, bool strict) {
  if (bytes.size() < 16) fail(errc::truncated, path.string() + ": incomplete SEGL header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = get_u32le(p + 4);
  if (version != kFormatVersion)
    fail(errc::bad_header, path.string() + ": unknown SEGL version " + std::to_string(version));
  LabelMap map;
  map.height = get_u32le(p + 8);
  map.width = get_u32le(p + 12);
  const std::size_t n = checked_elements(map.height, map.width, 1, path);
  if (bytes.size() - 16 < n)
    fail(errc::truncated, path.string() + ": payload shorter than header promises");
  if (strict && bytes.size() - 16 > n)
    fail(errc::trailing_data, path.string() + ": trailing bytes after payload");
  map.data.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(n));
  return map;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& raw) {
  const std::filesystem::path p(raw);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

SegpHeader read_segp_header(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) fail(errc::missing_file, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_failure, "cannot open " + path.string());
  std::string head(20, '\0');
  in.read(head.data(), 20);
  head.resize(static_cast<std::size_t>(in.gcount()));
  return parse_segp_header(head, path);
}

ProbMap read_probmap(const std::filesystem::path& path, const ReadOptions& options) {
  RawSegp raw = read_segp(path, options.strict);
  ProbMap map;
  map.height = raw.header.height;
  map.width = raw.header.width;
  map.classes = raw.header.channels;
  map.data = std::move(raw.values);
  if (options.allow_unnormalized) {
    check_finite(map.data, path);
  } else {
    validate_probabilities(map, path.string());
  }
  return map;
}

void write_probmap(const ProbMap& map, const std::filesystem::path& path) {
  if (map.height == 0 || map.width == 0 || map.classes == 0)
    fail(errc::empty_input, "refusing to write empty probability map");
  if (map.data.size() != map.pixel_count() * map.classes)
    fail(errc::shape_mismatch, "probability buffer length does not match dimensions");
  validate_probabilities(map, "probability map");
  write_segp(map.height, map.width, map.classes, map.data, path);
}

FeatureMap read_featuremap(const std::filesystem::path& path, const ReadOptions& options) {
  RawSegp raw = read_segp(path, options.strict);
  FeatureMap map;
  map.height = raw.header.height;
  map.width = raw.header.width;
  map.dim = raw.header.channels;
  map.data = std::move(raw.values);
  check_finite(map.data, path);
  return map;
}

void write_featuremap(const FeatureMap& map, const std::filesystem::path& path) {
  if (map.height == 0 || map.width == 0 || map.dim == 0)
    fail(errc::empty_input, "refusing to write empty feature map");
  if (map.data.size() != map.pixel_count() * map.dim)
    fail(errc::shape_mismatch, "feature buffer length does not match dimensions");
  for (float v : map.data)
    if (!std::isfinite(v)) fail(errc::nan_entry, "non-finite feature entry");
  write_segp(map.height, map.width, map.dim, map.data, path);
}

LabelMap read_labelmap(const std::filesystem::path& path, const ReadOptions& options) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
    return read_pgm(bytes, path, options.strict);
  if (bytes.size() >= 2 && bytes[0] == 'P' && std::isdigit(static_cast<unsigned char>(bytes[1])))
    fail(errc::unsupported_format, path.string() + ": only binary (P5) PGM is supported");
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kSeglMagic, 4) == 0)
    return read_segl(bytes, path, options.strict);
  fail(errc::bad_magic, path.string() + ": not a PGM or SEGL file");
}

void write_labelmap(const LabelMap& map, const std::filesystem::path& path, LabelFormat format) {
  if (map.height == 0 || map.width == 0)
    fail(errc::empty_input, "refusing to write empty label map");
  if (map.data.size() != map.pixel_count())
    fail(errc::shape_mismatch, "label buffer length does not match dimensions");
  std::string header;
  if (format == LabelFormat::pgm) {
    header = "P5 " + std::to_string(map.width) + " " + std::to_string(map.height) + " 255\n";
  } else {
    header.append(kSeglMagic, 4);
    put_u32le(header, kFormatVersion);
    put_u32le(header, map.height);
    put_u32le(header, map.width);
  }
  std::string payload(reinterpret_cast<const char*>(map.data.data()), map.data.size());
  const std::string chunks[] = {header, payload};
  write_file(path, chunks);
}

Manifest load_manifest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, path.string() + ": " + e.what());
  }

  Manifest manifest;
  const std::filesystem::path base = path.parent_path();
  try {
    manifest.classes = doc.at("classes").get<std::uint32_t>();
    for (const auto& item : doc.at("entries")) {
      ManifestEntry entry;
      entry.id = item.at("id").get<std::string>();
      entry.label_path = resolve(base, item.at("label").get<std::string>());
      for (const auto& p : item.at("probs"))
        entry.prob_paths.push_back(resolve(base, p.get<std::string>()));
      if (item.contains("features"))
        entry.feature_path = resolve(base, item.at("features").get<std::string>());
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, path.string() + ": " + e.what());
  }

  if (manifest.classes == 0 || manifest.classes > 255)
    fail(errc::parse_error, path.string() + ": classes must be in [1, 255]");
  std::set<std::string> seen;
  for (const auto& entry : manifest.entries)
    if (!seen.insert(entry.id).second)
      fail(errc::duplicate_id, path.string() + ": duplicate entry id '" + entry.id + "'");
  return manifest;
}

void validate_manifest(const Manifest& manifest, bool strict) {
  for (const auto& entry : manifest.entries) {
    std::error_code ec;
    auto require = [&](const std::filesystem::path& p) {
      if (!std::filesystem::exists(p, ec))
        fail(errc::missing_file, "entry '" + entry.id + "': " + p.string());
    };
    require(entry.label_path);
    for (const auto& p : entry.prob_paths) require(p);
    if (entry.feature_path) require(*entry.feature_path);
    if (!strict) continue;

    const LabelMap label = read_labelmap(entry.label_path);
    for (const auto& p : entry.prob_paths) {
      const SegpHeader h = read_segp_header(p);
      if (h.channels != manifest.classes)
        fail(errc::inconsistent_classes,
             "entry '" + entry.id + "': " + p.string() + " has C=" + std::to_string(h.channels) +
                 ", manifest says " + std::to_string(manifest.classes));
      if (h.height != label.height || h.width != label.width)
        fail(errc::shape_mismatch, "entry '" + entry.id + "': " + p.string() +
                                       " dimensions disagree with the label raster");
    }
    if (entry.feature_path) {
      const SegpHeader h = read_segp_header(*entry.feature_path);
      if (h.height != label.height || h.width != label.width)
        fail(errc::shape_mismatch, "entry '" + entry.id + "': " + entry.feature_path->string() +
                                       " dimensions disagree with the label raster");
    }
  }
}

const char* errc_name(errc code) noexcept {
  switch (code) {
    case errc::io_failure: return "io failure";
    case errc::missing_file: return "missing file";
    case errc::bad_magic: return "bad magic";
    case errc::unsupported_format: return "unsupported format";
    case errc::bad_header: return "bad header";
    case errc::bad_maxval: return "bad maxval";
    case errc::truncated: return "truncated";
    case errc::trailing_data: return "trailing data";
    case errc::dimension_overflow: return "dimension overflow";
    case errc::nan_entry: return "nan entry";
    case errc::not_normalized: return "not normalized";
    case errc::value_out_of_range: return "value out of range";
    case errc::shape_mismatch: return "shape mismatch";
    case errc::class_out_of_range: return "class out of range";
    case errc::class_count_mismatch: return "class count mismatch";
    case errc::bin_count_mismatch: return "bin count mismatch";
    case errc::empty_input: return "empty input";
    case errc::duplicate_id: return "duplicate id";
    case errc::inconsistent_classes: return "inconsistent classes";
    case errc::parse_error: return "parse error";
    case errc::invalid_argument: return "invalid argument";
  }
  return "unknown error";
}

}  // namespace segcal
