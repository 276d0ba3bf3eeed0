#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "atkl/data.hpp"
#include "atkl/errors.hpp"

namespace atkl::data {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

std::string clip_name(const char* kind, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.wav", kind, index);
  return buf;
}

}  // namespace

Wav load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("wav: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw ParseError("wav: " + path.string() + " is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::string id = bytes.substr(pos, 4);
    const std::size_t len = le32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (len > size - body) throw ParseError("wav: chunk '" + id + "' overruns the file");
    if (id == "fmt ") {
      if (len < 16) throw ParseError("wav: short fmt chunk");
      const std::uint16_t format = le16(p + body), channels = le16(p + body + 2);
      const std::uint16_t bits = le16(p + body + 14);
      rate = le32(p + body + 4);
      if (format != 1) throw UnsupportedFormatError("wav: only PCM is supported (format " + std::to_string(format) + ")");
      if (channels != 1) throw UnsupportedFormatError("wav: only mono is supported (" + std::to_string(channels) + " channels)");
      if (bits != 16) throw UnsupportedFormatError("wav: only 16-bit samples are supported (" + std::to_string(bits) + " bits)");
      if (rate == 0) throw ParseError("wav: zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("wav: data chunk before fmt chunk");
      if (len % 2 != 0) throw ParseError("wav: odd data length");
      std::vector<double> samples(len / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::int16_t>(le16(p + body + 2 * i)) / 32768.0;
      }
      const std::size_t n = samples.size();
      return {Tensor({n}, std::move(samples)), rate};
    }
    pos = body + len + (len % 2);  // chunks are word aligned
  }
  throw ParseError("wav: no data chunk in " + path.string());
}

void save_wav(const std::filesystem::path& path, const Tensor& samples, std::size_t sample_rate) {
  if (samples.rank() != 1) throw ShapeError("wav: expected a 1-D signal");
  if (sample_rate == 0 || sample_rate > 0xffffffffu / 2) throw ConfigError("wav: bad sample rate");
  const std::size_t n = samples.numel();
  if (n > (0xffffffffu - 36) / 2) throw IoError("wav: signal too long");
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put32(out, static_cast<std::uint32_t>(36 + 2 * n));
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, static_cast<std::uint32_t>(2 * n));
  for (double v : samples.values()) {
    const double q = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);  // half away from zero
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os || !os.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    throw IoError("wav: cannot write " + path.string());
  }
}

std::string manifest_csv(const Dataset& dataset) {
  std::vector<const Clip*> clips;
  for (const auto& c : dataset.train) clips.push_back(&c);
  for (const auto& c : dataset.val) clips.push_back(&c);
  std::sort(clips.begin(), clips.end(), [](const Clip* a, const Clip* b) { return a->index < b->index; });
  std::string out = "index,seed,snr_db,split\n";
  char buf[96];
  for (const Clip* c : clips) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%s\n", c->index, static_cast<unsigned long long>(c->seed),
                  c->snr_db, c->validation ? "val" : "train");
    out += buf;
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, std::size_t sample_rate) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("dataset: cannot create " + dir.string() + ": " + ec.message());
  for (const auto* split : {&dataset.train, &dataset.val}) {
    for (const Clip& c : *split) {
      save_wav(dir / clip_name("clean", c.index), c.clean, sample_rate);
      save_wav(dir / clip_name("noisy", c.index), c.noisy, sample_rate);
    }
  }
  std::ofstream os(dir / "manifest.csv", std::ios::trunc);
  const std::string csv = manifest_csv(dataset);
  if (!os || !os.write(csv.data(), static_cast<std::streamsize>(csv.size()))) {
    throw IoError("dataset: cannot write manifest in " + dir.string());
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.csv");
  if (!is) throw IoError("dataset: no manifest.csv in " + dir.string());
  std::string line;
  if (!std::getline(is, line) || line != "index,seed,snr_db,split") {
    throw ParseError("dataset: unexpected manifest header in " + dir.string());
  }
  Dataset ds;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string index, seed, snr, split;
    if (!std::getline(ss, index, ',') || !std::getline(ss, seed, ',') || !std::getline(ss, snr, ',') ||
        !std::getline(ss, split)) {
      throw ParseError("dataset: malformed manifest line " + std::to_string(line_no));
    }
    Clip c;
    try {
      c.index = std::stoul(index);
      c.seed = std::stoull(seed);
      c.snr_db = std::stod(snr);
    } catch (const std::exception&) {
      throw ParseError("dataset: malformed manifest line " + std::to_string(line_no));
    }
    if (split != "train" && split != "val") throw ParseError("dataset: unknown split '" + split + "'");
    c.validation = split == "val";
    const Wav clean = load_wav(dir / clip_name("clean", c.index));
    const Wav noisy = load_wav(dir / clip_name("noisy", c.index));
    if (clean.samples.numel() != noisy.samples.numel()) throw ParseError("dataset: clip length mismatch");
    if (clean.sample_rate != noisy.sample_rate || (ds.sample_rate && clean.sample_rate != ds.sample_rate)) {
      throw ParseError("dataset: mixed sample rates in " + dir.string());
    }
    ds.sample_rate = clean.sample_rate;
    c.clean = clean.samples;
    c.noisy = noisy.samples;
    (c.validation ? ds.val : ds.train).push_back(std::move(c));
  }
  if (ds.train.empty()) throw ParseError("dataset: no training clips in " + dir.string());
  return ds;
}

}  // namespace atkl::data
