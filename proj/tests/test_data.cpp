#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "atkl/data.hpp"
#include "support/helpers.hpp"

using namespace atkl;
using namespace atkl::data;
using atkl::testing::to_vec;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "atkl_test_data" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double measured_snr_db(const Tensor& clean, const Tensor& noisy) {
  double pc = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.numel(); ++i) {
    pc += clean[i] * clean[i];
    pn += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
  }
  return 10.0 * std::log10(pc / pn);
}

double peak(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

// Minimal WAV writer for headers save_wav never produces.
void write_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
               const std::string& data) {
  auto u32 = [](std::uint32_t v) {
    return std::string{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char(v >> 24)};
  };
  auto u16 = [](std::uint16_t v) { return std::string{char(v & 0xff), char(v >> 8)}; };
  std::string out = "RIFF" + u32(36 + static_cast<std::uint32_t>(data.size())) + "WAVEfmt " + u32(16) + u16(format) +
                    u16(channels) + u32(8000) + u32(8000 * channels * bits / 8) +
                    u16(static_cast<std::uint16_t>(channels * bits / 8)) + u16(bits) + "data" +
                    u32(static_cast<std::uint32_t>(data.size())) + data;
  std::ofstream(p, std::ios::binary).write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace

TEST_CASE("mixtures hit the requested SNR exactly") {
  for (NoiseKind noise : {NoiseKind::white, NoiseKind::pink}) {
    for (CleanKind clean : {CleanKind::multi_tone, CleanKind::tone_sweep}) {
      for (double snr : {-5.0, 0.0, 3.3, 20.0}) {
        const Pair p = synth_pair({8000, 0.5, snr, clean, noise, 99});
        CHECK(std::abs(measured_snr_db(p.clean, p.noisy) - snr) < 1e-9);
        CHECK(peak(p.clean) <= kPeakLevel + 1e-15);
        CHECK(peak(p.noisy) <= kPeakLevel + 1e-15);
        CHECK(std::max(peak(p.clean), peak(p.noisy)) == doctest::Approx(kPeakLevel).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("infinite SNR gives a noise-free copy") {
  const Pair p = synth_pair({8000, 0.25, kNoNoise, CleanKind::tone_sweep, NoiseKind::pink, 5});
  CHECK(to_vec(p.clean) == to_vec(p.noisy));
  CHECK(p.clean.numel() == 2000);
}

TEST_CASE("synthesis is deterministic per seed") {
  const MixtureSpec spec{8000, 0.25, 0.0, CleanKind::multi_tone, NoiseKind::white, 17};
  const Pair a = synth_pair(spec), b = synth_pair(spec);
  CHECK(to_vec(a.clean) == to_vec(b.clean));
  CHECK(to_vec(a.noisy) == to_vec(b.noisy));
  MixtureSpec other = spec;
  other.seed = 18;
  CHECK(to_vec(synth_pair(other).clean) != to_vec(a.clean));
}

TEST_CASE("mixture validation") {
  CHECK_THROWS_AS(synth_pair({8000, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(synth_pair({8000, 0.1, std::nan("")}), ConfigError);
  CHECK_THROWS_AS(synth_pair({8000, 0.1, -kNoNoise}), ConfigError);
  CHECK_THROWS_AS(parse_noise_kind("brown"), ConfigError);
  CHECK(parse_clean_kind(to_string(CleanKind::tone_sweep)) == CleanKind::tone_sweep);
}

TEST_CASE("dataset split, seeds and order independence") {
  DatasetTemplate tmpl;
  tmpl.duration = 0.1;
  const Dataset ds = make_dataset(10, 500, tmpl);
  CHECK(ds.train.size() == 9);
  CHECK(ds.val.size() == 1);
  CHECK(ds.val[0].index == 9);
  CHECK(ds.val[0].validation);
  CHECK(validation_count(200) == 20);
  CHECK(validation_count(4) == 1);

  std::set<std::uint64_t> seeds;
  std::set<std::vector<double>> clips;
  for (const auto* split : {&ds.train, &ds.val}) {
    for (const Clip& c : *split) {
      CHECK(c.seed == 500 + c.index);
      CHECK(c.snr_db >= -5.0);
      CHECK(c.snr_db <= 5.0);
      CHECK(std::abs(measured_snr_db(c.clean, c.noisy) - c.snr_db) < 1e-9);
      seeds.insert(c.seed);
      clips.insert(to_vec(c.clean));
    }
  }
  CHECK(seeds.size() == 10);
  CHECK(clips.size() == 10);

  const Clip alone = make_clip(4, 10, 500, tmpl);
  CHECK(to_vec(alone.noisy) == to_vec(ds.train[4].noisy));
  CHECK(alone.snr_db == ds.train[4].snr_db);

  const Dataset again = make_dataset(10, 500, tmpl);
  CHECK(manifest_csv(again) == manifest_csv(ds));
  CHECK_THROWS_AS(make_dataset(1, 0, tmpl), ConfigError);
}

TEST_CASE("wav round trip and boundaries") {
  const auto dir = temp_dir("wav");
  const Pair p = synth_pair({8000, 0.1, 0.0, CleanKind::multi_tone, NoiseKind::white, 3});
  save_wav(dir / "a.wav", p.noisy, 8000);
  const Wav w = load_wav(dir / "a.wav");
  CHECK(w.sample_rate == 8000);
  REQUIRE(w.samples.numel() == p.noisy.numel());
  CHECK(atkl::testing::max_abs_diff(w.samples.values(), p.noisy.values()) <= 1.0 / 32768.0);

  // Full-scale values clamp; -1 maps to the most negative code and back.
  save_wav(dir / "b.wav", Tensor({4}, {-1.0, 1.0, 2.0, 0.5 / 32768.0}), 16000);
  const Wav b = load_wav(dir / "b.wav");
  CHECK(b.sample_rate == 16000);
  CHECK(to_vec(b.samples) == std::vector<double>{-1.0, 32767.0 / 32768.0, 32767.0 / 32768.0, 1.0 / 32768.0});

  write_wav(dir / "min.wav", 1, 1, 16, std::string("\x00\x80", 2));
  CHECK(load_wav(dir / "min.wav").samples[0] == -1.0);
}

TEST_CASE("wav errors") {
  const auto dir = temp_dir("wav_errors");
  write_wav(dir / "stereo.wav", 1, 2, 16, std::string(8, '\0'));
  CHECK_THROWS_AS(load_wav(dir / "stereo.wav"), UnsupportedFormatError);
  write_wav(dir / "float.wav", 3, 1, 32, std::string(8, '\0'));
  CHECK_THROWS_AS(load_wav(dir / "float.wav"), UnsupportedFormatError);
  write_wav(dir / "pcm8.wav", 1, 1, 8, std::string(8, '\0'));
  CHECK_THROWS_AS(load_wav(dir / "pcm8.wav"), UnsupportedFormatError);

  std::ofstream(dir / "junk.wav") << "not a wav file at all";
  CHECK_THROWS_AS(load_wav(dir / "junk.wav"), ParseError);
  CHECK_THROWS_AS(load_wav(dir / "absent.wav"), IoError);
}

TEST_CASE("dataset directory round trip") {
  const auto dir = temp_dir("dataset");
  DatasetTemplate tmpl;
  tmpl.duration = 0.05;
  const Dataset ds = make_dataset(10, 70, tmpl);
  write_dataset(dir, ds, tmpl.sample_rate);

  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 20);

  std::ifstream is(dir / "manifest.csv");
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "index,seed,snr_db,split");
  CHECK(first.rfind("0,70,", 0) == 0);

  const Dataset back = read_dataset(dir);
  REQUIRE(back.train.size() == 9);
  REQUIRE(back.val.size() == 1);
  CHECK(manifest_csv(back) == manifest_csv(ds));
  CHECK(back.sample_rate == 8000);
  CHECK(atkl::testing::max_abs_diff(back.train[2].clean.values(), ds.train[2].clean.values()) <= 1.0 / 32768.0);

  CHECK_THROWS_AS(read_dataset(dir / "nowhere"), IoError);
}
