#include <bit>
#include <cmath>
#include <fstream>
#include <map>

#include "atkl/errors.hpp"
#include "atkl/models.hpp"

namespace atkl {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'K', 'L'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint: truncated " + what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw IoError(std::string("checkpoint: ") + what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

Tensor record(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t as_count(double v, const std::string& field) {
  if (!(v >= 0.0) || v != std::floor(v)) throw ParseError("checkpoint: bad " + field + " value");
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, checked_u32(tensors.size(), "tensor count"));
  for (const auto& [name, t] : tensors) {
    put_u32(os, checked_u32(name.size(), "name length"));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, checked_u32(t.rank(), "rank"));
    for (std::size_t d : t.shape()) put_u32(os, checked_u32(d, "extent"));
    for (double v : t.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw UnsupportedFormatError("checkpoint: version " + std::to_string(version) + " not supported");
  }
  const std::uint32_t count = get_u32(is, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(is, "name length");
    if (len > 4096) throw ParseError("checkpoint: implausible name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ParseError("checkpoint: truncated name");
    const std::uint32_t rank = get_u32(is, "rank");
    if (rank > 8) throw ParseError("checkpoint: implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_u32(is, "extent");
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<float>(get_u32(is, "values of " + name));
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (is.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint: trailing bytes");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto& cfg = model.config();
  std::vector<NamedTensor> tensors;
  tensors.push_back({"meta.stft", record({double(cfg.stft.sample_rate), double(cfg.stft.win_len),
                                          double(cfg.stft.hop_len), double(cfg.stft.fft_size)})});
  std::vector<double> meta{double(cfg.lstm_hidden), double(cfg.lstm_layers)};
  for (std::size_t c : cfg.enc_channels) meta.push_back(double(c));
  tensors.push_back({"meta.model", record(std::move(meta))});
  for (const auto& [name, t] : model.parameters()) tensors.push_back({name, t});
  write_tensors(path, tensors);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : read_tensors(path)) by_name.emplace(name, t);
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint: missing tensor " + name);
    Tensor t = it->second;
    by_name.erase(it);
    return t;
  };

  const Tensor stft_meta = take("meta.stft"), model_meta = take("meta.model");
  if (stft_meta.numel() != 4 || model_meta.numel() < 2) throw ParseError("checkpoint: malformed metadata");
  ModelConfig cfg;
  cfg.stft = {as_count(stft_meta[0], "sample_rate"), as_count(stft_meta[1], "win_len"),
              as_count(stft_meta[2], "hop_len"), as_count(stft_meta[3], "fft_size")};
  cfg.lstm_hidden = as_count(model_meta[0], "lstm_hidden");
  cfg.lstm_layers = as_count(model_meta[1], "lstm_layers");
  for (std::size_t i = 2; i < model_meta.numel(); ++i) {
    cfg.enc_channels.push_back(as_count(model_meta[i], "enc_channels"));
  }

  Model model(cfg, 0);
  for (const auto& [name, param] : model.parameters()) {
    const Tensor stored = take(name);
    if (stored.shape() != param.shape()) {
      throw ParseError("checkpoint: " + name + " has shape " + shape_str(stored.shape()) + ", model expects " +
                       shape_str(param.shape()));
    }
    Tensor handle = param;
    std::copy(stored.values().begin(), stored.values().end(), handle.mutable_values().begin());
  }
  if (!by_name.empty()) throw ParseError("checkpoint: unexpected tensor " + by_name.begin()->first);
  return model;
}

}  // namespace atkl
