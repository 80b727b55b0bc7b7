#include "ucd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ucd/errors.hpp"

namespace ucd {

namespace {

constexpr char kMagic[4] = {'U', 'C', 'D', 'G'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string text(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n, const std::string& what) {
    if (bytes_.size() - pos_ < n) throw FormatError(source_ + ": truncated while reading " + what);
  }

  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_tensor_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("checkpoint: cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("checkpoint: write failed for " + path.string());
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path.string());
  Reader in(std::string(std::istreambuf_iterator<char>(f), {}), path.string());
  if (in.text(4, "magic") != std::string(kMagic, 4)) throw FormatError(path.string() + ": bad magic, not a UCDG checkpoint");
  const auto version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.u32("name length of tensor #" + std::to_string(i));
    std::string name = in.text(name_len, "name of tensor #" + std::to_string(i));
    const auto rank = in.u32("rank of tensor '" + name + "'");
    if (rank > 8) throw FormatError(path.string() + ": tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t size = 1;
    for (auto& d : shape) {
      d = in.u32("shape of tensor '" + name + "'");
      size *= d;
    }
    std::vector<double> data(size);
    for (auto& v : data) v = in.f64("data of tensor '" + name + "'");
    for (const auto& [other, _] : out) {
      if (other == name) throw FormatError(path.string() + ": duplicate tensor '" + name + "'");
    }
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw FormatError(path.string() + ": trailing bytes after " + std::to_string(count) + " tensors");
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<NamedTensor> all = ckpt.generator.named_parameters();
  for (auto& nt : ckpt.discriminator.named_parameters()) all.push_back(std::move(nt));
  if (ckpt.dino) {
    ckpt.dino->validate();
    all.emplace_back("dino.center", Tensor({ckpt.dino->center.size()}, ckpt.dino->center));
    all.emplace_back("dino.tau", Tensor::scalar(ckpt.dino->temperature));
    all.emplace_back("dino.momentum", Tensor::scalar(ckpt.dino->center_momentum));
  }
  write_tensor_file(path, all);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto named = read_tensor_file(path);
  std::vector<NamedTensor> gen;
  std::vector<NamedTensor> disc;
  std::vector<NamedTensor> dino;
  for (const auto& nt : named) {
    if (nt.first.starts_with("gen.")) {
      gen.push_back(nt);
    } else if (nt.first.starts_with("disc.")) {
      disc.push_back(nt);
    } else if (nt.first.starts_with("dino.")) {
      dino.push_back(nt);
    } else {
      throw FormatError(path.string() + ": unknown tensor '" + nt.first + "'");
    }
  }
  Checkpoint ckpt{GeneratorNet::from_named(gen), DiscriminatorNet::from_named(disc), std::nullopt};
  if (ckpt.generator.cond().cardinality != ckpt.discriminator.cond().cardinality) {
    throw FormatError(path.string() + ": tensor 'disc.head.weight' disagrees with 'gen.embed' on the cardinality");
  }
  if (!dino.empty()) {
    const auto get = [&](const std::string& name) -> const Tensor& {
      for (const auto& [n, t] : dino) {
        if (n == name) return t;
      }
      throw FormatError(path.string() + ": missing tensor '" + name + "'");
    };
    const Tensor& center = get("dino.center");
    const Tensor& tau = get("dino.tau");
    const Tensor& momentum = get("dino.momentum");
    if (center.rank() != 1 || center.size() != ckpt.discriminator.cond().cardinality) {
      throw FormatError(path.string() + ": tensor 'dino.center' has shape " + shape_str(center.shape()));
    }
    if (tau.size() != 1) throw FormatError(path.string() + ": tensor 'dino.tau' is not a scalar");
    if (momentum.size() != 1) throw FormatError(path.string() + ": tensor 'dino.momentum' is not a scalar");
    DinoState s;
    s.center.assign(center.data().begin(), center.data().end());
    s.temperature = tau.data()[0];
    s.center_momentum = momentum.data()[0];
    try {
      s.validate();
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ": invalid dino state: " + e.what());
    }
    ckpt.dino = std::move(s);
  }
  return ckpt;
}

}  // namespace ucd
