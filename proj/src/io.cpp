#include "fscal/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fscal/error.hpp"

namespace fscal {

namespace {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, const char* what) : data_(data), what_(what) {}

  void bytes(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw ParseError(std::string(what_) + ": truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str(std::size_t max_len = 1u << 28) {
    const std::uint32_t n = u32();
    if (n > max_len) throw ParseError(std::string(what_) + ": string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void magic(const char (&expected)[9]) {
    char got[8];
    bytes(got, 8);
    if (std::memcmp(got, expected, 8) != 0) throw ParseError(std::string(what_) + ": bad magic");
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("FSCALCKP", 8);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.iteration);
  w.str(ckpt.config_json);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.str(p.name);
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) w.f32(static_cast<float>(p.value.data()[i]));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes, "checkpoint");
  r.magic("FSCALCKP");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.iteration = r.u64();
  ckpt.config_json = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str(4096);
    const std::uint32_t ndim = r.u32();
    if (ndim < 1 || ndim > 2) throw ParseError("checkpoint: tensor " + name + " has unsupported rank");
    const std::uint32_t rows = ndim == 2 ? r.u32() : 1;
    const std::uint32_t cols = r.u32();
    diff::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
    ckpt.params.add(name, std::move(m));
  }
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void round_to_float(diff::ParameterStore& params) {
  for (auto& p : params) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
    }
  }
}

std::string encode_features(const FrameFeatures& f) {
  Writer w;
  w.bytes("FSCALFEA", 8);
  w.u32(kFeatureVersion);
  w.str(f.video_id);
  w.u32(static_cast<std::uint32_t>(f.values.rows()));
  w.u32(static_cast<std::uint32_t>(f.values.cols()));
  w.u32(static_cast<std::uint32_t>(f.stride));
  for (Eigen::Index i = 0; i < f.values.size(); ++i) w.f32(static_cast<float>(f.values.data()[i]));
  return w.take();
}

FrameFeatures decode_features(const std::string& bytes) {
  Reader r(bytes, "feature container");
  r.magic("FSCALFEA");
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) {
    throw ParseError("feature container: unsupported version " + std::to_string(version));
  }
  FrameFeatures f;
  f.video_id = r.str(4096);
  const std::uint32_t steps = r.u32();
  const std::uint32_t channels = r.u32();
  f.stride = static_cast<int>(r.u32());
  if (steps == 0 || channels == 0 || f.stride <= 0) {
    throw ParseError("feature container: empty or invalid header");
  }
  f.values.resize(steps, channels);
  for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values.data()[i] = r.f32();
  if (!r.at_end()) throw ParseError("feature container: trailing bytes");
  return f;
}

void save_features(const FrameFeatures& f, const std::filesystem::path& path) {
  write_file(path, encode_features(f));
}

FrameFeatures load_precomputed(const std::filesystem::path& path, int expected_channels) {
  FrameFeatures f = decode_features(read_file(path));
  if (expected_channels >= 0 && f.channels() != expected_channels) {
    throw ConfigError("feature file " + path.string() + ": expected C=" +
                      std::to_string(expected_channels) + ", found C=" + std::to_string(f.channels()));
  }
  return f;
}

}  // namespace fscal
