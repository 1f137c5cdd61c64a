#include "mapnav/tensor/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mapnav/error.hpp"

namespace mapnav::tensor {

namespace {

constexpr std::string_view kModelMagic = "MNAVCKPT";
constexpr std::string_view kAdamMagic = "MNAVADAM";
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  template <typename T>
  void le(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U u = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void blob(const std::string& name, const Matrix& m) {
    le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    le<std::uint32_t>(2);
    le<std::uint64_t>(static_cast<std::uint64_t>(m.rows));
    le<std::uint64_t>(static_cast<std::uint64_t>(m.cols));
    for (double v : m.data) le<double>(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::string_view bytes(std::size_t n) {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::ParseError, "checkpoint truncated");
    std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    std::string_view s = bytes(sizeof(U));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return std::bit_cast<T>(u);
  }
  std::pair<std::string, Matrix> blob() {
    const auto name_len = le<std::uint32_t>();
    std::string name(bytes(name_len));
    const auto ndim = le<std::uint32_t>();
    if (ndim != 2) throw Error(ErrorCode::ParseError, "blob " + name + " is not 2-D");
    const auto rows = le<std::uint64_t>();
    const auto cols = le<std::uint64_t>();
    if (rows > (1u << 24) || cols > (1u << 24)) throw Error(ErrorCode::ParseError, "blob too large");
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : m.data) v = le<double>();
    return {std::move(name), std::move(m)};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  const TransformerConfig& c = model.config();
  w.bytes(kModelMagic);
  w.le<std::uint32_t>(kVersion);
  w.le<std::int32_t>(c.vocab_size);
  w.le<std::int32_t>(c.context_len);
  w.le<std::int32_t>(c.d_model);
  w.le<std::int32_t>(c.n_heads);
  w.le<std::int32_t>(c.n_layers);
  w.le<std::uint64_t>(c.seed);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.params().size()));
  for (const Parameter& p : model.params()) w.blob(p.name, p.value);
  return w.take();
}

Model deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(kModelMagic.size()) != kModelMagic) throw Error(ErrorCode::ParseError, "bad magic");
  if (r.le<std::uint32_t>() != kVersion) throw Error(ErrorCode::ParseError, "unsupported version");
  TransformerConfig c;
  c.vocab_size = r.le<std::int32_t>();
  c.context_len = r.le<std::int32_t>();
  c.d_model = r.le<std::int32_t>();
  c.n_heads = r.le<std::int32_t>();
  c.n_layers = r.le<std::int32_t>();
  c.seed = r.le<std::uint64_t>();
  Model model(c);
  const auto count = r.le<std::uint32_t>();
  if (count != model.params().size()) throw Error(ErrorCode::ParseError, "parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, m] = r.blob();
    Parameter& p = model.param(name);
    if (!p.value.same_shape(m)) throw Error(ErrorCode::ParseError, "shape mismatch for " + name);
    p.value = std::move(m);
  }
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes in checkpoint");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::string serialize_optimizer(const Adam& adam) {
  Writer w;
  w.bytes(kAdamMagic);
  w.le<std::uint32_t>(kVersion);
  w.le<std::int64_t>(adam.step_count());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(2 * adam.moments().size()));
  for (const auto& [name, mo] : adam.moments()) {
    w.blob("m." + name, mo.m);
    w.blob("v." + name, mo.v);
  }
  return w.take();
}

Adam deserialize_optimizer(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(kAdamMagic.size()) != kAdamMagic) throw Error(ErrorCode::ParseError, "bad magic");
  if (r.le<std::uint32_t>() != kVersion) throw Error(ErrorCode::ParseError, "unsupported version");
  const auto steps = r.le<std::int64_t>();
  const auto count = r.le<std::uint32_t>();
  std::map<std::string, Adam::Moments> moments;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, m] = r.blob();
    if (name.size() < 3 || name[1] != '.') throw Error(ErrorCode::ParseError, "bad moment " + name);
    Adam::Moments& mo = moments[name.substr(2)];
    (name[0] == 'm' ? mo.m : mo.v) = std::move(m);
  }
  Adam adam;
  adam.restore(steps, std::move(moments));
  return adam;
}

void save_optimizer(const Adam& adam, const std::filesystem::path& path) {
  write_file(path, serialize_optimizer(adam));
}

Adam load_optimizer(const std::filesystem::path& path) {
  return deserialize_optimizer(read_file(path));
}

}  // namespace mapnav::tensor
