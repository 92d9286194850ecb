#include "relab/io/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "relab/errors.hpp"

namespace relab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'L', 'C', 'K', 'P', 'T', '\0', '\1'};

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename U>
  U get(const char* section) {
    need(sizeof(U), section);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n, const char* section) {
    need(n, section);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& section, const std::string& what) const {
    throw FormatError(source_ + ": malformed checkpoint (" + section + "): " + what);
  }

 private:
  void need(std::size_t n, const char* section) const {
    if (bytes_.size() - pos_ < n) fail(section, "unexpected end of file");
  }

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

}  // namespace

std::string_view dtype_name(DType d) { return d == DType::kF32 ? "f32" : "f64"; }

Matrix StoredTensor::matrix() const {
  if (shape.size() != 2) throw ShapeError("stored tensor is not a matrix: " + shape_str(shape));
  return Matrix(shape[0], shape[1], values);
}

template <typename T>
StoredTensor StoredTensor::from(const Tensor<T>& t) {
  StoredTensor s;
  s.shape = t.shape();
  s.dtype = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
  s.values.assign(t.data().begin(), t.data().end());
  return s;
}

template StoredTensor StoredTensor::from(const Tensor<float>&);
template StoredTensor StoredTensor::from(const Tensor<double>&);

StoredTensor StoredTensor::from(const Matrix& m, DType dtype) {
  StoredTensor s{{m.rows, m.cols}, dtype, m.values};
  if (dtype == DType::kF32)
    for (auto& v : s.values) v = static_cast<double>(static_cast<float>(v));
  return s;
}

bool Checkpoint::has(std::string_view name) const {
  return std::any_of(tensors.begin(), tensors.end(), [&](const auto& e) { return e.first == name; });
}

const StoredTensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
}

void Checkpoint::add(std::string name, StoredTensor t) {
  if (shape_numel(t.shape) != t.values.size()) throw ShapeError("stored tensor '" + name + "' size mismatch");
  tensors.emplace_back(std::move(name), std::move(t));
}

std::int64_t Checkpoint::step() const { return header.value("step", std::int64_t{0}); }

std::string Checkpoint::mode() const { return header.value("mode", std::string("baseline")); }

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  const std::string header = ckpt.header.dump();
  put<std::uint64_t>(out, header.size());
  out += header;
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    if (t.dtype == DType::kF32) {
      for (double v : t.values) put<float>(out, static_cast<float>(v));
    } else {
      for (double v : t.values) put<double>(out, v);
    }
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) r.fail("magic", "bad magic bytes");
  const auto version = r.get<std::uint32_t>("version");
  if (version != Checkpoint::kVersion) r.fail("version", "unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  const auto header_len = r.get<std::uint64_t>("header");
  const auto header = r.take(header_len, "header");
  try {
    ckpt.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    r.fail("header", e.what());
  }
  if (!ckpt.header.is_object()) r.fail("header", "not a JSON object");

  const auto count = r.get<std::uint64_t>("tensor table");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.get<std::uint32_t>("tensor table");
    std::string name(r.take(name_len, "tensor table"));
    const auto code = r.get<std::uint8_t>("tensor table");
    if (code > 1) r.fail("tensor " + name, "unknown dtype code " + std::to_string(code));
    StoredTensor t;
    t.dtype = static_cast<DType>(code);
    const auto rank = r.get<std::uint32_t>("tensor table");
    if (rank == 0 || rank > 8) r.fail("tensor " + name, "bad rank " + std::to_string(rank));
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint64_t>("tensor table");
      if (d == 0) r.fail("tensor " + name, "zero dimension");
      t.shape.push_back(static_cast<std::size_t>(d));
    }
    const std::size_t n = shape_numel(t.shape);
    if (n > (bytes.size() / dtype_size(t.dtype))) r.fail("tensor " + name, "payload larger than file");
    t.values.resize(n);
    for (auto& v : t.values)
      v = t.dtype == DType::kF32 ? static_cast<double>(r.get<float>("tensor payload")) : r.get<double>("tensor payload");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) r.fail("trailer", "trailing bytes after tensor table");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path.string());
}

std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".ckpt") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace relab
