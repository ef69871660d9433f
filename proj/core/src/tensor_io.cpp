#include "stgen/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stgen {

static_assert(std::endian::native == std::endian::little, "tensor files are written in native little-endian order");

std::string to_string(DType d) { return d == DType::Int64 ? "int64" : "float64"; }

DType dtype_from_string(const std::string& s) {
  if (s == "int64" || s == "int") return DType::Int64;
  if (s == "float64" || s == "double" || s == "float") return DType::Float64;
  throw std::invalid_argument("unknown dtype '" + s + "'");
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated tensor file");
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const AnyTensor& t) {
  os.write(kMagic, 4);
  std::visit(
      [&](const auto& x) {
        using V = typename std::decay_t<decltype(x.data())>::value_type;
        put<std::uint32_t>(os, static_cast<std::uint32_t>(std::is_same_v<V, double> ? DType::Float64 : DType::Int64));
        put<std::uint64_t>(os, x.rank());
        for (auto e : x.extents()) put<std::uint64_t>(os, static_cast<std::uint64_t>(e));
        os.write(reinterpret_cast<const char*>(x.data().data()), static_cast<std::streamsize>(x.size() * sizeof(V)));
      },
      t);
}

AnyTensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a tensor file (bad magic)");
  const auto dtype = get<std::uint32_t>(is);
  const auto rank = get<std::uint64_t>(is);
  if (rank > 16) throw std::runtime_error("tensor rank too large");
  std::vector<std::int64_t> ext;
  for (std::uint64_t i = 0; i < rank; ++i) ext.push_back(static_cast<std::int64_t>(get<std::uint64_t>(is)));
  const auto n = static_cast<std::size_t>(Tensor<double>::count(ext));
  auto read_data = [&](auto tag) {
    using V = decltype(tag);
    std::vector<V> data(n);
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(V))))
      throw std::runtime_error("truncated tensor file");
    return Tensor<V>(ext, std::move(data));
  };
  if (dtype == static_cast<std::uint32_t>(DType::Int64)) return read_data(std::int64_t{});
  if (dtype == static_cast<std::uint32_t>(DType::Float64)) return read_data(double{});
  throw std::runtime_error("unknown tensor dtype code " + std::to_string(dtype));
}

void save_tensor(const std::string& path, const AnyTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_tensor(os, t);
}

AnyTensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_tensor(is);
}

AnyTensor parse_csv_tensor(const std::string& text, DType dtype) {
  std::string clean = text;
  for (char& c : clean)
    if (c == ',' || c == ';') c = ' ';
  std::istringstream lines(clean);
  std::string first;
  while (std::getline(lines, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  std::vector<std::int64_t> ext;
  {
    std::istringstream hs(first);
    std::int64_t e;
    while (hs >> e) {
      if (e < 1) throw std::runtime_error("tensor extents must be positive");
      ext.push_back(e);
    }
    if (!hs.eof()) throw std::runtime_error("bad extents line in text tensor");
  }
  if (ext.empty()) throw std::runtime_error("text tensor has no extents line");
  std::string rest((std::istreambuf_iterator<char>(lines)), std::istreambuf_iterator<char>());
  std::istringstream vs(rest);
  auto read_all = [&](auto tag) {
    using V = decltype(tag);
    std::vector<V> data;
    V v;
    while (vs >> v) data.push_back(v);
    if (!vs.eof()) throw std::runtime_error("bad value in text tensor");
    if (static_cast<std::int64_t>(data.size()) != Tensor<V>::count(ext))
      throw std::runtime_error("text tensor has " + std::to_string(data.size()) + " values, extents need " +
                               std::to_string(Tensor<V>::count(ext)));
    return Tensor<V>(ext, std::move(data));
  };
  if (dtype == DType::Int64) return read_all(std::int64_t{});
  return read_all(double{});
}

AnyTensor load_csv_tensor(const std::string& path, DType dtype) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_csv_tensor(ss.str(), dtype);
}

AnyTensor load_any_tensor(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    const auto nl = text.find('\n');
    const std::string body = nl == std::string::npos ? "" : text.substr(nl);
    const bool real = body.find_first_of(".eE") != std::string::npos;
    return parse_csv_tensor(text, real ? DType::Float64 : DType::Int64);
  }
  return load_tensor(path);
}

}  // namespace stgen
