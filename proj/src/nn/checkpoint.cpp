#include "geolab/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab::nn {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff));
}

template <typename T>
T get(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == EOF) throw ArtifactError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return static_cast<T>(v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::size_t limit) {
  const auto n = get<std::uint32_t>(in);
  if (n > limit) throw ArtifactError("checkpoint string too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ArtifactError("checkpoint truncated");
  return s;
}

}  // namespace

Checkpoint snapshot(const ParameterStore& store, std::map<std::string, std::string> manifest) {
  Checkpoint c;
  c.manifest = std::move(manifest);
  for (const auto& [name, p] : store) c.arrays.emplace(name, Tensor::from_matrix(p.value, p.shape));
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, DType dtype) {
  std::ostringstream manifest;
  for (const auto& [k, v] : ckpt.manifest) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw InvalidInputError("manifest entry '" + k + "' contains a reserved character");
    manifest << k << '=' << v << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out.write("GEOL", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, manifest.str());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, t] : ckpt.arrays) {
    put_string(out, name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) put<std::uint64_t>(out, e);
    for (double v : t.data) {
      if (dtype == DType::F64) {
        put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      } else {
        put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  if (!out) throw ArtifactError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GEOL", 4) != 0) throw ArtifactError(path.string() + " is not a GEOL checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw ArtifactError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  std::istringstream manifest(get_string(in, 1u << 24));
  for (std::string line; std::getline(manifest, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ArtifactError("malformed manifest line '" + line + "'");
    c.manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = get_string(in, 4096);
    const auto dtype = get<std::uint8_t>(in);
    if (dtype > 1) throw ArtifactError("array '" + name + "' has unknown dtype");
    const auto ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw ArtifactError("array '" + name + "' has too many dimensions");
    Tensor t;
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
    const std::size_t n = t.numel();
    if (n > (1u << 30)) throw ArtifactError("array '" + name + "' too large");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      t.data[i] = dtype == 1 ? std::bit_cast<double>(get<std::uint64_t>(in))
                             : static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in)));
    c.arrays.emplace(std::move(name), std::move(t));
  }
  return c;
}

void load_into(ParameterStore& store, const Checkpoint& ckpt, bool strict) {
  for (const auto& [name, t] : ckpt.arrays) {
    if (!store.contains(name)) {
      if (strict) throw ArtifactError("checkpoint array '" + name + "' is not part of the model");
      continue;
    }
    const Parameter& p = store.at(name);
    if (p.shape != t.shape)
      throw ArtifactError("checkpoint array '" + name + "' has shape " + shape_string(t.shape) + ", model expects " +
                          shape_string(p.shape));
  }
  if (strict)
    for (const auto& [name, _] : store)
      if (!ckpt.arrays.count(name)) throw ArtifactError("checkpoint lacks array '" + name + "'");
  for (auto& [name, p] : store) {
    auto it = ckpt.arrays.find(name);
    if (it == ckpt.arrays.end()) continue;
    p.value = it->second.to_matrix();
    p.grad.setZero();
    p.m.setZero();
    p.v.setZero();
    p.step = 0;
  }
}

}  // namespace geolab::nn
