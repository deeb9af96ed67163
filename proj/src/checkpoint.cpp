#include "canopy/checkpoint.hpp"

#include <cstdint>
#include <fstream>

namespace canopy {

namespace {

constexpr char kMagic[8] = {'C', 'N', 'P', 'Y', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
  if (!t.defined()) throw ContractError("checkpoint: undefined tensor for '" + name + "'");
  tensors.insert_or_assign(name, t.detach());
}

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint: no tensor named '" + name + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_string(out, ckpt.meta.dump());
  write_pod<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) write_pod<std::int64_t>(out, static_cast<std::int64_t>(d));
    out.write(reinterpret_cast<const char*>(t.value().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw DataError("not a checkpoint file: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(read_string(in));
  const auto n = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = read_string(in);
    const auto rank = read_pod<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<Eigen::Index>(read_pod<std::int64_t>(in));
    Eigen::ArrayXd data(shape_size(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path.string());
    ckpt.tensors.emplace(name, Tensor::from_array(shape, std::move(data)));
  }
  return ckpt;
}

void put_params(Checkpoint& ckpt, const std::string& prefix, const std::vector<Tensor>& params) {
  for (size_t i = 0; i < params.size(); ++i) ckpt.put(prefix + "." + std::to_string(i), params[i]);
}

void load_params(const Checkpoint& ckpt, const std::string& prefix,
                 const std::vector<Tensor>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& stored = ckpt.get(prefix + "." + std::to_string(i));
    Tensor live = params[i];
    if (stored.shape() != live.shape())
      throw ShapeError("checkpoint: shape mismatch for '" + prefix + "." + std::to_string(i) +
                       "': stored " + shape_str(stored.shape()) + " vs live " +
                       shape_str(live.shape()));
    live.mutable_value() = stored.value();
  }
}

}  // namespace canopy
