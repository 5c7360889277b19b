#include "kgdial/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "kgdial/errors.hpp"

namespace kgdial::nn {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'D', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw FormatError(path.string() + ": truncated checkpoint header");
  return v;
}

}  // namespace

Checkpoint Checkpoint::from_store(std::string kind, nlohmann::json config,
                                  const ParameterStore& store) {
  Checkpoint c;
  c.kind = std::move(kind);
  c.config = std::move(config);
  for (const auto& [name, v] : store.entries()) c.tensors[name] = v->value;
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header{{"kind", kind}, {"config", config}, {"tensors", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    header["tensors"].push_back({{"name", name},
                                 {"shape", {m.rows(), m.cols()}},
                                 {"dtype", "f64"},
                                 {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : tensors)
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError(path.string() + ": not a kgdial checkpoint");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(is, path);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    throw FormatError(path.string() + ": truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  Checkpoint c;
  c.kind = header.at("kind").get<std::string>();
  c.config = header.at("config");
  const auto data_start = is.tellg();
  for (const auto& t : header.at("tensors")) {
    if (t.at("dtype") != "f64") throw FormatError(path.string() + ": unsupported dtype");
    const auto rows = t.at("shape")[0].get<Eigen::Index>();
    const auto cols = t.at("shape")[1].get<Eigen::Index>();
    Matrix m(rows, cols);
    is.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    if (!is.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw FormatError(path.string() + ": truncated tensor " + t.at("name").get<std::string>());
    c.tensors[t.at("name").get<std::string>()] = std::move(m);
  }
  return c;
}

void Checkpoint::restore(ParameterStore& store) const {
  for (const auto& [name, v] : store.entries()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + name);
    if (it->second.rows() != v->value.rows() || it->second.cols() != v->value.cols())
      throw FormatError("checkpoint shape mismatch for " + name);
    v->value = it->second;
  }
}

}  // namespace kgdial::nn
