#include "mononext/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "mononext/error.hpp"

namespace mononext {

namespace {

constexpr char kMagic[8] = {'M', 'N', 'X', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ParseError("truncated checkpoint " + path.string());
  return value;
}

std::string get_string(std::istream& in, std::size_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  if (len && !in.read(s.data(), static_cast<std::streamsize>(len))) {
    throw ParseError("truncated checkpoint " + path.string());
  }
  return s;
}

struct StoredParam {
  std::vector<int> shape;
  std::vector<float> values;
};

std::string read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError(path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in, path);
  return get_string(in, len, path);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& config_echo,
                     const std::vector<Parameter*>& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(kMagic, 8);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, config_echo.size());
    out.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
      out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p->shape.size()));
      for (int d : p->shape) put<std::int32_t>(out, d);
      put<std::uint64_t>(out, p->value.size());
      out.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_header(in, path);
}

void load_checkpoint(const std::filesystem::path& path, const std::string& expected_config,
                     const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string stored = read_header(in, path);
  if (stored != expected_config) {
    throw ConfigError("checkpoint config digest " + hex_digest(fnv1a64(stored)) +
                      " does not match current config digest " + hex_digest(fnv1a64(expected_config)) +
                      "\n--- checkpoint ---\n" + stored + "--- current ---\n" + expected_config);
  }
  std::map<std::string, StoredParam> table;
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = get_string(in, get<std::uint32_t>(in, path), path);
    StoredParam sp;
    const auto rank = get<std::uint32_t>(in, path);
    for (std::uint32_t r = 0; r < rank; ++r) sp.shape.push_back(get<std::int32_t>(in, path));
    sp.values.resize(get<std::uint64_t>(in, path));
    if (!in.read(reinterpret_cast<char*>(sp.values.data()),
                 static_cast<std::streamsize>(sp.values.size() * sizeof(float)))) {
      throw ParseError("truncated checkpoint " + path.string());
    }
    table.emplace(name, std::move(sp));
  }
  if (table.size() != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(table.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const auto it = table.find(p->name);
    if (it == table.end()) throw ConfigError("checkpoint lacks parameter " + p->name);
    if (it->second.shape != p->shape) throw ConfigError("checkpoint shape mismatch for " + p->name);
    p->value = it->second.values;
  }
}

}  // namespace mononext
