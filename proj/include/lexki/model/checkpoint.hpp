#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lexki/error.hpp"
#include "lexki/nn/tape.hpp"
#include "lexki/nn/tensor.hpp"

// Binary layout, all integers little-endian:
//   "LEXKI\0"  u32 version
//   u32 config_bytes, then "key=value\n" lines in insertion order
//   u32 tensor_count, then per tensor:
//     u32 name_len, name, u32 rank, u32 dims[rank], f32 payload[numel]
namespace lexki::model {

inline constexpr char kMagic[6] = {'L', 'E', 'X', 'K', 'I', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointFile {
 public:
  std::uint32_t version = kCheckpointVersion;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, nn::Tensor<float>>> tensors;

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : config) {
      if (k == key) {
        v = value;
        return;
      }
    }
    config.emplace_back(key, value);
  }

  template <typename V>
  void set_num(const std::string& key, V value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    set(key, os.str());
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return true;
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return v;
    fail("CheckpointError", "missing config key '", key, "'");
  }

  std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }

  const nn::Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }

  template <typename T>
  void add_params(const nn::ParameterStore<T>& store) {
    for (std::size_t i = 0; i < store.size(); ++i)
      tensors.emplace_back(store[i].name, store[i].value.template cast<float>());
  }

  // Fills every parameter of store from same-named tensors.
  template <typename T>
  void load_params(nn::ParameterStore<T>& store) const {
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store[i];
      const nn::Tensor<float>* t = find(p.name);
      if (!t) fail("CheckpointError", "tensor '", p.name, "' missing from checkpoint");
      if (t->numel() != p.value.numel() || t->rows() != p.value.rows()) {
        fail("CheckpointError", "tensor '", p.name, "' has shape ", nn::shape_str(t->shape()),
             ", model expects ", nn::shape_str(p.value.shape()));
      }
      p.value = nn::Tensor<T>(p.value.shape(), std::vector<T>(t->storage().begin(), t->storage().end()));
    }
  }

  std::string to_bytes() const {
    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, version);
    std::string cfg;
    for (const auto& [k, v] : config) cfg += k + "=" + v + "\n";
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      put_u32(out, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
      for (float f : t.storage()) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put_u32(out, bits);
      }
    }
    return out;
  }

  static CheckpointFile from_bytes(const std::string& bytes) {
    Reader r{bytes, 0};
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
      fail("CheckpointError", "bad magic header");
    }
    r.pos = sizeof(kMagic);
    CheckpointFile ck;
    ck.version = r.u32();
    if (ck.version != kCheckpointVersion) fail("CheckpointError", "unsupported version ", ck.version);
    const std::string cfg = r.str(r.u32());
    std::istringstream lines(cfg);
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("CheckpointError", "malformed config line '", line, "'");
      ck.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = r.str(r.u32());
      const std::uint32_t rank = r.u32();
      nn::Shape shape;
      for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.u32());
      std::vector<float> data(nn::shape_numel(shape));
      for (float& f : data) {
        const std::uint32_t bits = r.u32();
        std::memcpy(&f, &bits, sizeof f);
      }
      ck.tensors.emplace_back(std::move(name), nn::Tensor<float>(std::move(shape), std::move(data)));
    }
    if (r.pos != bytes.size()) fail("CheckpointError", "trailing bytes after tensor records");
    return ck;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write checkpoint '", path, "'");
    const std::string b = to_bytes();
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  }

  static CheckpointFile load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open checkpoint '", path, "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
  }

 private:
  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  struct Reader {
    const std::string& bytes;
    std::size_t pos;

    void need(std::size_t n) const {
      if (pos + n > bytes.size()) fail("CheckpointError", "truncated file at byte ", pos);
    }
    std::uint32_t u32() {
      need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      pos += 4;
      return v;
    }
    std::string str(std::size_t n) {
      need(n);
      std::string s = bytes.substr(pos, n);
      pos += n;
      return s;
    }
  };
};

}  // namespace lexki::model
