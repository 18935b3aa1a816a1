#include "sfd/weight_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sfd {

static constexpr char kMagic[] = "SFDW1\n";
static constexpr std::size_t kMagicLen = 6;

static std::size_t elem_size(WeightDType d) { return d == WeightDType::f32 ? 4 : 8; }
static const char* dtype_name(WeightDType d) { return d == WeightDType::f32 ? "f32" : "f64"; }

void WeightStore::put(const std::string& name, const Tensor& t, WeightDType dtype) {
  if (name.empty() || name.find('\t') != std::string::npos ||
      name.find('\n') != std::string::npos) {
    throw std::invalid_argument("WeightStore: invalid entry name '" + name + "'");
  }
  if (!entries_.count(name)) order_.push_back(name);
  entries_[name] = Entry{dtype, t};
}

bool WeightStore::contains(const std::string& name) const { return entries_.count(name) > 0; }

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::out_of_range("WeightStore: missing key '" + name + "'");
  }
  return it->second.tensor;
}

WeightDType WeightStore::dtype(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::out_of_range("WeightStore: missing key '" + name + "'");
  }
  return it->second.dtype;
}

std::vector<std::uint8_t> WeightStore::save() const {
  std::ostringstream header;
  std::vector<std::uint8_t> payload;
  for (const std::string& name : order_) {
    const Entry& e = entries_.at(name);
    const std::size_t offset = payload.size();
    header << name << '\t' << dtype_name(e.dtype) << '\t';
    const auto& shape = e.tensor.shape();
    for (std::size_t i = 0; i < shape.size(); ++i) header << (i ? "," : "") << shape[i];
    header << '\t' << offset << '\n';

    const std::size_t n = e.tensor.size();
    payload.resize(offset + n * elem_size(e.dtype));
    std::uint8_t* dst = payload.data() + offset;
    if (e.dtype == WeightDType::f32) {
      for (std::size_t i = 0; i < n; ++i) {
        const float v = static_cast<float>(e.tensor[i]);
        std::memcpy(dst + i * 4, &v, 4);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = e.tensor[i];
        std::memcpy(dst + i * 8, &v, 8);
      }
    }
  }

  const std::string h = header.str();
  std::vector<std::uint8_t> out;
  out.reserve(kMagicLen + 8 + h.size() + payload.size());
  out.insert(out.end(), kMagic, kMagic + kMagicLen);
  const std::uint64_t hlen = h.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((hlen >> (8 * i)) & 0xff));
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

static std::vector<std::size_t> parse_shape(const std::string& s, const std::string& name) {
  std::vector<std::size_t> shape;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) throw std::runtime_error("WeightStore: bad shape for '" + name + "'");
    shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  if (shape.empty()) throw std::runtime_error("WeightStore: empty shape for '" + name + "'");
  return shape;
}

WeightStore WeightStore::load(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagicLen + 8 ||
      std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw std::runtime_error("WeightStore: bad magic or truncated file");
  }
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(bytes[kMagicLen + i]) << (8 * i);
  if (bytes.size() < kMagicLen + 8 + hlen) {
    throw std::runtime_error("WeightStore: truncated header");
  }
  const std::string header(reinterpret_cast<const char*>(bytes.data() + kMagicLen + 8),
                           hlen);
  const std::uint8_t* payload = bytes.data() + kMagicLen + 8 + hlen;
  const std::size_t payload_size = bytes.size() - kMagicLen - 8 - hlen;

  WeightStore store;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (offset, end)
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) throw std::runtime_error("WeightStore: malformed header line '" + line + "'");
    const std::string& name = fields[0];
    if (store.contains(name)) throw std::runtime_error("WeightStore: duplicate name '" + name + "'");
    WeightDType dt;
    if (fields[1] == "f32") dt = WeightDType::f32;
    else if (fields[1] == "f64") dt = WeightDType::f64;
    else throw std::runtime_error("WeightStore: unknown dtype for '" + name + "'");
    const auto shape = parse_shape(fields[2], name);
    const std::size_t offset = static_cast<std::size_t>(std::stoull(fields[3]));
    const std::size_t n = shape_product(shape);
    const std::size_t end = offset + n * elem_size(dt);
    if (end > payload_size || end < offset) {
      throw std::runtime_error("WeightStore: entry '" + name + "' extends past end of file");
    }
    for (const auto& [o, e] : spans) {
      if (offset < e && o < end) {
        throw std::runtime_error("WeightStore: entry '" + name + "' overlaps another entry");
      }
    }
    spans.emplace_back(offset, end);

    Tensor t(shape);
    const std::uint8_t* src = payload + offset;
    if (dt == WeightDType::f32) {
      for (std::size_t i = 0; i < n; ++i) {
        float v;
        std::memcpy(&v, src + i * 4, 4);
        t[i] = static_cast<double>(v);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double v;
        std::memcpy(&v, src + i * 8, 8);
        t[i] = v;
      }
    }
    store.put(name, t, dt);
  }
  return store;
}

void WeightStore::save_file(const std::string& path) const {
  const auto bytes = save();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("WeightStore: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("WeightStore: write failed for '" + path + "'");
}

WeightStore WeightStore::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("WeightStore: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return load(bytes);
}

}  // namespace sfd
