#include "dsm/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dsm/config.hpp"

namespace dsm {

namespace {

constexpr std::array<char, 5> kMagic{'D', 'S', 'M', 'K', '1'};

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is, const char* what) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const char* what, std::size_t limit) {
  const auto len = get<std::uint32_t>(is, what);
  if (len > limit) throw std::runtime_error(std::string("checkpoint: implausible length for ") + what);
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  return s;
}

void put_entry(std::ostream& os, const std::string& name, const std::vector<std::size_t>& extents,
               const std::vector<Real>& values) {
  put_string(os, name);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(extents.size()));
  for (std::size_t e : extents) put<std::uint64_t>(os, e);
  for (Real v : values) put<double>(os, v);
}

std::string site_of(const Param& gamma) {
  const std::string& n = gamma.name;
  return n.substr(0, n.rfind('.'));
}

struct Entry {
  std::vector<std::size_t> extents;
  std::vector<Real> values;
};

}  // namespace

void write_checkpoint(std::ostream& os, const StereoModel& model) {
  os.write(kMagic.data(), kMagic.size());
  put_string(os, format_key_values(model.config().to_pairs()));
  const auto params = model.parameters();
  std::size_t extra = 0;
  for (const NormLayer* n : model.norm_layers()) extra += n->running() ? 2 : 0;
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() + extra));
  for (const Param* p : params) put_entry(os, p->name, p->extents, p->value);
  for (const NormLayer* n : model.norm_layers()) {
    const RunningStats* r = n->running();
    if (!r) continue;
    const std::string site = site_of(n->params().gamma);
    put_entry(os, site + ".running_mean", {r->mean.size()}, r->mean);
    put_entry(os, site + ".running_var", {r->var.size()}, r->var);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

StereoModel read_checkpoint(std::istream& is) {
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error("checkpoint: unknown magic (expected DSMK1)");
  const std::string text = get_string(is, "config", 1 << 20);
  ModelConfig config;
  for (const KeyValue& kv : parse_key_values(text, "checkpoint config"))
    if (!config.set(kv.key, kv.value))
      throw std::runtime_error("checkpoint: unknown config key '" + kv.key + "'");
  StereoModel model(config);

  const auto count = get<std::uint32_t>(is, "entry count");
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is, "entry name", 4096);
    const auto rank = get<std::uint32_t>(is, "rank");
    if (rank > 8) throw std::runtime_error("checkpoint: entry '" + name + "' has rank " + std::to_string(rank));
    Entry e;
    constexpr std::size_t kMaxValues = std::size_t{1} << 32;
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto extent = get<std::uint64_t>(is, "extent");
      if (extent != 0 && total > kMaxValues / extent)
        throw std::runtime_error("checkpoint: entry '" + name + "' too large");
      e.extents.push_back(extent);
      total *= extent;
    }
    // Grow as values arrive so a corrupt extent fails on truncation, not allocation.
    e.values.reserve(std::min<std::size_t>(total, 1 << 16));
    for (std::size_t k = 0; k < total; ++k) e.values.push_back(get<double>(is, "values"));
    entries[name] = std::move(e);
  }

  auto take = [&](const std::string& name, const std::vector<std::size_t>& extents, std::vector<Real>& dst) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("checkpoint: missing entry '" + name + "'");
    if (it->second.extents != extents)
      throw std::runtime_error("checkpoint: entry '" + name + "' has the wrong extents");
    dst = std::move(it->second.values);
    entries.erase(it);
  };
  for (Param* p : model.parameters()) take(p->name, p->extents, p->value);
  for (NormLayer* n : model.norm_layers()) {
    RunningStats* r = n->running();
    if (!r) continue;
    const std::string site = site_of(n->params().gamma);
    take(site + ".running_mean", {r->mean.size()}, r->mean);
    take(site + ".running_var", {r->var.size()}, r->var);
  }
  if (!entries.empty())
    throw std::runtime_error("checkpoint: unexpected entry '" + entries.begin()->first + "'");
  return model;
}

void save_checkpoint(const std::string& path, const StereoModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  write_checkpoint(os, model);
}

StereoModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  return read_checkpoint(is);
}

}  // namespace dsm
