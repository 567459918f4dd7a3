#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedhar/common.hpp"
#include "fedhar/tensor.hpp"

namespace fedhar {

// Ordered collection of named parameter tensors. Iteration order is the
// insertion order, which makes federated arithmetic and serialization stable.
class ParamSet {
 public:
  using Item = std::pair<std::string, Tensor>;

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  void insert(const std::string& name, Tensor t) {
    require(!has(name), "ParamSet: duplicate parameter name: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
  }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamSet: unknown parameter: " + name);
    return items_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamSet: unknown parameter: " + name);
    return items_[it->second].second;
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Item& item(std::size_t i) const { return items_[i]; }
  Item& item(std::size_t i) { return items_[i]; }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : items_) n += t.size();
    return n;
  }

  bool congruent_with(const ParamSet& o) const {
    if (items_.size() != o.items_.size()) return false;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].first != o.items_[i].first) return false;
      if (items_[i].second.shape() != o.items_[i].second.shape()) return false;
    }
    return true;
  }

  void require_congruent(const ParamSet& o, const std::string& context) const {
    require(congruent_with(o), context + ": incongruent parameter sets");
  }

  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& [name, t] : items_) z.insert(name, Tensor(t.shape()));
    return z;
  }

  void fill(double v) {
    for (auto& [_, t] : items_) t.fill(v);
  }

  ParamSet& add_(const ParamSet& o) {
    require_congruent(o, "ParamSet::add_");
    for (std::size_t i = 0; i < items_.size(); ++i) items_[i].second.add_(o.items_[i].second);
    return *this;
  }

  ParamSet& sub_(const ParamSet& o) {
    require_congruent(o, "ParamSet::sub_");
    for (std::size_t i = 0; i < items_.size(); ++i) items_[i].second.sub_(o.items_[i].second);
    return *this;
  }

  ParamSet& scale_(double a) {
    for (auto& [_, t] : items_) t.scale_(a);
    return *this;
  }

  ParamSet& axpy_(double a, const ParamSet& o) {
    require_congruent(o, "ParamSet::axpy_");
    for (std::size_t i = 0; i < items_.size(); ++i) items_[i].second.axpy_(a, o.items_[i].second);
    return *this;
  }

  double max_abs_diff(const ParamSet& o) const {
    require_congruent(o, "ParamSet::max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& a = items_[i].second;
      const auto& b = o.items_[i].second;
      for (std::size_t e = 0; e < a.size(); ++e) m = std::max(m, std::abs(a[e] - b[e]));
    }
    return m;
  }

  bool bitwise_equal(const ParamSet& o) const {
    if (!congruent_with(o)) return false;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& a = items_[i].second;
      const auto& b = o.items_[i].second;
      if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
    }
    return true;
  }

  void check_finite(const std::string& context) const {
    for (const auto& [name, t] : items_) t.check_finite(context + "/" + name);
  }

  // Select the items whose name starts with the given prefix.
  ParamSet subset_with_prefix(const std::string& prefix) const {
    ParamSet out;
    for (const auto& [name, t] : items_) {
      if (name.rfind(prefix, 0) == 0) out.insert(name, t);
    }
    return out;
  }

  // Overwrite the congruent intersection of this set with values from `o`.
  void assign_from(const ParamSet& o) {
    for (const auto& [name, t] : o) {
      Tensor& dst = at(name);
      require(dst.shape() == t.shape(), "ParamSet::assign_from: shape mismatch for " + name);
      dst = t;
    }
  }

  // Element-wise mean that is exactly invariant to the order of `sets`:
  // each element's addends are sorted before summation.
  static ParamSet mean(const std::vector<const ParamSet*>& sets) {
    require(!sets.empty(), "ParamSet::mean: empty update list");
    for (const ParamSet* s : sets) sets[0]->require_congruent(*s, "ParamSet::mean");
    ParamSet out = sets[0]->zeros_like();
    const double inv = 1.0 / static_cast<double>(sets.size());
    std::vector<double> vals(sets.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      Tensor& dst = out.items_[i].second;
      for (std::size_t e = 0; e < dst.size(); ++e) {
        for (std::size_t s = 0; s < sets.size(); ++s) vals[s] = sets[s]->items_[i].second[e];
        std::sort(vals.begin(), vals.end());
        if (vals.front() == vals.back()) {  // mean of identical values is exact
          dst[e] = vals.front();
          continue;
        }
        double acc = 0.0;
        for (double v : vals) acc += v;
        dst[e] = acc * inv;
      }
    }
    return out;
  }

  static ParamSet mean(const std::vector<ParamSet>& sets) {
    std::vector<const ParamSet*> ptrs;
    ptrs.reserve(sets.size());
    for (const auto& s : sets) ptrs.push_back(&s);
    return mean(ptrs);
  }

  // --- binary serialization (lossless) ----------------------------------
  // layout: "FHPS" | u32 version | u64 count | per item:
  //   u64 name_len | name bytes | u32 rank | u64 dims[rank] | f64 data[]

  void save(std::ostream& os) const {
    os.write("FHPS", 4);
    write_u32(os, 1);
    write_u64(os, items_.size());
    for (const auto& [name, t] : items_) {
      write_u64(os, name.size());
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) write_u64(os, d);
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    require(os.good(), "ParamSet::save: write failed");
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.is_open(), "ParamSet::save: cannot open " + path);
    save(f);
  }

  static ParamSet load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    require(is.good() && std::memcmp(magic, "FHPS", 4) == 0, "ParamSet::load: bad magic");
    std::uint32_t version = read_u32(is);
    require(version == 1, "ParamSet::load: unsupported version");
    std::uint64_t count = read_u64(is);
    ParamSet out;
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t name_len = read_u64(is);
      std::string name(name_len, '\0');
      is.read(name.data(), static_cast<std::streamsize>(name_len));
      std::uint32_t rank = read_u32(is);
      std::vector<std::size_t> shape(rank);
      for (auto& d : shape) d = read_u64(is);
      Tensor t(shape);
      is.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
      require(is.good(), "ParamSet::load: truncated file");
      out.insert(name, std::move(t));
    }
    return out;
  }

  static ParamSet load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.is_open(), "ParamSet::load: cannot open " + path);
    return load(f);
  }

 private:
  static void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fedhar
