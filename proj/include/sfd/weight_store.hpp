#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

enum class WeightDType { f32, f64 };

/// Portable named-tensor container. On disk: magic "SFDW1\n", an 8-byte
/// little-endian header length, a UTF-8 header of lines
/// "name<TAB>dtype<TAB>d0,d1,...<TAB>offset", then a payload of little-endian
/// IEEE-754 values. Offsets are relative to the payload start.
class WeightStore {
 public:
  void put(const std::string& name, const Tensor& t, WeightDType dtype = WeightDType::f32);
  bool contains(const std::string& name) const;
  // Throws std::out_of_range with the missing key in the message.
  const Tensor& get(const std::string& name) const;
  WeightDType dtype(const std::string& name) const;

  std::size_t entry_count() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }

  std::vector<std::uint8_t> save() const;
  static WeightStore load(const std::vector<std::uint8_t>& bytes);

  void save_file(const std::string& path) const;
  static WeightStore load_file(const std::string& path);

 private:
  struct Entry {
    WeightDType dtype;
    Tensor tensor;
  };
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

}  // namespace sfd
