#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcae {

using ClassId = std::uint8_t;

inline constexpr ClassId kIgnoreId = 255;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ClassInfo {
  ClassId id = 0;
  std::string name;
  Rgb color;
};

/// Ordered land-cover class list. Ids are contiguous 0..K-1 and 255 is
/// reserved for "ignore".
class ClassSchema {
 public:
  ClassSchema(std::string name, std::vector<ClassInfo> classes);

  /// The eight OpenEarthMap classes in their canonical order ("oem8"), or
  /// the same list followed by "others" ("oem9").
  static ClassSchema by_name(std::string_view name);
  static ClassSchema oem8();
  static ClassSchema oem9();

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
  const ClassInfo& at(ClassId id) const;

  bool valid(ClassId id) const noexcept { return id < classes_.size(); }
  std::optional<ClassId> find(std::string_view name) const;

 private:
  std::string name_;
  std::vector<ClassInfo> classes_;
};

}  // namespace mcae
