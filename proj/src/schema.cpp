#include "mcae/schema.hpp"

#include <set>

#include "mcae/error.hpp"

namespace mcae {

ClassSchema::ClassSchema(std::string name, std::vector<ClassInfo> classes)
    : name_(std::move(name)), classes_(std::move(classes)) {
  if (classes_.size() < 2 || classes_.size() > kIgnoreId) {
    fail(ErrorCode::Config, "class schema needs between 2 and 255 classes");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != i) {
      fail(ErrorCode::Config, "class ids must be contiguous from 0");
    }
    if (!names.insert(classes_[i].name).second) {
      fail(ErrorCode::Config, "duplicate class name '" + classes_[i].name + "'");
    }
  }
}

ClassSchema ClassSchema::oem8() {
  return ClassSchema("oem8", {
                                 {0, "bareland", {128, 0, 0}},
                                 {1, "rangeland", {0, 255, 36}},
                                 {2, "developed space", {148, 148, 148}},
                                 {3, "road", {255, 255, 255}},
                                 {4, "tree", {34, 97, 38}},
                                 {5, "water", {0, 69, 255}},
                                 {6, "agricultural land", {75, 181, 73}},
                                 {7, "building", {222, 31, 7}},
                             });
}

ClassSchema ClassSchema::oem9() {
  auto classes = oem8().classes();
  classes.push_back({8, "others", {255, 255, 0}});
  return ClassSchema("oem9", std::move(classes));
}

ClassSchema ClassSchema::by_name(std::string_view name) {
  if (name == "oem8") return oem8();
  if (name == "oem9") return oem9();
  fail(ErrorCode::Config, "unknown schema '" + std::string(name) + "'");
}

const ClassInfo& ClassSchema::at(ClassId id) const {
  if (!valid(id)) {
    fail(ErrorCode::InvalidClass, "class id " + std::to_string(id) + " not in schema " + name_);
  }
  return classes_[id];
}

std::optional<ClassId> ClassSchema::find(std::string_view name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

}  // namespace mcae
