#pragma once

#include "nsvf/scene_ops.hpp"

#include <filesystem>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace nsvf {

/// Schema or semantic error; the message starts with "line N:".
class EditScriptError : public std::runtime_error {
 public:
  EditScriptError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// Edit script, one operation per line; '#' starts a comment.
///
///   select <instance> all
///   select <instance> box <x0> <y0> <z0> <x1> <y1> <z1>   (world coordinates, cell centers)
///   delete
///   clone <tx> <ty> <tz> [<rx> <ry> <rz>]
///   transform <tx> <ty> <tz> [<rx> <ry> <rz>]
///
/// Rotations are XYZ Euler angles in degrees about the world origin, applied
/// before the translation. `clone` appends a new instance holding a copy of the
/// selection moved by the transform and selects it. `transform` moves the
/// selection; a partial selection is split off into a new instance first.
/// `delete` removes the selected cells and clears the selection.
struct EditOp {
  enum class Kind { kSelect, kDelete, kClone, kTransform };
  Kind kind = Kind::kSelect;
  int line = 0;
  int instance = 0;
  bool all = false;
  Aabb region;
  RigidTransform transform;
};

std::vector<EditOp> parse_edit_script(std::string_view text);
std::vector<EditOp> load_edit_script(const std::filesystem::path& path);

/// Applies the operations in order.
void apply_edits(CompositeScene& scene, const std::vector<EditOp>& ops);

}  // namespace nsvf
