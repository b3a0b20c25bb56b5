#include "nsvf/edit_script.hpp"

#include "nsvf/image.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace nsvf {
namespace {

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double number(const std::string& tok, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw EditScriptError(line, "expected a number, got '" + tok + "'");
  return v;
}

int index(const std::string& tok, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0)
    throw EditScriptError(line, "expected an instance index, got '" + tok + "'");
  return v;
}

RigidTransform parse_transform(const std::vector<std::string>& t, int line) {
  if (t.size() != 4 && t.size() != 7)
    throw EditScriptError(line, "'" + t[0] + "' takes 3 translation values and optionally 3 rotation angles");
  const Vec3 tr(number(t[1], line), number(t[2], line), number(t[3], line));
  Vec3 rot = Vec3::Zero();
  if (t.size() == 7) rot = Vec3(number(t[4], line), number(t[5], line), number(t[6], line));
  return RigidTransform::from_euler_degrees(rot, tr);
}

struct Selection {
  bool active = false;
  int instance = 0;
  std::vector<int> cells;
  int line = 0;
};

const Selection& require(const Selection& s, const EditOp& op, const char* what) {
  if (!s.active) throw EditScriptError(op.line, std::string("'") + what + "' without a selection");
  return s;
}

std::vector<int> all_cells(const FieldInstance& inst) {
  std::vector<int> ids(inst.grid->num_cells());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

}  // namespace

EditScriptError::EditScriptError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

std::vector<EditOp> parse_edit_script(std::string_view text) {
  std::vector<EditOp> ops;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::vector<std::string> t = tokenize(line);
    if (t.empty()) continue;
    EditOp op;
    op.line = line_no;
    if (t[0] == "select") {
      op.kind = EditOp::Kind::kSelect;
      if (t.size() == 3 && t[2] == "all") {
        op.instance = index(t[1], line_no);
        op.all = true;
      } else if (t.size() == 9 && t[2] == "box") {
        op.instance = index(t[1], line_no);
        op.region.min = Vec3(number(t[3], line_no), number(t[4], line_no), number(t[5], line_no));
        op.region.max = Vec3(number(t[6], line_no), number(t[7], line_no), number(t[8], line_no));
        if (!(op.region.min.array() <= op.region.max.array()).all())
          throw EditScriptError(line_no, "select box has min > max");
      } else {
        throw EditScriptError(line_no, "expected 'select <instance> all' or 'select <instance> box x0 y0 z0 x1 y1 z1'");
      }
    } else if (t[0] == "delete") {
      op.kind = EditOp::Kind::kDelete;
      if (t.size() != 1) throw EditScriptError(line_no, "'delete' takes no arguments");
    } else if (t[0] == "clone" || t[0] == "transform") {
      op.kind = t[0] == "clone" ? EditOp::Kind::kClone : EditOp::Kind::kTransform;
      op.transform = parse_transform(t, line_no);
    } else {
      throw EditScriptError(line_no, "unknown operation '" + t[0] + "'");
    }
    ops.push_back(op);
  }
  return ops;
}

std::vector<EditOp> load_edit_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open edit script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_edit_script(ss.str());
}

void apply_edits(CompositeScene& scene, const std::vector<EditOp>& ops) {
  Selection sel;
  for (const EditOp& op : ops) {
    switch (op.kind) {
      case EditOp::Kind::kSelect: {
        if (static_cast<std::size_t>(op.instance) >= scene.instances.size())
          throw EditScriptError(op.line, "instance " + std::to_string(op.instance) + " does not exist (scene has " +
                                             std::to_string(scene.instances.size()) + ")");
        const FieldInstance& inst = scene.instances[static_cast<std::size_t>(op.instance)];
        sel = {true, op.instance, op.all ? all_cells(inst) : select_voxels(inst, op.region), op.line};
        break;
      }
      case EditOp::Kind::kDelete: {
        require(sel, op, "delete");
        FieldInstance& inst = scene.instances[static_cast<std::size_t>(sel.instance)];
        inst = delete_voxels(inst, sel.cells);
        sel = {};
        break;
      }
      case EditOp::Kind::kClone: {
        require(sel, op, "clone");
        scene.instances.push_back(
            clone_voxels(scene.instances[static_cast<std::size_t>(sel.instance)], sel.cells, op.transform));
        sel = {true, static_cast<int>(scene.instances.size() - 1), all_cells(scene.instances.back()), op.line};
        break;
      }
      case EditOp::Kind::kTransform: {
        require(sel, op, "transform");
        FieldInstance& inst = scene.instances[static_cast<std::size_t>(sel.instance)];
        if (sel.cells.size() == inst.grid->num_cells()) {
          inst.transform = op.transform * inst.transform;
          break;
        }
        FieldInstance moved = clone_voxels(inst, sel.cells, op.transform);
        inst = delete_voxels(inst, sel.cells);
        scene.instances.push_back(std::move(moved));
        sel = {true, static_cast<int>(scene.instances.size() - 1), all_cells(scene.instances.back()), op.line};
        break;
      }
    }
  }
}

}  // namespace nsvf
