#include "distillnn/persistence.hpp"

#include "distillnn/checkpoint.hpp"
#include "distillnn/config.hpp"
#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

constexpr const char* kTeacherFormat = "distillnn-teacher";
constexpr int kTeacherVersion = 1;

std::filesystem::path member_path(const std::filesystem::path& manifest, std::size_t i) {
  std::filesystem::path p = manifest;
  p.replace_extension();
  p += ".member" + std::to_string(i) + ".ckpt";
  return p;
}

}  // namespace

std::vector<std::filesystem::path> save_teacher(const std::filesystem::path& path, const TeacherModel& teacher) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::filesystem::path> written;
  KeyValues manifest;
  manifest.set("format", kTeacherFormat);
  manifest.set("version", kTeacherVersion);
  manifest.set("role", "teacher");
  manifest.set("task", to_string(teacher.task()));
  manifest.set("output_dim", static_cast<std::uint64_t>(teacher.output_dim()));
  manifest.set("members", static_cast<std::uint64_t>(teacher.size()));
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    const auto file = member_path(path, i);
    KeyValues meta;
    meta.set("role", "teacher-member");
    meta.set("member", static_cast<std::uint64_t>(i));
    save_checkpoint(file, teacher.members()[i], meta);
    manifest.set("member." + std::to_string(i), file.filename().string());
    written.push_back(file);
    written.push_back(params_path(file));
  }
  manifest.merge(to_key_values(teacher.config()), "teacher.");
  manifest.write(path);
  written.push_back(path);
  return written;
}

TeacherModel load_teacher(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ContractError("teacher checkpoint not found: " + path.string());
  const KeyValues kv = KeyValues::read(path);
  if (kv.find("format").value_or("") != kTeacherFormat || kv.find("role").value_or("") != "teacher")
    throw ContractError(path.string() + " is not a teacher checkpoint");
  if (kv.get_int("version") != kTeacherVersion) throw ContractError("unsupported teacher checkpoint version");
  const TeacherConfig config = teacher_config_from(section(kv, "teacher"));
  const std::uint64_t n = kv.get_uint("members");
  std::vector<MlpModel> members;
  for (std::uint64_t i = 0; i < n; ++i)
    members.push_back(load_checkpoint(path.parent_path() / kv.at("member." + std::to_string(i))).model);
  return TeacherModel(config, parse_task(kv.at("task")), static_cast<std::size_t>(kv.get_uint("output_dim")),
                      std::move(members));
}

std::vector<std::filesystem::path> save_student(const std::filesystem::path& path, const StudentModel& student) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  KeyValues meta;
  meta.set("role", "student");
  meta.set("task", to_string(student.task()));
  meta.set("output_dim", static_cast<std::uint64_t>(student.output_dim()));
  meta.merge(to_key_values(student.config()), "student.");
  save_checkpoint(path, student.net(), meta);
  return {params_path(path), path};
}

StudentModel load_student(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ContractError("student checkpoint not found: " + path.string());
  if (checkpoint_role(path) != "student") throw ContractError(path.string() + " is not a student checkpoint");
  Checkpoint ck = load_checkpoint(path);
  const StudentConfig config = student_config_from(section(ck.meta, "student"));
  return StudentModel(std::move(ck.model), config, parse_task(ck.meta.at("task")),
                      static_cast<std::size_t>(ck.meta.get_uint("output_dim")));
}

std::string checkpoint_role(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ContractError("checkpoint not found: " + path.string());
  const KeyValues kv = KeyValues::read(path);
  if (auto r = kv.find("role")) return *r;
  if (auto r = kv.find("meta.role")) return *r;
  throw ContractError(path.string() + " does not record a model role");
}

}  // namespace distillnn
