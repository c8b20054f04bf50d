#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "distillnn/student.hpp"
#include "distillnn/teacher.hpp"

namespace distillnn {

/// Writes the teacher manifest at `path` and one checkpoint per member next to
/// it (`<stem>.member<i>.ckpt`). Returns every file written.
std::vector<std::filesystem::path> save_teacher(const std::filesystem::path& path, const TeacherModel& teacher);
TeacherModel load_teacher(const std::filesystem::path& path);

/// Single checkpoint; the manifest records the mode (full or dd).
std::vector<std::filesystem::path> save_student(const std::filesystem::path& path, const StudentModel& student);
StudentModel load_student(const std::filesystem::path& path);

/// "teacher" or "student", read from the manifest without loading parameters.
std::string checkpoint_role(const std::filesystem::path& path);

}  // namespace distillnn
