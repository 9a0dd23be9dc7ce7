#include "mutare/errors.hpp"

namespace mutare {

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind), message_(message), full_(message) {}

void Error::add_stage(const std::string& stage) {
  stages_.insert(stages_.begin(), stage);
  full_.clear();
  for (const auto& s : stages_) full_ += "[" + s + "] ";
  full_ += message_;
}

}  // namespace mutare
