#pragma once

#include <stdexcept>
#include <string>

namespace tnfeat {

enum class Errc {
  InvalidMode,
  ShapeMismatch,
  InvalidInput,
  UndefinedFit,
  NoClassesFound,
  IoError,
  StratificationImpossible,
  MissingClass,
  EmbeddingMismatch,
  EmptyTrainingSet,
  InvalidLabel,
  EmptyEvaluation,
  InvalidConfig,
  LeakageDetected,
  Unreadable,
};

const char* to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tnfeat
