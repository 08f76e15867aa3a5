#pragma once

#include <stdexcept>
#include <string>

namespace cgd {

// Invalid or inconsistent configuration (model config, experiment config,
// difficulty settings, unknown enum values). CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or value violations in numeric code.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Sequence does not fit the model context.
struct SequenceTooLong : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TokenOutOfVocab : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// backward() through a value that is not connected to recorded operations.
struct DetachedValueError : std::logic_error {
  using std::logic_error::logic_error;
};

// Training loss became non-finite. Carries the offending step. Exit code 3.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long long step)
      : std::runtime_error(what), step(step) {}
  long long step;
};

// Optimizer received non-finite gradients; the step was rejected.
struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A required input file (corpus, checkpoint, report) is absent. Exit code 4.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corpus or report file failed to parse; message names line and field.
struct MalformedLine : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// apply_mixture cannot satisfy the requested stratum counts.
struct InsufficientStratum : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cgd
