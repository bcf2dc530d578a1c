#pragma once

#include <stdexcept>
#include <string>

namespace persrep {

// Failure categories surfaced across the pipeline. Tests match on the code,
// messages are free-form context.
enum class ErrorCode {
  // dataset
  MissingTrainImages,
  InsufficientTestImages,
  MaskShapeMismatch,
  MalformedAnnotation,
  TooFewInstances,
  EmptyMask,
  // generation
  MissingIdentifierToken,
  MalformedTemplate,
  ForegroundTooLarge,
  BackendUnavailable,
  InsufficientSourceImages,
  ShapeMismatch,
  InvalidTimestep,
  MaskerFailure,
  UnknownInstance,
  MissingMasks,
  ExternalGeneratorError,
  // encoder
  EncoderUnavailable,
  NonFiniteOutput,
  UnknownTargetMap,
  // training
  EmptyPool,
  InsufficientNegatives,
  DimensionMismatch,
  NonPositiveTemperature,
  MissingHead,
  EmptyPositives,
  NonFiniteLoss,
  // evaluation
  NoPositives,
  EmptyRetrievalSet,
  EmptyRelevance,
  ConstantMap,
  EmptyPrediction,
  MismatchedImageSets,
  NoNegatives,
  EmptyMaskAfterDownscale,
  // analysis
  PoolTooSmall,
  // orchestration
  IncompatibleRuns,
  ConfigError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace persrep
