#include "persrep/errors.hpp"

namespace persrep {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingTrainImages: return "MissingTrainImages";
    case ErrorCode::InsufficientTestImages: return "InsufficientTestImages";
    case ErrorCode::MaskShapeMismatch: return "MaskShapeMismatch";
    case ErrorCode::MalformedAnnotation: return "MalformedAnnotation";
    case ErrorCode::TooFewInstances: return "TooFewInstances";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MissingIdentifierToken: return "MissingIdentifierToken";
    case ErrorCode::MalformedTemplate: return "MalformedTemplate";
    case ErrorCode::ForegroundTooLarge: return "ForegroundTooLarge";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InsufficientSourceImages: return "InsufficientSourceImages";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidTimestep: return "InvalidTimestep";
    case ErrorCode::MaskerFailure: return "MaskerFailure";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::MissingMasks: return "MissingMasks";
    case ErrorCode::ExternalGeneratorError: return "ExternalGeneratorError";
    case ErrorCode::EncoderUnavailable: return "EncoderUnavailable";
    case ErrorCode::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::UnknownTargetMap: return "UnknownTargetMap";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::MissingHead: return "MissingHead";
    case ErrorCode::EmptyPositives: return "EmptyPositives";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::EmptyRetrievalSet: return "EmptyRetrievalSet";
    case ErrorCode::EmptyRelevance: return "EmptyRelevance";
    case ErrorCode::ConstantMap: return "ConstantMap";
    case ErrorCode::EmptyPrediction: return "EmptyPrediction";
    case ErrorCode::MismatchedImageSets: return "MismatchedImageSets";
    case ErrorCode::NoNegatives: return "NoNegatives";
    case ErrorCode::EmptyMaskAfterDownscale: return "EmptyMaskAfterDownscale";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::IncompatibleRuns: return "IncompatibleRuns";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace persrep
