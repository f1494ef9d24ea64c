#include "capmeter/rng.hpp"

#include "capmeter/errors.hpp"

namespace capmeter {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSpectrum: return "InvalidSpectrum";
    case ErrorCode::DivergentPartition: return "DivergentPartition";
    case ErrorCode::InsufficientHits: return "InsufficientHits";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TrainingFailure: return "TrainingFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MixedTypes: return "MixedTypes";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::UndefinedThreshold: return "UndefinedThreshold";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllTied: return "AllTied";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::EmptyHeldout: return "EmptyHeldout";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ScheduleExhaustsData: return "ScheduleExhaustsData";
    case ErrorCode::ChainFailure: return "ChainFailure";
  }
  return "Unknown";
}

}  // namespace capmeter
