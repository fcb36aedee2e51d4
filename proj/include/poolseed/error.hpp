#pragma once

#include <stdexcept>
#include <string>

namespace poolseed {

enum class Err {
  // dataset
  MagicMismatch,
  CountMismatch,
  TruncatedFile,
  OddCount,
  FractionOutOfRange,
  InsufficientClassSamples,
  // nn
  DimensionMismatch,
  DivergedLoss,
  WrongHead,
  NoHiddenLayer,
  BadSpec,
  // pretext
  NotAnImage,
  MaskTooLarge,
  TaskModelMismatch,
  // clustering
  KExceedsPoints,
  EmptyInput,
  BudgetExceedsPool,
  QuotaExceedsCluster,
  TooManyBins,
  // query
  NotADistribution,
  NoDropout,
  HeterogeneousEnsemble,
  // loop
  ConfigInvalid,
  IndexOutOfRange,
  DuplicateIndex,
  // report
  MixedConfigs,
  EmptyGroup,
  MismatchedRuns,
  TooFewSamples,
  // cli / io
  ConfigParse,
  Validation,
  InvalidGridKey,
  NoRecordsFound,
  IoFailure,
  InvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace poolseed
