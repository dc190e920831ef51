#pragma once

#include <stdexcept>
#include <string>

namespace levelnet {

/// Base of every error the library throws. `code()` is a stable identifier
/// used by the CLI as a machine-parsable prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define LEVELNET_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

LEVELNET_DEFINE_ERROR(DimensionError)
LEVELNET_DEFINE_ERROR(AlphabetError)
LEVELNET_DEFINE_ERROR(UnknownTileError)
LEVELNET_DEFINE_ERROR(ShapeError)
LEVELNET_DEFINE_ERROR(EmptyStreamError)
LEVELNET_DEFINE_ERROR(StreamOrderError)
LEVELNET_DEFINE_ERROR(BadTileSizeError)
LEVELNET_DEFINE_ERROR(FrameTooLargeError)
LEVELNET_DEFINE_ERROR(WindowOutOfBoundsError)
LEVELNET_DEFINE_ERROR(NoSamplesError)
LEVELNET_DEFINE_ERROR(MissingLevelError)
LEVELNET_DEFINE_ERROR(BadVariantError)
LEVELNET_DEFINE_ERROR(BatchTooSmallError)
LEVELNET_DEFINE_ERROR(NanLossError)
LEVELNET_DEFINE_ERROR(DiskError)
LEVELNET_DEFINE_ERROR(EmptySetError)
LEVELNET_DEFINE_ERROR(TooFewPointsError)
LEVELNET_DEFINE_ERROR(MissingNetworkError)
LEVELNET_DEFINE_ERROR(MissingSpriteError)
LEVELNET_DEFINE_ERROR(ConfigError)
LEVELNET_DEFINE_ERROR(ImageIOError)

#undef LEVELNET_DEFINE_ERROR

/// Raised by pair_frame when the best match is below the accept threshold.
class LowScoreRejection : public Error {
 public:
  LowScoreRejection(double score, double threshold)
      : Error("LowScoreRejection",
              "match score " + std::to_string(score) + " below threshold " +
                  std::to_string(threshold)),
        score_(score) {}
  double score() const noexcept { return score_; }

 private:
  double score_;
};

}  // namespace levelnet
