#pragma once

#include <stdexcept>
#include <string>

namespace specforge {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SPECFORGE_DEFINE_ERROR(NAME)                              \
  struct NAME : Error {                                           \
    explicit NAME(const std::string& what) : Error(#NAME ": " + what) {} \
  }

SPECFORGE_DEFINE_ERROR(ShapeError);
SPECFORGE_DEFINE_ERROR(InvalidBits);
SPECFORGE_DEFINE_ERROR(AliasError);
SPECFORGE_DEFINE_ERROR(ZeroSignal);
SPECFORGE_DEFINE_ERROR(SignalTooShort);
SPECFORGE_DEFINE_ERROR(BadMagic);
SPECFORGE_DEFINE_ERROR(VersionMismatch);
SPECFORGE_DEFINE_ERROR(TruncatedShard);
SPECFORGE_DEFINE_ERROR(EmptyMask);
SPECFORGE_DEFINE_ERROR(BatchTooSmall);
SPECFORGE_DEFINE_ERROR(NonScalarRoot);
SPECFORGE_DEFINE_ERROR(NonFinite);
SPECFORGE_DEFINE_ERROR(SequenceTooLong);
SPECFORGE_DEFINE_ERROR(IndexError);
SPECFORGE_DEFINE_ERROR(DegenerateProjection);
SPECFORGE_DEFINE_ERROR(MissingExpertOutput);
SPECFORGE_DEFINE_ERROR(InsufficientSamples);
SPECFORGE_DEFINE_ERROR(ConfigError);
SPECFORGE_DEFINE_ERROR(IoError);

#undef SPECFORGE_DEFINE_ERROR

}  // namespace specforge
