#pragma once

#include <stdexcept>
#include <string>

namespace fd {

#define FD_DEFINE_ERROR(Name)                                \
  struct Name : std::runtime_error {                         \
    explicit Name(const std::string& msg)                    \
        : std::runtime_error(std::string(#Name ": ") + msg) {} \
  }

FD_DEFINE_ERROR(InsufficientData);
FD_DEFINE_ERROR(EmptySplit);
FD_DEFINE_ERROR(UndefinedSNR);
FD_DEFINE_ERROR(DegenerateRealization);
FD_DEFINE_ERROR(ShapeMismatch);
FD_DEFINE_ERROR(DegenerateBatch);
FD_DEFINE_ERROR(EmptySequence);
FD_DEFINE_ERROR(InvalidRate);
FD_DEFINE_ERROR(InvalidSpec);
FD_DEFINE_ERROR(NonFiniteLoss);
FD_DEFINE_ERROR(NonFiniteValue);
FD_DEFINE_ERROR(VersionMismatch);
FD_DEFINE_ERROR(CorruptCheckpoint);
FD_DEFINE_ERROR(LengthMismatch);
FD_DEFINE_ERROR(EmptyInput);
FD_DEFINE_ERROR(NoPositives);
FD_DEFINE_ERROR(IoError);
FD_DEFINE_ERROR(DisconnectedGraph);

#undef FD_DEFINE_ERROR

}  // namespace fd
