#pragma once

#include <stdexcept>
#include <string>

namespace scaletrain {

// Exit codes shared by the CLI.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string tag, const std::string& what)
      : std::runtime_error(what), kind_(kind), tag_(std::move(tag)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short machine-readable identifier, e.g. "shape_mismatch".
  const std::string& tag() const noexcept { return tag_; }

 private:
  ErrorKind kind_;
  std::string tag_;
};

#define SCALETRAIN_DEFINE_ERROR(Name, Kind, Tag)                       \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Kind, Tag, what) {} \
  };

SCALETRAIN_DEFINE_ERROR(ShapeError, ErrorKind::Numeric, "shape_mismatch")
SCALETRAIN_DEFINE_ERROR(DomainError, ErrorKind::Numeric, "domain_error")
SCALETRAIN_DEFINE_ERROR(NumericError, ErrorKind::Numeric, "numeric_failure")
SCALETRAIN_DEFINE_ERROR(ParseError, ErrorKind::Usage, "parse_error")
SCALETRAIN_DEFINE_ERROR(UsageError, ErrorKind::Usage, "usage_error")
SCALETRAIN_DEFINE_ERROR(UnsatisfiablePlanError, ErrorKind::Usage, "unsatisfiable_plan")
SCALETRAIN_DEFINE_ERROR(ArchitectureMismatchError, ErrorKind::Data, "architecture_mismatch")
SCALETRAIN_DEFINE_ERROR(IoError, ErrorKind::Data, "io_error")
SCALETRAIN_DEFINE_ERROR(BadMagicError, ErrorKind::Data, "bad_magic")
SCALETRAIN_DEFINE_ERROR(TruncatedFileError, ErrorKind::Data, "truncated_file")
SCALETRAIN_DEFINE_ERROR(RecordCountMismatchError, ErrorKind::Data, "record_count_mismatch")
SCALETRAIN_DEFINE_ERROR(VersionMismatchError, ErrorKind::Data, "version_mismatch")
SCALETRAIN_DEFINE_ERROR(ChecksumError, ErrorKind::Data, "checksum_failure")
SCALETRAIN_DEFINE_ERROR(CorruptCheckpointError, ErrorKind::Data, "corrupt_checkpoint")

#undef SCALETRAIN_DEFINE_ERROR

}  // namespace scaletrain
