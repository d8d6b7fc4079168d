#pragma once

#include <stdexcept>
#include <string>

namespace mtad {

enum class ErrorKind {
  dimension,
  domain,
  config,
  data,
  state,
  numeric,
  corrupt_checkpoint,
  checkpoint_version,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define MTAD_DEFINE_ERROR(Name, Kind)                                         \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

MTAD_DEFINE_ERROR(DimensionError, dimension)
MTAD_DEFINE_ERROR(DomainError, domain)
MTAD_DEFINE_ERROR(ConfigError, config)
MTAD_DEFINE_ERROR(DataError, data)
MTAD_DEFINE_ERROR(StateError, state)
MTAD_DEFINE_ERROR(NumericError, numeric)
MTAD_DEFINE_ERROR(CorruptCheckpointError, corrupt_checkpoint)
MTAD_DEFINE_ERROR(CheckpointVersionError, checkpoint_version)

#undef MTAD_DEFINE_ERROR

// Process exit status for an error class: 2 config, 3 data/io, 4 numeric, 1 otherwise.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::data:
    case ErrorKind::corrupt_checkpoint:
    case ErrorKind::checkpoint_version:
      return 3;
    case ErrorKind::numeric:
    case ErrorKind::domain:
      return 4;
    default:
      return 1;
  }
}

}  // namespace mtad
