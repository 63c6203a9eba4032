#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcs {

// Every failure the system reports carries one of these codes. The names
// double as the "code" strings of protocol err messages.
enum class ErrorCode {
  // camac / highway
  InvalidArgument,
  InstallConflict,
  RoutingError,
  NoSuchCrate,
  FrameCorruption,
  WiringConflict,
  // channel access
  NoSuchChannel,
  NoSuchDb,
  ReadOnly,
  IoFault,
  BadType,
  BadFrame,
  FrameTooLarge,
  VersionMismatch,
  ConnectionRefused,
  PortConflict,
  // archive
  SaveIncomplete,
  NameExists,
  NoSuchTune,
  // migration
  MigrateAborted,
  PlanIncomplete,
  VerifyMismatch,
  // config
  ConfigError,
};

std::string_view to_string(ErrorCode code);
ErrorCode error_code_from_string(std::string_view s);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dcs
