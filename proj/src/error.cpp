#include "dcs/error.hpp"

#include <array>
#include <utility>

namespace dcs {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 23> kNames{{
    {ErrorCode::InvalidArgument, "INVALID_ARGUMENT"},
    {ErrorCode::InstallConflict, "INSTALL_CONFLICT"},
    {ErrorCode::RoutingError, "ROUTING_ERROR"},
    {ErrorCode::NoSuchCrate, "NO_SUCH_CRATE"},
    {ErrorCode::FrameCorruption, "FRAME_CORRUPTION"},
    {ErrorCode::WiringConflict, "WIRING_CONFLICT"},
    {ErrorCode::NoSuchChannel, "NO_SUCH_CHANNEL"},
    {ErrorCode::NoSuchDb, "NO_SUCH_DB"},
    {ErrorCode::ReadOnly, "READ_ONLY"},
    {ErrorCode::IoFault, "IO_FAULT"},
    {ErrorCode::BadType, "BAD_TYPE"},
    {ErrorCode::BadFrame, "BAD_FRAME"},
    {ErrorCode::FrameTooLarge, "FRAME_TOO_LARGE"},
    {ErrorCode::VersionMismatch, "VERSION_MISMATCH"},
    {ErrorCode::ConnectionRefused, "CONNECTION_REFUSED"},
    {ErrorCode::PortConflict, "PORT_CONFLICT"},
    {ErrorCode::SaveIncomplete, "SAVE_INCOMPLETE"},
    {ErrorCode::NameExists, "NAME_EXISTS"},
    {ErrorCode::NoSuchTune, "NO_SUCH_TUNE"},
    {ErrorCode::MigrateAborted, "MIGRATE_ABORTED"},
    {ErrorCode::PlanIncomplete, "PLAN_INCOMPLETE"},
    {ErrorCode::VerifyMismatch, "VERIFY_MISMATCH"},
    {ErrorCode::ConfigError, "CONFIG_ERROR"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UNKNOWN";
}

ErrorCode error_code_from_string(std::string_view s) {
  for (const auto& [c, name] : kNames) {
    if (name == s) return c;
  }
  throw Error(ErrorCode::BadFrame, "unknown error code " + std::string(s));
}

}  // namespace dcs
