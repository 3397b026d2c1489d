#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace visvar {

std::string read_file(const std::filesystem::path& path);

// Write-temp-then-rename with fsync; counts as one durable event.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Called after every durable state transition (store flush, manifest write).
// When VISVAR_CRASH_AT_COMMIT=N is set the process exits hard once the N-th
// event completes; crash-safety tests kill runs at randomized points with it.
void durable_event();

// ${VAR} expansion against the process environment; unknown vars expand empty.
std::string expand_env(std::string_view s);

}  // namespace visvar
