#pragma once

#include <filesystem>
#include <string>

#include "kern/model.hpp"

namespace kern {

/// Versioned JSON with the full config, every parameter tensor under its
/// stable name, the relation weights, and the loss history. Doubles are
/// written in shortest round-trip form, so save -> load -> save is
/// byte-identical.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

/// Atomic: writes to a temp file, then renames into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace kern
