#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pairsr/registration.hpp"

namespace pairsr {

/// Runs one subcommand. Returns 0 on success, 1 on validation errors (bad
/// flags, missing files, out-of-range parameters) and 2 on runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

// Patch-pair files passed from `match` to `build-lib`. Little-endian:
// "PPAR", u32 version, u32 side, u64 count, then per pair
// i32 row, i32 col, i32 di, i32 dj, u8 textured, side^2 f64 HR, side^2 f64 LR-up.
void save_patch_pairs(const std::vector<PatchPair>& pairs, const std::filesystem::path& path);
std::vector<PatchPair> load_patch_pairs(const std::filesystem::path& path);

}  // namespace pairsr
