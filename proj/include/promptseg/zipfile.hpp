#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace promptseg {

struct ZipEntry {
  std::string name;
  std::vector<uint8_t> data;
};

// Minimal zip container, enough for the .rmz archive: writes stored
// (uncompressed) entries with fixed timestamps so archives are
// byte-deterministic; reads stored and deflate entries with CRC checks.
void write_zip(const std::string& path, const std::vector<ZipEntry>& entries);
std::vector<ZipEntry> read_zip(const std::string& path);

}  // namespace promptseg
