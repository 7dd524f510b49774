#include "promptseg/zipfile.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "promptseg/common.hpp"

namespace promptseg {

namespace {

constexpr uint32_t kLocalSig = 0x04034b50;
constexpr uint32_t kCentralSig = 0x02014b50;
constexpr uint32_t kEndSig = 0x06054b50;

void put16(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put32(std::string& out, uint32_t v) {
  put16(out, v & 0xffff);
  put16(out, v >> 16);
}

uint32_t get16(const uint8_t* p) { return uint32_t(p[0]) | (uint32_t(p[1]) << 8); }
uint32_t get32(const uint8_t* p) { return get16(p) | (get16(p + 2) << 16); }

uint32_t crc_of(const std::vector<uint8_t>& data) {
  return uint32_t(crc32(0L, data.empty() ? Z_NULL : data.data(), uInt(data.size())));
}

std::vector<uint8_t> inflate_raw(const uint8_t* src, size_t csize, size_t usize) {
  std::vector<uint8_t> out(usize);
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) fail(ErrorCode::io_error, "inflateInit failed");
  zs.next_in = const_cast<uint8_t*>(src);
  zs.avail_in = uInt(csize);
  zs.next_out = out.data();
  zs.avail_out = uInt(usize);
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != usize)
    fail(ErrorCode::io_error, "zip entry inflate failed");
  return out;
}

}  // namespace

void write_zip(const std::string& path, const std::vector<ZipEntry>& entries) {
  std::string out;
  std::string central;
  size_t count = 0;

  for (const auto& e : entries) {
    uint32_t offset = uint32_t(out.size());
    uint32_t crc = crc_of(e.data);
    uint32_t size = uint32_t(e.data.size());

    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // method: stored
    put16(out, 0);   // mod time (fixed for determinism)
    put16(out, 0x21);  // mod date: 1980-01-01
    put32(out, crc);
    put32(out, size);  // compressed
    put32(out, size);  // uncompressed
    put16(out, uint32_t(e.name.size()));
    put16(out, 0);  // extra len
    out.append(e.name);
    out.append(reinterpret_cast<const char*>(e.data.data()), e.data.size());

    put32(central, kCentralSig);
    put16(central, 20);  // made by
    put16(central, 20);  // needed
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0x21);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, uint32_t(e.name.size()));
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central.append(e.name);
    ++count;
  }

  uint32_t cd_offset = uint32_t(out.size());
  out += central;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, uint32_t(count));
  put16(out, uint32_t(count));
  put32(out, uint32_t(central.size()));
  put32(out, cd_offset);
  put16(out, 0);  // comment

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::io_error, "cannot write zip: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) fail(ErrorCode::io_error, "zip write failed: " + path);
}

std::vector<ZipEntry> read_zip(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::missing_file, "cannot open zip: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 22) fail(ErrorCode::io_error, "zip too small: " + path);

  // locate end-of-central-directory record (scan backwards over a
  // possible trailing comment)
  size_t eocd = buf.size();
  size_t lo = buf.size() >= 22 + 65535 ? buf.size() - 22 - 65535 : 0;
  bool found = false;
  for (size_t i = buf.size() - 22 + 1; i-- > lo;) {
    if (get32(&buf[i]) == kEndSig) {
      eocd = i;
      found = true;
      break;
    }
  }
  if (!found) fail(ErrorCode::io_error, "zip end record not found: " + path);

  size_t n_entries = get16(&buf[eocd + 10]);
  size_t cd_offset = get32(&buf[eocd + 16]);

  std::vector<ZipEntry> entries;
  entries.reserve(n_entries);
  size_t pos = cd_offset;
  for (size_t i = 0; i < n_entries; ++i) {
    if (pos + 46 > buf.size() || get32(&buf[pos]) != kCentralSig)
      fail(ErrorCode::io_error, "zip central directory corrupt: " + path);
    uint32_t method = get16(&buf[pos + 10]);
    uint32_t crc = get32(&buf[pos + 16]);
    size_t csize = get32(&buf[pos + 20]);
    size_t usize = get32(&buf[pos + 24]);
    size_t name_len = get16(&buf[pos + 28]);
    size_t extra_len = get16(&buf[pos + 30]);
    size_t comment_len = get16(&buf[pos + 32]);
    size_t local_off = get32(&buf[pos + 42]);
    std::string name(reinterpret_cast<const char*>(&buf[pos + 46]), name_len);
    pos += 46 + name_len + extra_len + comment_len;

    if (local_off + 30 > buf.size() || get32(&buf[local_off]) != kLocalSig)
      fail(ErrorCode::io_error, "zip local header corrupt: " + path);
    size_t lh_name = get16(&buf[local_off + 26]);
    size_t lh_extra = get16(&buf[local_off + 28]);
    size_t data_off = local_off + 30 + lh_name + lh_extra;
    if (data_off + csize > buf.size()) fail(ErrorCode::io_error, "zip entry truncated: " + path);

    ZipEntry e;
    e.name = std::move(name);
    if (method == 0) {
      e.data.assign(buf.begin() + data_off, buf.begin() + data_off + csize);
    } else if (method == 8) {
      e.data = inflate_raw(&buf[data_off], csize, usize);
    } else {
      fail(ErrorCode::io_error, "unsupported zip method " + std::to_string(method));
    }
    if (crc_of(e.data) != crc) fail(ErrorCode::io_error, "zip CRC mismatch in " + e.name);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace promptseg
